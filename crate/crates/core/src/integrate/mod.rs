//! Fixed-step integrators, sampled trajectories and measurement noise.
//!
//! A vector field is any `FnMut(t, state, out)` that writes the time
//! derivative of `state` into `out`.

mod noise;
mod trajectory;

pub use noise::{add_noise, NoiseSpec};
pub use trajectory::{read_trajectory_csv, write_trajectory_csv, Trajectory};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("step size must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("{0} must be at least 1")]
    InvalidCount(&'static str),
    #[error("state became non-finite at t = {time}")]
    NonFinite { time: f64 },
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("noise level must be finite and non-negative, got {0}")]
    InvalidNoise(f64),
    #[error("trajectory I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("trajectory CSV line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// One-step methods available to [`simulate_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stepper {
    Euler,
    Rk4,
}

fn check_step(dt: f64) -> Result<(), IntegrateError> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(IntegrateError::InvalidStep(dt))
    }
}

fn check_finite(s: &[f64], time: f64) -> Result<(), IntegrateError> {
    if s.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(IntegrateError::NonFinite { time })
    }
}

/// `s + dt * f(t, s)`.
pub fn step_euler<F>(rhs: &mut F, s: &[f64], t: f64, dt: f64) -> Result<Vec<f64>, IntegrateError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    check_step(dt)?;
    let mut k = vec![0.0; s.len()];
    rhs(t, s, &mut k);
    let next: Vec<f64> = s.iter().zip(&k).map(|(x, d)| x + dt * d).collect();
    check_finite(&next, t + dt)?;
    Ok(next)
}

/// Classical fourth-order Runge-Kutta step.
pub fn step_rk4<F>(rhs: &mut F, s: &[f64], t: f64, dt: f64) -> Result<Vec<f64>, IntegrateError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    check_step(dt)?;
    let n = s.len();
    let half = 0.5 * dt;
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    rhs(t, s, &mut k1);
    for j in 0..n {
        tmp[j] = s[j] + half * k1[j];
    }
    rhs(t + half, &tmp, &mut k2);
    for j in 0..n {
        tmp[j] = s[j] + half * k2[j];
    }
    rhs(t + half, &tmp, &mut k3);
    for j in 0..n {
        tmp[j] = s[j] + dt * k3[j];
    }
    rhs(t + dt, &tmp, &mut k4);

    let next: Vec<f64> = (0..n)
        .map(|j| s[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
        .collect();
    check_finite(&next, t + dt)?;
    Ok(next)
}

/// RK4 at internal step `dt / substeps`, recording every `substeps`-th state.
/// The result has `steps + 1` rows.
pub fn simulate<F>(
    rhs: F,
    s0: &[f64],
    t0: f64,
    dt: f64,
    steps: usize,
    substeps: usize,
) -> Result<Trajectory, IntegrateError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    simulate_with(Stepper::Rk4, rhs, s0, t0, dt, steps, substeps)
}

pub fn simulate_with<F>(
    stepper: Stepper,
    mut rhs: F,
    s0: &[f64],
    t0: f64,
    dt: f64,
    steps: usize,
    substeps: usize,
) -> Result<Trajectory, IntegrateError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    check_step(dt)?;
    if steps == 0 {
        return Err(IntegrateError::InvalidCount("step count"));
    }
    if substeps == 0 {
        return Err(IntegrateError::InvalidCount("substeps"));
    }
    check_finite(s0, t0)?;

    let d = s0.len();
    let h = dt / substeps as f64;
    let mut data = Vec::with_capacity((steps + 1) * d);
    data.extend_from_slice(s0);
    let mut s = s0.to_vec();
    for i in 0..steps {
        for k in 0..substeps {
            let t = t0 + (i * substeps + k) as f64 * h;
            s = match stepper {
                Stepper::Euler => step_euler(&mut rhs, &s, t, h)?,
                Stepper::Rk4 => step_rk4(&mut rhs, &s, t, h)?,
            };
        }
        data.extend_from_slice(&s);
    }
    let states = ndarray::Array2::from_shape_vec((steps + 1, d), data)
        .expect("row-major buffer sized (steps + 1) * d");
    Trajectory::new(t0, dt, states)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_t: f64, s: &[f64], out: &mut [f64]) {
        out[0] = -s[0];
    }

    fn zero(_t: f64, _s: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
    }

    fn global_error(stepper: Stepper, dt: f64) -> f64 {
        let steps = (1.0 / dt).round() as usize;
        let traj = simulate_with(stepper, decay, &[1.0], 0.0, dt, steps, 1).unwrap();
        (traj.state(steps)[0] - (-1.0f64).exp()).abs()
    }

    #[test]
    fn euler_basic_steps() {
        assert_eq!(step_euler(&mut zero, &[1.0, 2.0], 0.0, 0.5).unwrap(), vec![1.0, 2.0]);
        assert_eq!(step_euler(&mut decay, &[1.0], 0.0, 0.1).unwrap(), vec![0.9]);
        let mut s = vec![1.0];
        for i in 0..10 {
            s = step_euler(&mut decay, &s, i as f64 * 0.1, 0.1).unwrap();
        }
        assert!((s[0] - 0.3486784401).abs() < 1e-12);
    }

    #[test]
    fn rk4_single_step() {
        assert_eq!(step_rk4(&mut zero, &[1.0, 2.0], 0.0, 0.5).unwrap(), vec![1.0, 2.0]);
        let s = step_rk4(&mut decay, &[1.0], 0.0, 0.1).unwrap();
        // k1=-1, k2=-0.95, k3=-0.9525, k4=-0.90475
        let hand = 1.0 + 0.1 / 6.0 * (-1.0 - 2.0 * 0.95 - 2.0 * 0.9525 - 0.90475);
        assert!((s[0] - hand).abs() < 1e-15);
        assert!((s[0] - 0.9048375).abs() < 1e-12);
    }

    #[test]
    fn convergence_orders() {
        let euler = global_error(Stepper::Euler, 0.1) / global_error(Stepper::Euler, 0.05);
        assert!((1.5..=3.0).contains(&euler), "euler ratio {euler}");
        let rk4 = global_error(Stepper::Rk4, 0.1) / global_error(Stepper::Rk4, 0.05);
        assert!((8.0..=32.0).contains(&rk4), "rk4 ratio {rk4}");
    }

    #[test]
    fn rejects_bad_steps() {
        assert!(matches!(
            step_euler(&mut decay, &[1.0], 0.0, 0.0),
            Err(IntegrateError::InvalidStep(_))
        ));
        assert!(step_rk4(&mut decay, &[1.0], 0.0, -0.1).is_err());
        assert!(simulate(decay, &[1.0], 0.0, 0.1, 0, 1).is_err());
        assert!(simulate(decay, &[1.0], 0.0, 0.1, 3, 0).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        let explode = |_t: f64, s: &[f64], out: &mut [f64]| out[0] = s[0] * s[0];
        let err = simulate(explode, &[1.0], 0.0, 0.5, 20, 1).unwrap_err();
        assert!(matches!(err, IntegrateError::NonFinite { .. }));
    }

    #[test]
    fn constant_field_repeats_state() {
        let traj = simulate(zero, &[3.0, 4.0], 0.0, 0.1, 5, 3).unwrap();
        assert_eq!(traj.steps(), 5);
        for i in 0..=5 {
            assert_eq!(traj.state(i).to_vec(), vec![3.0, 4.0]);
        }
    }

    #[test]
    fn substepped_rk4_matches_exponential() {
        let traj = simulate(decay, &[1.0], 0.0, 0.1, 10, 10).unwrap();
        assert!((traj.state(10)[0] - 0.3678794412).abs() < 1e-9);
    }

    #[test]
    fn euler_simulation_is_bit_exact_recurrence() {
        let field = |_t: f64, s: &[f64], out: &mut [f64]| {
            out[0] = s[1] - s[0] * s[0] * 0.3;
            out[1] = -s[0] + 0.1 * s[1];
        };
        let dt = 0.037;
        let traj = simulate_with(Stepper::Euler, field, &[0.4, -1.1], 0.0, dt, 50, 1).unwrap();
        let mut s = [0.4, -1.1];
        for i in 0..=50 {
            assert_eq!(traj.state(i).to_vec(), s.to_vec());
            let mut d = [0.0; 2];
            field(0.0, &s, &mut d);
            s = [s[0] + dt * d[0], s[1] + dt * d[1]];
        }
    }

    #[test]
    fn fhn_truth_has_relaxation_amplitude() {
        use crate::dynamics::{equilibrium, FhnParams};
        let p = FhnParams::default();
        let e = equilibrium(&p).unwrap();
        let traj = simulate(p.vector_field(), &[-e.u_e, -e.v_e], 0.0, 0.01, 2000, 10).unwrap();
        assert_eq!(traj.len(), 2001);
        let max_u = traj.column(0).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!((1.0..=2.5).contains(&max_u), "max |u| = {max_u}");
    }
}
