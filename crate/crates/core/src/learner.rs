//! Forward-Euler residual training of a network vector field.
//!
//! Given samples `x_0, ..., x_K` on a uniform grid with step `dt`, the network
//! `N` is fitted so that one explicit Euler step reproduces the data:
//!
//! ```text
//! loss = (1/K) * sum_{i=0}^{K-1} || -x_{i+1} + x_i + dt * N(x_i) ||^2
//! ```
//!
//! The trained field is then integrated with RK4 from the first sample and
//! compared against the reference trajectory.

use std::time::Instant;

use ndarray::{s, Array2, Axis};
use thiserror::Error;

use crate::dynamics::{equilibrium, DynamicsError, FhnParams};
use crate::exec::{chunk_ranges, map_ordered, Exec};
use crate::integrate::{add_noise, simulate, IntegrateError, NoiseSpec, Trajectory};
use crate::neural::{adam_step, AdamConfig, AdamState, Gradients, Mlp, NeuralError};

/// Residual rows per gradient chunk. Fixed so the reduction order, and hence
/// every bit of the result, does not depend on the execution strategy.
pub const RESIDUAL_CHUNK: usize = 256;

/// Relative tolerance when matching a configured step or horizon to data.
const GRID_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Divergence { epoch: usize, loss: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

impl LearnError {
    /// Failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            LearnError::Divergence { .. } | LearnError::Integrate(IntegrateError::NonFinite { .. })
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub dt: f64,
    pub horizon: f64,
    pub width: usize,
    pub depth: usize,
    pub epochs: usize,
    pub lr: f64,
    pub noise: f64,
    pub seed: u64,
    /// Append time as an extra network input.
    pub time_input: bool,
    /// Stop early once the training loss falls below this value.
    pub loss_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            horizon: 20.0,
            width: 64,
            depth: 1,
            epochs: 20_000,
            lr: 1e-3,
            noise: 0.0,
            seed: 1,
            time_input: false,
            loss_tol: 1e-10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |msg: String| Err(LearnError::Config(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.width == 0 || self.depth == 0 || self.epochs == 0 {
            return bad(format!(
                "width, depth and epochs must be at least 1 (got {}, {}, {})",
                self.width, self.depth, self.epochs
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise level must be non-negative, got {}", self.noise));
        }
        if !(self.loss_tol >= 0.0) {
            return bad(format!("loss tolerance must be non-negative, got {}", self.loss_tol));
        }
        steps_for(self.horizon, self.dt)?;
        Ok(())
    }

    /// `[d (+1 with time input), width x depth, d]`.
    pub fn layer_sizes(&self, state_dim: usize) -> Vec<usize> {
        let mut sizes = vec![state_dim + usize::from(self.time_input)];
        sizes.extend(std::iter::repeat(self.width).take(self.depth));
        sizes.push(state_dim);
        sizes
    }

    pub fn steps(&self) -> Result<usize, LearnError> {
        steps_for(self.horizon, self.dt)
    }
}

/// Integer `K` with `K * dt == horizon` up to rounding.
pub fn steps_for(horizon: f64, dt: f64) -> Result<usize, LearnError> {
    if !(dt > 0.0 && horizon > 0.0 && horizon.is_finite()) {
        return Err(LearnError::Config(format!(
            "horizon and dt must be positive (T = {horizon}, dt = {dt})"
        )));
    }
    let k = (horizon / dt).round();
    if k < 1.0 || (k * dt - horizon).abs() > GRID_MATCH_TOL * horizon {
        return Err(LearnError::Config(format!(
            "horizon {horizon} is not a whole number of steps of {dt}"
        )));
    }
    Ok(k as usize)
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Loss at the start of each epoch, before that epoch's update.
    pub loss_history: Vec<f64>,
    /// Loss of `network` after the last update.
    pub final_loss: f64,
    pub network: Mlp,
    pub seconds: f64,
}

impl TrainReport {
    pub fn initial_loss(&self) -> f64 {
        self.loss_history[0]
    }
}

/// Per-component rollout MSE, `(u, v)` for the FitzHugh-Nagumo system.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mse_per_component: Vec<f64>,
    pub config: Option<TrainConfig>,
}

impl EvalReport {
    pub fn mse_u(&self) -> f64 {
        self.mse_per_component[0]
    }

    pub fn mse_v(&self) -> f64 {
        self.mse_per_component.get(1).copied().unwrap_or(f64::NAN)
    }
}

/// Whether `net` reads time as an extra input for states of dimension `dim`.
pub fn uses_time_input(net: &Mlp, dim: usize) -> Result<bool, LearnError> {
    if net.output_dim() != dim {
        return Err(LearnError::Shape(format!(
            "network outputs {} components, state has {dim}",
            net.output_dim()
        )));
    }
    match net.input_dim() {
        n if n == dim => Ok(false),
        n if n == dim + 1 => Ok(true),
        n => Err(LearnError::Shape(format!(
            "network takes {n} inputs, state has {dim} components"
        ))),
    }
}

/// Inputs and one-step increments of a trajectory, laid out for batched
/// residual evaluation.
#[derive(Debug, Clone)]
pub struct ResidualProblem {
    inputs: Array2<f64>,
    increments: Array2<f64>,
    dt: f64,
}

impl ResidualProblem {
    pub fn new(traj: &Trajectory, time_input: bool) -> Self {
        let k = traj.steps();
        let states = traj.states();
        let current = states.slice(s![..k, ..]);
        let increments = &states.slice(s![1.., ..]) - &current;
        let inputs = if time_input {
            let mut x = Array2::zeros((k, traj.dim() + 1));
            x.slice_mut(s![.., ..traj.dim()]).assign(&current);
            for i in 0..k {
                x[[i, traj.dim()]] = traj.time(i);
            }
            x
        } else {
            current.to_owned()
        };
        Self {
            inputs,
            increments,
            dt: traj.dt(),
        }
    }

    pub fn steps(&self) -> usize {
        self.increments.nrows()
    }

    fn check(&self, net: &Mlp) -> Result<(), LearnError> {
        if net.input_dim() != self.inputs.ncols() || net.output_dim() != self.increments.ncols() {
            return Err(LearnError::Shape(format!(
                "network {:?} does not fit {} inputs / {} outputs",
                net.layer_sizes(),
                self.inputs.ncols(),
                self.increments.ncols()
            )));
        }
        Ok(())
    }

    /// Residuals `dt * N(x_i) - (x_{i+1} - x_i)` for rows in `range`.
    fn residuals(&self, out: &Array2<f64>, range: std::ops::Range<usize>) -> Array2<f64> {
        let mut r = out * self.dt;
        r -= &self.increments.slice(s![range, ..]);
        r
    }

    pub fn loss(&self, net: &Mlp, exec: Exec) -> Result<f64, LearnError> {
        self.check(net)?;
        let sums = map_ordered(exec, chunk_ranges(self.steps(), RESIDUAL_CHUNK), |range| {
            let x = self.inputs.slice(s![range.clone(), ..]);
            let out = net.forward_batch(x).expect("shapes checked");
            let r = self.residuals(&out, range);
            r.iter().map(|v| v * v).sum::<f64>()
        });
        Ok(sums.iter().sum::<f64>() / self.steps() as f64)
    }

    pub fn loss_and_grad(&self, net: &Mlp, exec: Exec) -> Result<(f64, Gradients), LearnError> {
        self.check(net)?;
        let scale = 2.0 * self.dt / self.steps() as f64;
        let parts = map_ordered(exec, chunk_ranges(self.steps(), RESIDUAL_CHUNK), |range| {
            let x = self.inputs.slice(s![range.clone(), ..]);
            let cache = net.forward_cached(x).expect("shapes checked");
            let r = self.residuals(cache.output(), range);
            let sum_sq: f64 = r.iter().map(|v| v * v).sum();
            let upstream = r * scale;
            let (grads, _) = net
                .backward_batch(&cache, upstream.view())
                .expect("shapes checked");
            (sum_sq, grads)
        });
        let mut total = 0.0;
        let mut grads = Gradients::zeros_like(net);
        for (sum_sq, g) in &parts {
            total += sum_sq;
            grads.accumulate(g);
        }
        Ok((total / self.steps() as f64, grads))
    }
}

/// Mean over the `K` steps of the squared forward-Euler residual norm, with
/// its exact gradient over the network parameters.
pub fn euler_residual_loss(net: &Mlp, traj: &Trajectory) -> Result<(f64, Gradients), LearnError> {
    euler_residual_loss_with(net, traj, Exec::default())
}

pub fn euler_residual_loss_with(
    net: &Mlp,
    traj: &Trajectory,
    exec: Exec,
) -> Result<(f64, Gradients), LearnError> {
    let time_input = uses_time_input(net, traj.dim())?;
    let (loss, grads) = ResidualProblem::new(traj, time_input).loss_and_grad(net, exec)?;
    if !loss.is_finite() {
        return Err(LearnError::Divergence { epoch: 0, loss });
    }
    Ok((loss, grads))
}

pub fn train(data: &Trajectory, cfg: &TrainConfig) -> Result<TrainReport, LearnError> {
    train_with(data, cfg, Exec::default())
}

/// Full-batch Adam on the residual loss starting from a seeded Glorot init.
pub fn train_with(data: &Trajectory, cfg: &TrainConfig, exec: Exec) -> Result<TrainReport, LearnError> {
    cfg.validate()?;
    if (cfg.dt - data.dt()).abs() > GRID_MATCH_TOL * data.dt() {
        return Err(LearnError::Config(format!(
            "configured dt {} does not match the data step {}",
            cfg.dt,
            data.dt()
        )));
    }
    let net = Mlp::init(&cfg.layer_sizes(data.dim()), cfg.seed)?;
    train_from(net, data, cfg, exec)
}

/// Training loop from a given starting network.
pub fn train_from(
    mut net: Mlp,
    data: &Trajectory,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<TrainReport, LearnError> {
    let start = Instant::now();
    let time_input = uses_time_input(&net, data.dim())?;
    let problem = ResidualProblem::new(data, time_input);
    let mut adam = AdamState::new(
        &net,
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
    );
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    let mut converged = None;
    for epoch in 0..cfg.epochs {
        let (loss, grads) = problem.loss_and_grad(&net, exec)?;
        if !loss.is_finite() {
            return Err(LearnError::Divergence { epoch, loss });
        }
        loss_history.push(loss);
        if loss < cfg.loss_tol {
            converged = Some(loss);
            break;
        }
        adam_step(&mut net, &grads, &mut adam)?;
    }
    let final_loss = match converged {
        Some(loss) => loss,
        None => problem.loss(&net, exec)?,
    };
    if !final_loss.is_finite() {
        return Err(LearnError::Divergence {
            epoch: cfg.epochs,
            loss: final_loss,
        });
    }
    Ok(TrainReport {
        loss_history,
        final_loss,
        network: net,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Integrates the learned field with RK4 at step `dt` for `steps` steps.
pub fn rollout(net: &Mlp, s0: &[f64], t0: f64, dt: f64, steps: usize) -> Result<Trajectory, LearnError> {
    if steps == 0 {
        return Err(LearnError::Config("rollout needs at least one step".into()));
    }
    let time_input = uses_time_input(net, s0.len())?;
    let mut input = vec![0.0; net.input_dim()];
    let field = |t: f64, s: &[f64], out: &mut [f64]| {
        input[..s.len()].copy_from_slice(s);
        if time_input {
            input[s.len()] = t;
        }
        let y = net.forward(&input).expect("dimensions checked");
        out.copy_from_slice(&y);
    };
    Ok(simulate(field, s0, t0, dt, steps, 1)?)
}

/// Per-component mean over all `K + 1` samples of the squared difference.
pub fn eval_mse(pred: &Trajectory, truth: &Trajectory) -> Result<EvalReport, LearnError> {
    if pred.dim() != truth.dim() {
        return Err(LearnError::Shape(format!(
            "prediction has {} components, truth has {}",
            pred.dim(),
            truth.dim()
        )));
    }
    if !pred.same_grid(truth) {
        return Err(LearnError::Shape(format!(
            "time grids differ: {} samples from {} step {} vs {} samples from {} step {}",
            pred.len(),
            pred.t0(),
            pred.dt(),
            truth.len(),
            truth.t0(),
            truth.dt()
        )));
    }
    let diff = &pred.states() - &truth.states();
    let mse_per_component = diff
        .map(|x| x * x)
        .mean_axis(Axis(0))
        .expect("non-empty trajectory")
        .to_vec();
    Ok(EvalReport {
        mse_per_component,
        config: None,
    })
}

/// Default training start `(-u_e, -v_e)`.
pub fn default_initial_state(params: &FhnParams) -> Result<[f64; 2], LearnError> {
    let e = equilibrium(params)?;
    Ok([-e.u_e, -e.v_e])
}

/// Reference FitzHugh-Nagumo trajectory on `[0, horizon]`.
pub fn generate_truth(
    params: &FhnParams,
    s0: &[f64],
    dt: f64,
    horizon: f64,
    substeps: usize,
) -> Result<Trajectory, LearnError> {
    let steps = steps_for(horizon, dt)?;
    Ok(simulate(params.vector_field(), s0, 0.0, dt, steps, substeps)?)
}

/// Default RK4 refinement for reference data.
pub const TRUTH_SUBSTEPS: usize = 10;

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub truth: Trajectory,
    pub data: Trajectory,
    pub report: TrainReport,
    pub prediction: Trajectory,
    pub eval: EvalReport,
}

/// Generate, perturb, train, roll out and score one configuration.
/// Noise and initialization both derive from `cfg.seed`.
pub fn run_experiment(params: &FhnParams, cfg: &TrainConfig, exec: Exec) -> Result<ExperimentOutcome, LearnError> {
    cfg.validate()?;
    let s0 = default_initial_state(params)?;
    let truth = generate_truth(params, &s0, cfg.dt, cfg.horizon, TRUTH_SUBSTEPS)?;
    let data = add_noise(&truth, &NoiseSpec::new(cfg.noise, cfg.seed)?);
    let report = train_with(&data, cfg, exec)?;
    let first = truth.state(0).to_vec();
    let prediction = rollout(&report.network, &first, truth.t0(), truth.dt(), truth.steps())?;
    let mut eval = eval_mse(&prediction, &truth)?;
    eval.config = Some(*cfg);
    Ok(ExperimentOutcome {
        truth,
        data,
        report,
        prediction,
        eval,
    })
}
