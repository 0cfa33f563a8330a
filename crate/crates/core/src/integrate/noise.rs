use super::{IntegrateError, Trajectory};
use crate::rng::{SplitMix64, NOISE_STREAM};

/// Additive Gaussian noise at `level` times each component's sample standard
/// deviation, e.g. `level = 0.02` for 2% noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    level: f64,
    seed: u64,
}

impl NoiseSpec {
    pub fn new(level: f64, seed: u64) -> Result<Self, IntegrateError> {
        if level >= 0.0 && level.is_finite() {
            Ok(Self { level, seed })
        } else {
            Err(IntegrateError::InvalidNoise(level))
        }
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

fn sample_std(col: ndarray::ArrayView1<'_, f64>) -> f64 {
    let n = col.len() as f64;
    let mean = col.sum() / n;
    let ss: f64 = col.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (n - 1.0)).sqrt()
}

/// Returns a perturbed copy; normals are drawn row by row, column by column.
pub fn add_noise(traj: &Trajectory, spec: &NoiseSpec) -> Trajectory {
    if spec.level == 0.0 {
        return traj.clone();
    }
    let sigmas: Vec<f64> = (0..traj.dim()).map(|j| sample_std(traj.column(j))).collect();
    let mut rng = SplitMix64::for_stream(spec.seed, NOISE_STREAM);
    let mut states = traj.states().to_owned();
    for mut row in states.rows_mut() {
        for (x, sigma) in row.iter_mut().zip(&sigmas) {
            *x += spec.level * sigma * rng.normal();
        }
    }
    Trajectory::new(traj.t0(), traj.dt(), states).expect("finite noise keeps the trajectory valid")
}
