//! Learning the right-hand side of an ODE system from uniformly sampled
//! trajectories.
//!
//! A feedforward network `N` is trained so that one forward-Euler step
//! `x_{i+1} = x_i + dt * N(x_i)` reproduces consecutive samples. The learned
//! field is then integrated with RK4 and scored against the reference data.
//! FitzHugh-Nagumo dynamics supply the reference trajectories.

pub mod cli;
pub mod dynamics;
pub mod exec;
pub mod integrate;
pub mod learner;
pub mod neural;
pub mod numfmt;
pub mod rng;
pub mod sweep;

pub use dynamics::{equilibrium, fhn_rhs, nullclines, Equilibrium, FhnParams, State};
pub use exec::Exec;
pub use integrate::{add_noise, simulate, step_euler, step_rk4, NoiseSpec, Trajectory};
pub use learner::{
    euler_residual_loss, eval_mse, rollout, run_experiment, train, EvalReport, TrainConfig,
    TrainReport,
};
pub use neural::{adam_step, AdamState, Gradients, Mlp};
