//! Desk-scale mixed ODE-SDE GRPO training for rectified-flow generative models.
//!
//! The crate implements the full training stack on small analytic tasks:
//!
//! - [`flowcore`]: rectified-flow velocity models (a small trainable MLP and a
//!   closed-form affine-Gaussian oracle), the velocity-to-score conversion,
//!   the flow-matching regression loss with exact reverse-mode gradients, and
//!   a finite-difference gradient oracle.
//! - [`samplers`]: the denoising time grid, Euler ODE and Euler-Maruyama SDE
//!   step kernels, DPM-Solver++ multistep solvers reformulated for rectified
//!   flow, Gaussian transition log-densities, mixed-window trajectory
//!   sampling, and hybrid (trained/base) inference.
//! - [`scheduler`]: the sliding-window state machine (frozen / random /
//!   progressive strategies, constant / decaying shift intervals) and the
//!   Flash step-compression plan with its speedup accounting.
//! - [`grpo`]: group sampling, multi-reward advantages, the clipped policy
//!   objective and its exact gradient, optimizers, the per-iteration training
//!   step, and the NFE/overhead ledger.
//! - [`tasks`]: synthetic conditional generative tasks, analytic reward
//!   models, the flow-matching pretraining driver, and evaluation suites
//!   (hybrid sweep, group dispersion).

pub mod error;
pub mod flowcore;
pub mod grpo;
pub mod samplers;
pub mod scheduler;
pub mod tasks;

pub use error::{CoreError, Result};
pub use flowcore::{
    finite_diff_grad, fm_loss_and_grad, score_from_velocity, AffineGaussianTask, Architecture,
    Condition, Optimizer, OptimizerKind, ParamGrad, StateVec, VelocityModel, T_MIN_DEFAULT,
};
pub use samplers::{StepKind, StepRecord, TimeGrid, Trajectory};
pub use scheduler::{FlashPlan, FlashVariant, IntervalSchedule, Strategy, WindowState};
