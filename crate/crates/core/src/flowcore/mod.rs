//! Rectified-flow velocity models, score conversion, flow-matching loss, and
//! gradient machinery.

mod checkpoint;
mod fd;
mod loss;
mod mlp;
mod model;
mod optim;
mod score;
mod state;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use fd::{finite_diff_grad, try_finite_diff_grad};
pub use loss::{fm_loss_and_grad, fm_loss_and_grad_at, FmDraw};
pub use mlp::{Activation, Architecture};
pub use model::{AffineGaussianTask, VelocityModel};
pub use optim::{Optimizer, OptimizerKind};
pub use score::{score_from_velocity, T_MIN_DEFAULT};
pub use state::{Condition, ParamGrad, StateVec};
