//! Synthetic tasks, analytic rewards, pretraining and evaluation.

mod eval;
mod pretrain;
mod reward;
mod spec;
pub mod stats;

pub use eval::{eval_suite, group_dispersion, EvalReport, SweepRow};
pub use pretrain::{pretrain, trailing_average, PretrainConfig};
pub use reward::{
    default_reward_suite, reward_eval, reward_oracle_max, weighted_reward, RewardKind, RewardSpec,
};
pub use spec::{Checkerboard, GaussianComponent, GaussianMixture, TaskSpec};
