//! Group sampling, advantages, the clipped objective, and the training loop.

mod advantage;
mod objective;
mod train;

pub use advantage::{compute_advantages, ADV_STD_FLOOR};
pub use objective::{grpo_objective_and_grad, policy_logratio, Group};
pub use train::{
    nfe_account, nfe_account_flash_avg, nfe_account_flash_star, sample_group, train_iteration,
    FlashSettings, GrpoConfig, IterationMetrics, LedgerRow, NfeLedger,
};
