//! Experiment driver: configuration, commands, manifests.

pub mod commands;
pub mod config;
pub mod manifest;

pub use commands::{cmd_ablate, cmd_eval, cmd_pretrain, cmd_train, AblationAxis, Variant};
pub use config::RunConfig;
pub use manifest::RunManifest;
