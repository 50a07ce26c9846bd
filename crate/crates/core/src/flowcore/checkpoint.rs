//! Model checkpoint container: versioned JSON holding the architecture
//! descriptor, the flat parameter vector, and the RNG seed of the run that
//! produced it. Stable across runs; documented in the project README.

use super::model::{AffineGaussianTask, VelocityModel};
use super::mlp::Architecture;
use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct OracleTaskSpec {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
enum ModelSpec {
    TrainableNet {
        arch: Architecture,
        params: Vec<f64>,
    },
    AffineGaussianOracle {
        tasks: Vec<OracleTaskSpec>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    seed: u64,
    model: ModelSpec,
}

/// Write `model` (plus the producing seed) to `path` as versioned JSON.
pub fn save_checkpoint(path: &Path, model: &VelocityModel, seed: u64) -> Result<()> {
    let spec = if let Some(arch) = model.arch() {
        ModelSpec::TrainableNet {
            arch: arch.clone(),
            params: model.params().to_vec(),
        }
    } else {
        let tasks = model
            .oracle_tasks()
            .expect("non-trainable model is the oracle")
            .iter()
            .map(|t| OracleTaskSpec {
                mean: t.mean(),
                cov: t.cov_rows(),
            })
            .collect();
        ModelSpec::AffineGaussianOracle { tasks }
    };
    let file = CheckpointFile {
        format_version: CHECKPOINT_FORMAT_VERSION,
        seed,
        model: spec,
    };
    let text = serde_json::to_string_pretty(&file)
        .map_err(|e| CoreError::CheckpointFormat(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

/// Read a checkpoint back; returns the model and the stored seed.
pub fn load_checkpoint(path: &Path) -> Result<(VelocityModel, u64)> {
    let text = fs::read_to_string(path)?;
    let file: CheckpointFile =
        serde_json::from_str(&text).map_err(|e| CoreError::CheckpointFormat(e.to_string()))?;
    if file.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(CoreError::CheckpointFormat(format!(
            "unsupported format version {} (expected {})",
            file.format_version, CHECKPOINT_FORMAT_VERSION
        )));
    }
    let model = match file.model {
        ModelSpec::TrainableNet { arch, params } => {
            let mut m = VelocityModel::trainable_zeroed(arch);
            m.set_params(&params)?;
            m
        }
        ModelSpec::AffineGaussianOracle { tasks } => {
            let tasks = tasks
                .into_iter()
                .map(|t| AffineGaussianTask::new(t.mean, t.cov))
                .collect::<Result<Vec<_>>>()?;
            VelocityModel::oracle(tasks)?
        }
    };
    Ok((model, file.seed))
}
