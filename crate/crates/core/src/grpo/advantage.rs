//! Group-relative multi-reward advantages.

use crate::error::{CoreError, Result};

/// Std floor below which a reward column is treated as constant and
/// contributes zero advantage.
pub const ADV_STD_FLOOR: f64 = 1e-8;

/// Standardize every reward column against the group (population mean/std
/// with the floor above), take the weighted sum over reward channels, and
/// clip each member's advantage to `[-clip_bound, clip_bound]`.
///
/// `rewards` is N rows (group members) by K columns (reward channels).
pub fn compute_advantages(
    rewards: &[Vec<f64>],
    clip_bound: f64,
    weights: &[f64],
) -> Result<Vec<f64>> {
    let n = rewards.len();
    if n < 2 {
        return Err(CoreError::invalid("advantage group needs N >= 2"));
    }
    let k = rewards[0].len();
    if k == 0 || rewards.iter().any(|row| row.len() != k) {
        return Err(CoreError::invalid("reward matrix must be rectangular, K >= 1"));
    }
    if weights.len() != k {
        return Err(CoreError::invalid("one weight per reward channel"));
    }
    if !(clip_bound > 0.0) {
        return Err(CoreError::invalid("advantage clip bound must be positive"));
    }
    let mut adv = vec![0.0; n];
    for col in 0..k {
        let mean = rewards.iter().map(|r| r[col]).sum::<f64>() / n as f64;
        let var = rewards
            .iter()
            .map(|r| (r[col] - mean) * (r[col] - mean))
            .sum::<f64>()
            / n as f64;
        let std = var.sqrt();
        if std < ADV_STD_FLOOR {
            // constant column: zero advantage contribution
            continue;
        }
        for (i, row) in rewards.iter().enumerate() {
            adv[i] += weights[col] * (row[col] - mean) / std;
        }
    }
    for a in &mut adv {
        *a = a.clamp(-clip_bound, clip_bound);
    }
    Ok(adv)
}
