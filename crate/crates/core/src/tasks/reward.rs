//! Analytic reward models. All rewards are deterministic, smooth, and
//! bounded above; they stand in for the neural preference models of the
//! full-scale setting.

use super::spec::TaskSpec;
use crate::error::{CoreError, Result};
use crate::flowcore::{Condition, StateVec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardKind {
    /// `exp(-|x - target|^2 / temperature)`, maximum 1 at the target.
    ModeProximity,
    /// Smoothed indicator of the ball around the target:
    /// `sigmoid((radius^2 - |x - target|^2) / temperature)`.
    RegionIndicatorSmooth,
    /// `-|x - target|^2 / temperature`, maximum 0 at the target.
    NegativeDistortion,
}

/// One reward channel. `targets[c]` is the target of condition `c`; a
/// single-entry list is shared across conditions.
#[derive(Debug, Clone)]
pub struct RewardSpec {
    pub kind: RewardKind,
    pub targets: Vec<StateVec>,
    pub temperature: f64,
    pub radius: f64,
    pub weight: f64,
}

impl RewardSpec {
    pub fn mode_proximity(targets: Vec<StateVec>, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0) {
            return Err(CoreError::invalid("temperature must be positive"));
        }
        if targets.is_empty() || targets.iter().any(|t| !t.is_finite()) {
            return Err(CoreError::invalid("reward targets must be finite"));
        }
        Ok(RewardSpec {
            kind: RewardKind::ModeProximity,
            targets,
            temperature,
            radius: 0.0,
            weight: 1.0,
        })
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    fn target(&self, c: Condition) -> &StateVec {
        &self.targets[c.0.min(self.targets.len() - 1)]
    }
}

/// Evaluate one reward channel at a terminal state.
pub fn reward_eval(spec: &RewardSpec, x: &StateVec, c: Condition) -> f64 {
    let d2 = x.dist2(spec.target(c));
    match spec.kind {
        RewardKind::ModeProximity => (-d2 / spec.temperature).exp(),
        RewardKind::RegionIndicatorSmooth => {
            1.0 / (1.0 + ((d2 - spec.radius * spec.radius) / spec.temperature).exp())
        }
        RewardKind::NegativeDistortion => -d2 / spec.temperature,
    }
}

/// Weighted mean of all reward channels at `x`.
pub fn weighted_reward(specs: &[RewardSpec], x: &StateVec, c: Condition) -> f64 {
    let wsum: f64 = specs.iter().map(|s| s.weight).sum();
    specs
        .iter()
        .map(|s| s.weight * reward_eval(s, x, c))
        .sum::<f64>()
        / wsum
}

/// Default multi-reward suite: K = 4 proximity rewards at the task's
/// suggested target for each condition, with staggered temperatures and small
/// target offsets, equal weights. The targets cover a strict subset of the
/// task's modes so the group advantage carries a preference signal.
pub fn default_reward_suite(task: &TaskSpec) -> Result<Vec<RewardSpec>> {
    let temps = [0.5, 1.0, 2.0, 4.0];
    let offsets: [(usize, f64); 4] = [(0, 0.0), (0, 0.0), (0, 0.2), (0, -0.2)];
    let conds = task.cond_count();
    temps
        .iter()
        .zip(offsets)
        .map(|(&temp, (axis, delta))| {
            let targets = (0..conds)
                .map(|c| {
                    let mut t = task.suggested_target(Condition(c))?;
                    t[axis] += delta;
                    Ok(StateVec(t))
                })
                .collect::<Result<Vec<_>>>()?;
            RewardSpec::mode_proximity(targets, temp)
        })
        .collect()
}

/// Numeric maximum of the weighted reward over a square grid around `center`
/// (2-D tasks; higher dimensions fall back to the best target point). The
/// oracle ceiling used by the reward-improvement checks.
pub fn reward_oracle_max(
    specs: &[RewardSpec],
    c: Condition,
    center: &[f64],
    half_extent: f64,
    grid_n: usize,
) -> f64 {
    let mut best = specs
        .iter()
        .map(|s| weighted_reward(specs, s.target(c), c))
        .fold(f64::NEG_INFINITY, f64::max);
    if center.len() == 2 {
        for i in 0..=grid_n {
            for j in 0..=grid_n {
                let x = StateVec(vec![
                    center[0] - half_extent + 2.0 * half_extent * i as f64 / grid_n as f64,
                    center[1] - half_extent + 2.0 * half_extent * j as f64 / grid_n as f64,
                ]);
                best = best.max(weighted_reward(specs, &x, c));
            }
        }
    }
    best
}
