//! Per-iteration training step and the NFE/overhead ledger.

use super::advantage::compute_advantages;
use super::objective::{objective_and_grad_slice, Group};
use crate::error::{CoreError, Result};
use crate::flowcore::{Condition, Optimizer, ParamGrad, StateVec, VelocityModel};
use crate::samplers::{sample_trajectory_from, StepKind, TimeGrid};
use crate::scheduler::{flash_plan, FlashPlan, FlashVariant, WindowState};
use crate::tasks::{reward_eval, RewardSpec};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

/// Training hyperparameters.
#[derive(Debug, Clone)]
pub struct GrpoConfig {
    /// Samples per prompt (group size N).
    pub group_size: usize,
    /// Ratio clip half-width.
    pub clip_epsilon: f64,
    /// Advantage clip bound.
    pub advantage_clip: f64,
    /// Gradient-accumulation micro-batches per update (divides N).
    pub accumulation_chunks: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Iteration budget M.
    pub iterations: usize,
    /// Per-reward weights; `None` means equal.
    pub reward_weights: Option<Vec<f64>>,
    /// Single fused update over all window steps instead of one update per
    /// window timestep (ablation flag).
    pub fused_window_update: bool,
    /// Sample EVERY step stochastically while optimizing only the window
    /// (the all-SDE baseline comparator).
    pub sde_all_steps: bool,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        GrpoConfig {
            group_size: 12,
            clip_epsilon: 1e-4,
            advantage_clip: 5.0,
            accumulation_chunks: 3,
            learning_rate: 1e-5,
            weight_decay: 1e-4,
            iterations: 300,
            reward_weights: None,
            fused_window_update: false,
            sde_all_steps: false,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_size < 2 {
            return Err(CoreError::invalid("group size must be >= 2"));
        }
        if self.accumulation_chunks == 0 || self.group_size % self.accumulation_chunks != 0 {
            return Err(CoreError::invalid(
                "group size must be divisible by the accumulation chunks",
            ));
        }
        if !(self.clip_epsilon > 0.0) {
            return Err(CoreError::invalid("clip epsilon must be positive"));
        }
        if !(self.advantage_clip > 0.0) {
            return Err(CoreError::invalid("advantage clip must be positive"));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(CoreError::invalid("learning rate must be >= 0"));
        }
        if let Some(w) = &self.reward_weights {
            if w.is_empty() || w.iter().any(|&x| x < 0.0) {
                return Err(CoreError::invalid("reward weights must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn weights_for(&self, k: usize) -> Vec<f64> {
        match &self.reward_weights {
            Some(w) => w.clone(),
            None => vec![1.0; k],
        }
    }
}

/// Per-iteration function-evaluation counts plus wall-clock time.
#[derive(Debug, Clone, Serialize)]
pub struct LedgerRow {
    pub iteration: usize,
    /// Old-policy velocity evaluations per trajectory (full sampling).
    pub nfe_old: usize,
    /// New-policy velocity evaluations per trajectory (ratio terms only).
    pub nfe_new: usize,
    pub wall_secs: f64,
}

/// Overhead ledger: one row per iteration.
#[derive(Debug, Clone, Default)]
pub struct NfeLedger {
    rows: Vec<LedgerRow>,
}

impl NfeLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: LedgerRow) {
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[LedgerRow] {
        &self.rows
    }

    /// NFE_new must equal the window size and NFE_old the effective step
    /// count on every row.
    pub fn check_invariants(&self, expected_old: usize, expected_new: usize) -> Result<()> {
        for row in &self.rows {
            if row.nfe_new != expected_new || row.nfe_old != expected_old {
                return Err(CoreError::invalid(format!(
                    "ledger row {} has NFE ({}, {}), expected ({expected_old}, {expected_new})",
                    row.iteration, row.nfe_old, row.nfe_new
                )));
            }
        }
        Ok(())
    }

    pub fn mean_nfe_old(&self) -> f64 {
        self.rows.iter().map(|r| r.nfe_old as f64).sum::<f64>() / self.rows.len().max(1) as f64
    }

    /// CSV export: `iteration,nfe_old,nfe_new,wall_secs`. Wall-clock lives
    /// here rather than in the metrics stream so the metrics stay
    /// bit-identical across reruns.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "iteration,nfe_old,nfe_new,wall_secs")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{:.6}", r.iteration, r.nfe_old, r.nfe_new, r.wall_secs)?;
        }
        Ok(())
    }
}

/// NFE accounting without step compression: `(T, w)`.
pub fn nfe_account(total_steps: usize, w: usize) -> (usize, usize) {
    (total_steps, w)
}

/// NFE accounting for the frozen-boundary compressed variant:
/// `(l + w + ceil((T - w) r), w)` with `l = 0`.
pub fn nfe_account_flash_star(total_steps: usize, w: usize, compression: f64) -> Result<(usize, usize)> {
    let plan = flash_plan(
        total_steps,
        0,
        w,
        compression,
        FlashVariant::FlashStar,
        StepKind::OdeDpm2Midpoint,
    )?;
    Ok((plan.effective_steps, w))
}

/// NFE accounting for the progressive compressed variant: the mean effective
/// step count over the visited window boundaries.
pub fn nfe_account_flash_avg(
    total_steps: usize,
    w: usize,
    compression: f64,
    visited_l: &[usize],
) -> Result<(f64, usize)> {
    if visited_l.is_empty() {
        return Err(CoreError::invalid("flash average needs visited boundaries"));
    }
    let mut sum = 0usize;
    for &l in visited_l {
        let plan = flash_plan(
            total_steps,
            l,
            w,
            compression,
            FlashVariant::Flash,
            StepKind::OdeDpm2Midpoint,
        )?;
        sum += plan.effective_steps;
    }
    Ok((sum as f64 / visited_l.len() as f64, w))
}

/// Deterministic per-iteration metrics (the JSONL record).
#[derive(Debug, Clone, Serialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    /// Accumulated clipped objective over this iteration's update passes.
    pub objective: f64,
    /// Per-reward group means, averaged over the prompt batch.
    pub reward_means: Vec<f64>,
    /// Weighted mean reward.
    pub reward_mean_total: f64,
    pub advantage_mean: f64,
    pub advantage_std: f64,
    pub advantage_min: f64,
    pub advantage_max: f64,
    /// Window sampled in this iteration.
    pub window_start: usize,
    pub window_len: usize,
    /// Post-advance boundary and interval (what the next iteration will use).
    pub l_post: usize,
    pub tau_post: usize,
    pub nfe_old: usize,
    pub nfe_new: usize,
}

/// Flash settings passed to training (the plan itself is rebuilt per
/// iteration as the boundary moves).
#[derive(Debug, Clone, Copy)]
pub struct FlashSettings {
    pub variant: FlashVariant,
    pub compression: f64,
    pub solver: StepKind,
}

/// Sample a group of `N` trajectories sharing one condition and one initial
/// noise, score the terminals with every reward, and standardize advantages.
#[allow(clippy::too_many_arguments)]
pub fn sample_group<R: Rng + ?Sized>(
    old_model: &VelocityModel,
    grid: &TimeGrid,
    sde_set: &BTreeSet<usize>,
    opt_indices: &[usize],
    flash: Option<&FlashPlan>,
    config: &GrpoConfig,
    rewards: &[RewardSpec],
    c: Condition,
    rng: &mut R,
) -> Result<Group> {
    let dim = old_model.dim();
    let init = StateVec((0..dim).map(|_| rng.sample(StandardNormal)).collect());
    let mut trajectories = Vec::with_capacity(config.group_size);
    for _ in 0..config.group_size {
        trajectories.push(sample_trajectory_from(
            old_model,
            grid,
            sde_set,
            c,
            init.clone(),
            rng,
            flash,
        )?);
    }
    let reward_matrix: Vec<Vec<f64>> = trajectories
        .iter()
        .map(|t| rewards.iter().map(|s| reward_eval(s, t.terminal(), c)).collect())
        .collect();
    let advantages = compute_advantages(
        &reward_matrix,
        self::adv_clip(config),
        &config.weights_for(rewards.len()),
    )?;
    let group = Group {
        condition: c,
        init_noise: init,
        trajectories,
        rewards: reward_matrix,
        advantages,
        opt_indices: opt_indices.to_vec(),
    };
    group.validate()?;
    Ok(group)
}

fn adv_clip(config: &GrpoConfig) -> f64 {
    config.advantage_clip
}

/// One training iteration of the mixed-sampling loop:
/// snapshot the old policy, sample a group per prompt under it, standardize
/// multi-reward advantages, then run gradient-ascent updates on the clipped
/// objective (one update per window timestep, gradients accumulated over
/// member chunks), and finally advance the sliding window.
#[allow(clippy::too_many_arguments)]
pub fn train_iteration<R: Rng + ?Sized>(
    m: usize,
    window_state: &mut WindowState,
    model: &mut VelocityModel,
    old_model: &mut VelocityModel,
    conditions: &[Condition],
    rewards: &[RewardSpec],
    grid: &TimeGrid,
    config: &GrpoConfig,
    flash: Option<FlashSettings>,
    optimizer: &mut Optimizer,
    rng: &mut R,
    ledger: &mut NfeLedger,
) -> Result<IterationMetrics> {
    let start = Instant::now();
    config.validate()?;
    if !model.is_trainable() {
        return Err(CoreError::NotTrainable);
    }
    if old_model.arch() != model.arch() {
        return Err(CoreError::invalid(
            "old-policy model must be structurally identical to the policy",
        ));
    }
    if conditions.is_empty() || rewards.is_empty() {
        return Err(CoreError::invalid("need at least one prompt and one reward"));
    }
    // old-policy snapshot happens once, before any sampling
    old_model.copy_params_from(model)?;

    let window = window_state.window_at(rng);
    let window_start = *window.iter().next().expect("window is non-empty");
    let opt_indices: Vec<usize> = window.iter().copied().collect();
    let plan = match flash {
        Some(fs) => {
            if config.sde_all_steps {
                return Err(CoreError::invalid(
                    "step compression cannot be combined with all-SDE sampling",
                ));
            }
            if fs.variant == FlashVariant::FlashStar && window_start != 0 {
                return Err(CoreError::invalid(
                    "the frozen compressed variant requires the window at l = 0",
                ));
            }
            Some(flash_plan(
                grid.step_count(),
                window_start,
                window_state.w,
                fs.compression,
                fs.variant,
                fs.solver,
            )?)
        }
        None => None,
    };
    let sde_set: BTreeSet<usize> = if config.sde_all_steps {
        (0..grid.step_count()).collect()
    } else {
        window.clone()
    };

    let chunk = config.group_size / config.accumulation_chunks;
    let mut objective = 0.0;
    let mut reward_sums = vec![0.0; rewards.len()];
    let mut adv_all: Vec<f64> = Vec::new();
    let mut nfe_old = None;
    for &c in conditions {
        let group = sample_group(
            old_model,
            grid,
            &sde_set,
            &opt_indices,
            plan.as_ref(),
            config,
            rewards,
            c,
            rng,
        )?;
        for row in &group.rewards {
            for (k, v) in row.iter().enumerate() {
                reward_sums[k] += v;
            }
        }
        adv_all.extend_from_slice(&group.advantages);
        for traj in &group.trajectories {
            match nfe_old {
                None => nfe_old = Some(traj.nfe()),
                Some(n) if n == traj.nfe() => {}
                Some(n) => {
                    return Err(CoreError::invalid(format!(
                        "inconsistent per-trajectory NFE: {n} vs {}",
                        traj.nfe()
                    )))
                }
            }
        }
        if config.fused_window_update {
            let mut acc = ParamGrad::zeros(model.param_count());
            for ci in 0..config.accumulation_chunks {
                let (j, g) = objective_and_grad_slice(
                    &group,
                    model,
                    config,
                    &opt_indices,
                    ci * chunk..(ci + 1) * chunk,
                )?;
                objective += j;
                acc.accumulate(&g);
            }
            optimizer.ascend(model.params_mut()?, &acc);
        } else {
            for &step in &opt_indices {
                let mut acc = ParamGrad::zeros(model.param_count());
                for ci in 0..config.accumulation_chunks {
                    let (j, g) = objective_and_grad_slice(
                        &group,
                        model,
                        config,
                        &[step],
                        ci * chunk..(ci + 1) * chunk,
                    )?;
                    objective += j;
                    acc.accumulate(&g);
                }
                optimizer.ascend(model.params_mut()?, &acc);
            }
        }
    }
    window_state.advance(m, rng);

    let samples = (conditions.len() * config.group_size) as f64;
    let reward_means: Vec<f64> = reward_sums.iter().map(|s| s / samples).collect();
    let weights = config.weights_for(rewards.len());
    let wsum: f64 = weights.iter().sum();
    let reward_mean_total = reward_means
        .iter()
        .zip(&weights)
        .map(|(m, w)| m * w)
        .sum::<f64>()
        / wsum;
    let adv_mean = adv_all.iter().sum::<f64>() / adv_all.len() as f64;
    let adv_std = (adv_all.iter().map(|a| (a - adv_mean) * (a - adv_mean)).sum::<f64>()
        / adv_all.len() as f64)
        .sqrt();
    let nfe_old = nfe_old.expect("at least one trajectory sampled");
    let nfe_new = opt_indices.len();
    ledger.push(LedgerRow {
        iteration: m,
        nfe_old,
        nfe_new,
        wall_secs: start.elapsed().as_secs_f64(),
    });
    Ok(IterationMetrics {
        iteration: m,
        objective: objective / conditions.len() as f64,
        reward_means,
        reward_mean_total,
        advantage_mean: adv_mean,
        advantage_std: adv_std,
        advantage_min: adv_all.iter().copied().fold(f64::INFINITY, f64::min),
        advantage_max: adv_all.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        window_start,
        window_len: opt_indices.len(),
        l_post: window_state.l,
        tau_post: window_state.tau,
        nfe_old,
        nfe_new,
    })
}
