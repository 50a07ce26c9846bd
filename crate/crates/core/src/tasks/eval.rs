//! Evaluation suites: hybrid-inference sweeps, per-reward statistics, and the
//! group-dispersion statistic.

use super::reward::{reward_eval, RewardSpec};
use super::spec::TaskSpec;
use crate::error::{CoreError, Result};
use crate::flowcore::{Condition, StateVec, VelocityModel};
use crate::samplers::{hybrid_sample, TimeGrid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;

/// Mean pairwise Euclidean distance within a set of final states. The scalar
/// stand-in for eyeballing how spread out a group of samples is.
pub fn group_dispersion(states: &[StateVec]) -> Result<f64> {
    if states.len() < 2 {
        return Err(CoreError::invalid(
            "dispersion needs at least two states",
        ));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..states.len() {
        for j in i + 1..states.len() {
            sum += states[i].dist2(&states[j]).sqrt();
            count += 1;
        }
    }
    Ok(sum / count as f64)
}

/// One hybrid-sweep row: per-reward means at a given hybrid percentage.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepRow {
    pub p_mix: f64,
    pub reward_means: Vec<f64>,
    pub weighted_mean: f64,
}

/// Evaluation summary; reproducible from (seed, config).
#[derive(Debug, Clone, serde::Serialize)]
pub struct EvalReport {
    pub seed: u64,
    pub config_hash: String,
    pub group_size: usize,
    /// Per-reward statistics of the pure-trained samples (p_mix = 1 row).
    pub per_reward_mean: Vec<f64>,
    pub per_reward_std: Vec<f64>,
    /// Mean group dispersion of the pure-trained samples across conditions.
    pub dispersion: f64,
    pub sweep: Vec<SweepRow>,
}

/// Hybrid-inference sweep: for each `p_mix`, `group_size` samples per
/// condition with the first `round(p_mix T)` steps from `trained` and the
/// rest from `base`. Rows for `p_mix = 0` and `p_mix = 1` are always
/// included.
#[allow(clippy::too_many_arguments)]
pub fn eval_suite(
    trained: &VelocityModel,
    base: &VelocityModel,
    task: &TaskSpec,
    rewards: &[RewardSpec],
    grid: &TimeGrid,
    p_mix_list: &[f64],
    group_size: usize,
    seed: u64,
    config_hash: &str,
) -> Result<EvalReport> {
    if rewards.is_empty() {
        return Err(CoreError::invalid("eval needs at least one reward"));
    }
    if group_size < 2 {
        return Err(CoreError::invalid("group size must be >= 2"));
    }
    let mut ps: Vec<f64> = p_mix_list.to_vec();
    for required in [0.0, 1.0] {
        if !ps.iter().any(|&p| (p - required).abs() < 1e-12) {
            ps.push(required);
        }
    }
    ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let conds = task.cond_count();
    let k = rewards.len();
    let wsum: f64 = rewards.iter().map(|s| s.weight).sum();

    let mut sweep = Vec::with_capacity(ps.len());
    let mut trained_stats: Option<(Vec<f64>, Vec<f64>, f64)> = None;
    for (pi, &p) in ps.iter().enumerate() {
        let mut sums = vec![0.0; k];
        let mut sq_sums = vec![0.0; k];
        let mut dispersion_sum = 0.0;
        let mut n = 0usize;
        for c in 0..conds {
            // one stream per (p, condition); reruns with the same seed match
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((pi * conds + c) as u64 + 1);
            let mut states = Vec::with_capacity(group_size);
            for _ in 0..group_size {
                let x = hybrid_sample(trained, base, grid, p, Condition(c), &mut rng)?;
                for (j, spec) in rewards.iter().enumerate() {
                    let r = reward_eval(spec, &x, Condition(c));
                    sums[j] += r;
                    sq_sums[j] += r * r;
                }
                states.push(x);
                n += 1;
            }
            dispersion_sum += group_dispersion(&states)?;
        }
        let means: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
        let weighted = rewards
            .iter()
            .zip(&means)
            .map(|(s, m)| s.weight * m)
            .sum::<f64>()
            / wsum;
        if (p - 1.0).abs() < 1e-12 {
            let stds = sq_sums
                .iter()
                .zip(&means)
                .map(|(sq, m)| (sq / n as f64 - m * m).max(0.0).sqrt())
                .collect();
            trained_stats = Some((means.clone(), stds, dispersion_sum / conds as f64));
        }
        sweep.push(SweepRow {
            p_mix: p,
            reward_means: means,
            weighted_mean: weighted,
        });
    }
    let (per_reward_mean, per_reward_std, dispersion) =
        trained_stats.expect("p_mix = 1 row always present");
    Ok(EvalReport {
        seed,
        config_hash: config_hash.to_string(),
        group_size,
        per_reward_mean,
        per_reward_std,
        dispersion,
        sweep,
    })
}

impl EvalReport {
    /// Field-per-line text document.
    pub fn write_text<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "seed: {}", self.seed)?;
        writeln!(out, "config_hash: {}", self.config_hash)?;
        writeln!(out, "group_size: {}", self.group_size)?;
        writeln!(out, "dispersion: {}", self.dispersion)?;
        for (i, (m, s)) in self
            .per_reward_mean
            .iter()
            .zip(&self.per_reward_std)
            .enumerate()
        {
            writeln!(out, "reward_mean[{i}]: {m}")?;
            writeln!(out, "reward_std[{i}]: {s}")?;
        }
        for row in &self.sweep {
            writeln!(out, "sweep[{}]: {}", row.p_mix, row.weighted_mean)?;
        }
        Ok(())
    }

    /// CSV table: `p_mix,reward_0,...,reward_{K-1},weighted`.
    pub fn write_sweep_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let k = self.per_reward_mean.len();
        write!(out, "p_mix")?;
        for i in 0..k {
            write!(out, ",reward_{i}")?;
        }
        writeln!(out, ",weighted")?;
        for row in &self.sweep {
            write!(out, "{}", row.p_mix)?;
            for v in &row.reward_means {
                write!(out, ",{v}")?;
            }
            writeln!(out, ",{}", row.weighted_mean)?;
        }
        Ok(())
    }
}
