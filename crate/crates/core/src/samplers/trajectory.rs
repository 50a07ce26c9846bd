//! Mixed-window trajectory sampling and hybrid inference.

use super::grid::{dpm_lambda, dpm_lambda_inv, TimeGrid};
use super::steps::{ode_euler_step, sde_em_step, DpmState, StepKind};
use crate::error::{CoreError, Result};
use crate::flowcore::{Condition, StateVec, VelocityModel};
use crate::scheduler::FlashPlan;
use rand::Rng;
use rand_distr::StandardNormal;
use std::collections::BTreeSet;
use std::io::Write;

/// Gaussian transition parameters of one stochastic step, kept so the policy
/// ratio can be recomputed against the recorded transition exactly.
#[derive(Debug, Clone)]
pub struct SdeTransition {
    pub mean: StateVec,
    pub std: f64,
    pub noise: StateVec,
    /// Noise scale of the step (std = sigma * sqrt(|dt|)).
    pub sigma: f64,
}

/// One denoising step of a trajectory.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub index: usize,
    pub kind: StepKind,
    pub t_cur: f64,
    pub t_next: f64,
    pub x_cur: StateVec,
    pub x_next: StateVec,
    /// Present exactly when `kind == SdeEm`.
    pub sde: Option<SdeTransition>,
}

/// Full denoising record of one sample.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub condition: Condition,
    pub init: StateVec,
    pub records: Vec<StepRecord>,
}

impl Trajectory {
    pub fn terminal(&self) -> &StateVec {
        self.records
            .last()
            .map(|r| &r.x_next)
            .unwrap_or(&self.init)
    }

    pub fn sde_records(&self) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter(|r| r.kind == StepKind::SdeEm)
    }

    /// Number of velocity evaluations spent producing this trajectory (one
    /// per record for every integrator in the crate).
    pub fn nfe(&self) -> usize {
        self.records.len()
    }

    /// Record chaining plus the stochastic reconstruction identity
    /// `x_next = mean + std * noise` (both bitwise).
    pub fn validate(&self) -> Result<()> {
        let mut prev = &self.init;
        for rec in &self.records {
            if rec.x_cur.as_slice() != prev.as_slice() {
                return Err(CoreError::invalid(format!(
                    "record {} breaks the chain",
                    rec.index
                )));
            }
            match (&rec.kind, &rec.sde) {
                (StepKind::SdeEm, Some(sde)) => {
                    let rebuilt = sde.mean.add_scaled(sde.std, &sde.noise);
                    if rebuilt.as_slice() != rec.x_next.as_slice() {
                        return Err(CoreError::invalid(format!(
                            "record {} breaks mean + std * noise reconstruction",
                            rec.index
                        )));
                    }
                }
                (StepKind::SdeEm, None) => {
                    return Err(CoreError::invalid(format!(
                        "stochastic record {} is missing transition parameters",
                        rec.index
                    )))
                }
                (_, Some(_)) => {
                    return Err(CoreError::invalid(format!(
                        "deterministic record {} carries transition parameters",
                        rec.index
                    )))
                }
                (_, None) => {}
            }
            prev = &rec.x_next;
        }
        Ok(())
    }

    /// Debug dump, line per record:
    /// `index kind t_cur t_next x_cur.. x_next.. [mean.. std]`
    /// (mean/std columns only on stochastic records).
    pub fn write_dump<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for rec in &self.records {
            write!(out, "{} {:?} {} {}", rec.index, rec.kind, rec.t_cur, rec.t_next)?;
            for v in rec.x_cur.as_slice() {
                write!(out, " {v}")?;
            }
            for v in rec.x_next.as_slice() {
                write!(out, " {v}")?;
            }
            if let Some(sde) = &rec.sde {
                for v in sde.mean.as_slice() {
                    write!(out, " {v}")?;
                }
                write!(out, " {}", sde.std)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Uniform log-SNR sub-grid from `t_start` down to `t_min`, used for the
/// compressed post-window region. Coarse multistep solvers stay well
/// conditioned on this spacing where the shifted-u spacing leaves one huge
/// final log-SNR jump.
pub(crate) fn lambda_uniform_times(t_start: f64, t_min: f64, steps: usize) -> Result<Vec<f64>> {
    let l0 = dpm_lambda(t_start)?;
    let l1 = dpm_lambda(t_min)?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(t_start);
    for k in 1..steps {
        let l = l0 + (l1 - l0) * k as f64 / steps as f64;
        out.push(dpm_lambda_inv(l));
    }
    out.push(t_min);
    Ok(out)
}

fn draw_noise<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> StateVec {
    StateVec((0..dim).map(|_| rng.sample(StandardNormal)).collect())
}

/// Sample one trajectory with the mixed schedule: stochastic steps inside
/// `window`, Euler steps elsewhere; with a [`FlashPlan`] the post-window tail
/// is compressed onto the plan's step count and integrated with the plan's
/// solver. Fully reproducible from (rng state, grid, window, flash, c).
pub fn sample_trajectory<R: Rng + ?Sized>(
    model: &VelocityModel,
    grid: &TimeGrid,
    window: &BTreeSet<usize>,
    c: Condition,
    rng: &mut R,
    flash: Option<&FlashPlan>,
) -> Result<Trajectory> {
    let init = draw_noise(model.dim(), rng);
    sample_trajectory_from(model, grid, window, c, init, rng, flash)
}

/// [`sample_trajectory`] with a caller-supplied start state; group sampling
/// uses this to share one initial noise across all members.
pub fn sample_trajectory_from<R: Rng + ?Sized>(
    model: &VelocityModel,
    grid: &TimeGrid,
    window: &BTreeSet<usize>,
    c: Condition,
    init: StateVec,
    rng: &mut R,
    flash: Option<&FlashPlan>,
) -> Result<Trajectory> {
    let t = grid.step_count();
    if let Some(&max) = window.iter().next_back() {
        if max >= t {
            return Err(CoreError::invalid(format!(
                "window index {max} out of range for {t} steps"
            )));
        }
        if grid.times()[max + 1] < grid.t_min() {
            return Err(CoreError::invalid(
                "window contains the final step but its target time is below t_min",
            ));
        }
    }
    if let Some(plan) = flash {
        plan.check_consistent(t, window)?;
    }
    init.check_finite("trajectory start state")?;
    let dim = model.dim();
    let mut records = Vec::new();
    let mut x = init.clone();

    let plain_until = flash.map(|p| p.window_end()).unwrap_or(t);
    for i in 0..plain_until {
        let (t_cur, t_next) = (grid.time(i), grid.time(i + 1));
        if window.contains(&i) {
            let noise = draw_noise(dim, rng);
            let out = sde_em_step(model, &x, t_cur, t_next, grid.sigma(i), c, &noise)?;
            records.push(StepRecord {
                index: i,
                kind: StepKind::SdeEm,
                t_cur,
                t_next,
                x_cur: x.clone(),
                x_next: out.x_next.clone(),
                sde: Some(SdeTransition {
                    mean: out.mean,
                    std: out.std,
                    noise,
                    sigma: grid.sigma(i),
                }),
            });
            x = out.x_next;
        } else {
            let next = ode_euler_step(model, &x, t_cur, t_next, c)?;
            records.push(StepRecord {
                index: i,
                kind: StepKind::OdeEuler,
                t_cur,
                t_next,
                x_cur: x.clone(),
                x_next: next.clone(),
                sde: None,
            });
            x = next;
        }
    }
    if let Some(plan) = flash {
        let start = plan.window_end();
        if plan.post_steps > 0 {
            let tail = lambda_uniform_times(grid.time(start), grid.t_min(), plan.post_steps)?;
            let mut solver = DpmState::new(plan.solver)?;
            for (k, pair) in tail.windows(2).enumerate() {
                let (t_cur, t_next) = (pair[0], pair[1]);
                let next = solver.step(model, &x, t_cur, t_next, c)?;
                records.push(StepRecord {
                    index: start + k,
                    kind: plan.solver,
                    t_cur,
                    t_next,
                    x_cur: x.clone(),
                    x_next: next.clone(),
                    sde: None,
                });
                x = next;
            }
        }
    }
    Ok(Trajectory {
        condition: c,
        init,
        records,
    })
}

/// Terminal states of `samples` mixed-schedule trajectories under common
/// random numbers: the initial noise and the per-(sample, step) Gaussian
/// draws depend only on `seed`, not on the window, so ensembles for
/// different windows are coupled. The Monte-Carlo instrument behind the
/// marginal-equivalence checks.
pub fn terminal_ensemble_crn(
    model: &VelocityModel,
    grid: &TimeGrid,
    window: &BTreeSet<usize>,
    c: Condition,
    samples: usize,
    seed: u64,
) -> Result<Vec<StateVec>> {
    use rand::SeedableRng;
    let t = grid.step_count();
    if let Some(&max) = window.iter().next_back() {
        if max >= t {
            return Err(CoreError::invalid(format!(
                "window index {max} out of range for {t} steps"
            )));
        }
    }
    let dim = model.dim();
    let mut out = Vec::with_capacity(samples);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let mut x = draw_noise(dim, &mut rng);
        for i in 0..t {
            // always consume the step's noise so draws align across windows
            let noise = draw_noise(dim, &mut rng);
            if window.contains(&i) {
                let outp = sde_em_step(model, &x, grid.time(i), grid.time(i + 1), grid.sigma(i), c, &noise)?;
                x = outp.x_next;
            } else {
                x = ode_euler_step(model, &x, grid.time(i), grid.time(i + 1), c)?;
            }
        }
        out.push(x);
    }
    Ok(out)
}

/// Fitted empirical convergence order of a DPM solver on uniform grids from
/// `t_hi` to `t_lo`: least-squares slope of log(terminal error) against
/// log(step count). The reference is a second-order run at `reference_steps`,
/// which must be much finer than the measured grids so its own error stays
/// negligible.
#[allow(clippy::too_many_arguments)]
pub fn fit_convergence_order(
    model: &VelocityModel,
    c: Condition,
    kind: StepKind,
    start: &StateVec,
    t_hi: f64,
    t_lo: f64,
    step_counts: &[usize],
    reference_steps: usize,
) -> Result<f64> {
    let max_steps = step_counts.iter().copied().max().unwrap_or(0);
    if max_steps == 0 || reference_steps < 8 * max_steps {
        return Err(CoreError::invalid(
            "reference grid must be at least 8x finer than the measured grids",
        ));
    }
    let mut reference = start.clone();
    let mut ref_solver = DpmState::new(StepKind::OdeDpm2Midpoint)?;
    for k in 0..reference_steps {
        let t_cur = t_hi + (t_lo - t_hi) * k as f64 / reference_steps as f64;
        let t_next = t_hi + (t_lo - t_hi) * (k + 1) as f64 / reference_steps as f64;
        reference = ref_solver.step(model, &reference, t_cur, t_next, c)?;
    }
    let mut logs: Vec<(f64, f64)> = Vec::with_capacity(step_counts.len());
    for &n in step_counts {
        let mut solver = DpmState::new(kind)?;
        let mut x = start.clone();
        for k in 0..n {
            let t_cur = t_hi + (t_lo - t_hi) * k as f64 / n as f64;
            let t_next = t_hi + (t_lo - t_hi) * (k + 1) as f64 / n as f64;
            x = solver.step(model, &x, t_cur, t_next, c)?;
        }
        let err = x.sub(&reference).norm();
        logs.push(((n as f64).ln(), err.ln()));
    }
    // least-squares slope of log err vs log n; order is its negation
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(-num / den)
}

/// Deterministic Euler pass over the whole grid from a given start state.
pub fn ode_sample(
    model: &VelocityModel,
    grid: &TimeGrid,
    c: Condition,
    mut x: StateVec,
) -> Result<StateVec> {
    for i in 0..grid.step_count() {
        x = ode_euler_step(model, &x, grid.time(i), grid.time(i + 1), c)?;
    }
    Ok(x)
}

/// Hybrid inference: the first `round(p_mix * T)` Euler steps use the trained
/// model, the remainder the frozen base model. Returns the terminal state.
pub fn hybrid_sample<R: Rng + ?Sized>(
    trained: &VelocityModel,
    base: &VelocityModel,
    grid: &TimeGrid,
    p_mix: f64,
    c: Condition,
    rng: &mut R,
) -> Result<StateVec> {
    if !(0.0..=1.0).contains(&p_mix) {
        return Err(CoreError::invalid(format!(
            "p_mix must lie in [0, 1], got {p_mix}"
        )));
    }
    if trained.dim() != base.dim() || trained.cond_count() != base.cond_count() {
        return Err(CoreError::invalid(
            "trained and base models must share dimension and condition set",
        ));
    }
    let t = grid.step_count();
    let split = (p_mix * t as f64).round() as usize;
    let mut x = draw_noise(trained.dim(), rng);
    for i in 0..t {
        let model = if i < split { trained } else { base };
        x = ode_euler_step(model, &x, grid.time(i), grid.time(i + 1), c)?;
    }
    Ok(x)
}
