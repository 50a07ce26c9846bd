//! Per-step integrators: Euler ODE, Euler-Maruyama SDE with the
//! score-corrected drift, Gaussian transition log-densities, and the
//! DPM-Solver++ multistep family reformulated for rectified flow.

use super::grid::dpm_lambda;
use crate::error::{CoreError, Result};
use crate::flowcore::{Condition, StateVec, VelocityModel, T_MIN_DEFAULT};
use serde::{Deserialize, Serialize};

/// Which integrator produced a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepKind {
    OdeEuler,
    SdeEm,
    OdeDpm1,
    OdeDpm2Midpoint,
    OdeDpm2Heun,
    OdeDpm3,
}

impl StepKind {
    pub fn is_dpm(self) -> bool {
        matches!(
            self,
            StepKind::OdeDpm1 | StepKind::OdeDpm2Midpoint | StepKind::OdeDpm2Heun | StepKind::OdeDpm3
        )
    }

    /// Multistep history length the solver keeps (0 for non-DPM kinds).
    fn history_needed(self) -> usize {
        match self {
            StepKind::OdeDpm1 => 0,
            StepKind::OdeDpm2Midpoint | StepKind::OdeDpm2Heun => 1,
            StepKind::OdeDpm3 => 2,
            _ => 0,
        }
    }
}

/// Euler step of the probability-flow ODE: `x + v(x, t_cur) * (t_next - t_cur)`.
/// Times decrease during denoising, so the increment is negative.
pub fn ode_euler_step(
    model: &VelocityModel,
    x: &StateVec,
    t_cur: f64,
    t_next: f64,
    c: Condition,
) -> Result<StateVec> {
    if t_next >= t_cur {
        return Err(CoreError::invalid(format!(
            "euler step requires t_next < t_cur, got {t_next} >= {t_cur}"
        )));
    }
    let v = model.velocity(x, t_cur, c)?;
    Ok(x.add_scaled(t_next - t_cur, &v))
}

/// Output of one stochastic step: the sampled state plus the Gaussian
/// transition parameters needed later for policy-ratio recomputation.
#[derive(Debug, Clone)]
pub struct SdeStepOut {
    pub x_next: StateVec,
    pub mean: StateVec,
    pub std: f64,
}

/// Transition mean of the Euler-Maruyama step given the velocity value:
/// `mean = x + [v + sigma^2 (x + (1-t) v) / (2t)] * dt`. Shared by the
/// sampler and the policy-ratio path so both produce bit-identical means.
pub fn sde_mean_from_velocity(
    x: &StateVec,
    v: &StateVec,
    t_cur: f64,
    t_next: f64,
    sigma: f64,
) -> StateVec {
    let dt = t_next - t_cur;
    if sigma == 0.0 {
        return x.add_scaled(dt, v);
    }
    let s2 = sigma * sigma;
    let correction = x.add_scaled(1.0 - t_cur, v); // x + (1-t) v
    let drift = v.add_scaled(s2 / (2.0 * t_cur), &correction);
    x.add_scaled(dt, &drift)
}

/// Euler-Maruyama step of the marginal-preserving SDE. The standard-normal
/// `noise` is caller-supplied so that recorded transitions can be replayed
/// exactly when ratios are recomputed.
///
/// With `sigma = 0` the output is bitwise equal to [`ode_euler_step`].
pub fn sde_em_step(
    model: &VelocityModel,
    x: &StateVec,
    t_cur: f64,
    t_next: f64,
    sigma: f64,
    c: Condition,
    noise: &StateVec,
) -> Result<SdeStepOut> {
    if t_next >= t_cur {
        return Err(CoreError::invalid(format!(
            "sde step requires t_next < t_cur, got {t_next} >= {t_cur}"
        )));
    }
    if t_cur < T_MIN_DEFAULT {
        return Err(CoreError::invalid(format!(
            "sde step requires t_cur >= {T_MIN_DEFAULT} (singularity guard), got {t_cur}"
        )));
    }
    if !(sigma >= 0.0) {
        return Err(CoreError::invalid("sigma must be >= 0"));
    }
    noise.check_finite("sde noise")?;
    let v = model.velocity(x, t_cur, c)?;
    let mean = sde_mean_from_velocity(x, &v, t_cur, t_next, sigma);
    let std = sigma * (t_cur - t_next).sqrt();
    let x_next = mean.add_scaled(std, noise);
    Ok(SdeStepOut { x_next, mean, std })
}

/// Log-density of the isotropic Gaussian `N(mean, std^2 I)` at `x`.
pub fn transition_logprob(mean: &StateVec, std: f64, x: &StateVec) -> Result<f64> {
    if !(std > 0.0) {
        return Err(CoreError::invalid(format!(
            "transition std must be positive, got {std}"
        )));
    }
    mean.check_finite("transition mean")?;
    x.check_finite("transition point")?;
    let d = mean.dim() as f64;
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    Ok(-0.5 * d * (ln2pi + 2.0 * std.ln()) - x.dist2(mean) / (2.0 * std * std))
}

/// Multistep DPM-Solver++ state for one contiguous ODE region. The solver
/// works on the x-prediction `x0_hat = x - v t` and keeps up to two previous
/// predictions; the order ramps up from a first-order step as history fills.
/// History must be [`DpmState::reset`] whenever the step kind changes
/// (multistep history across an SDE step is invalid).
#[derive(Debug, Clone)]
pub struct DpmState {
    kind: StepKind,
    /// (t, x_pred) pairs, most recent last.
    history: Vec<(f64, StateVec)>,
}

impl DpmState {
    pub fn new(kind: StepKind) -> Result<Self> {
        if !kind.is_dpm() {
            return Err(CoreError::invalid(format!(
                "DpmState requires a DPM step kind, got {kind:?}"
            )));
        }
        Ok(DpmState {
            kind,
            history: Vec::with_capacity(2),
        })
    }

    pub fn kind(&self) -> StepKind {
        self.kind
    }

    pub fn reset(&mut self) {
        self.history.clear();
    }

    /// Advance `x` from `t_cur` to `t_next` with one velocity evaluation.
    pub fn step(
        &mut self,
        model: &VelocityModel,
        x: &StateVec,
        t_cur: f64,
        t_next: f64,
        c: Condition,
    ) -> Result<StateVec> {
        if t_next >= t_cur {
            return Err(CoreError::invalid(format!(
                "dpm step requires t_next < t_cur, got {t_next} >= {t_cur}"
            )));
        }
        let lam_cur = dpm_lambda(t_cur)?;
        let lam_next = if t_next >= 1.0 {
            return Err(CoreError::invalid("dpm step target time must be < 1"));
        } else {
            // t_next may equal the grid's t_min, still inside (0, 1)
            dpm_lambda(t_next)?
        };
        for (t_prev, _) in &self.history {
            if (t_prev - t_cur).abs() < 1e-14 {
                return Err(CoreError::invalid(
                    "coincident history times in dpm multistep",
                ));
            }
        }
        let v = model.velocity(x, t_cur, c)?;
        let x_pred = x.add_scaled(-t_cur, &v);
        let h = lam_next - lam_cur;
        let ratio = t_next / t_cur;
        let em1 = (-h).exp_m1(); // e^{-h} - 1, negative for h > 0
        let alpha_next = 1.0 - t_next;

        let use_hist = self.history.len().min(self.kind.history_needed());
        let x_next = if use_hist == 0 {
            // first-order update (also the fallback on the first step of a run)
            x.scale(ratio).add_scaled(-alpha_next * em1, &x_pred)
        } else {
            let (t_prev, ref xp_prev) = self.history[self.history.len() - 1];
            let h_prev = lam_cur - dpm_lambda(t_prev)?;
            if use_hist == 1 {
                match self.kind {
                    StepKind::OdeDpm2Midpoint | StepKind::OdeDpm3 => {
                        let r = h / (2.0 * h_prev);
                        let d = x_pred.scale(1.0 + r).add_scaled(-r, xp_prev);
                        x.scale(ratio).add_scaled(-alpha_next * em1, &d)
                    }
                    StepKind::OdeDpm2Heun => {
                        let d1 = x_pred.sub(xp_prev).scale(h / h_prev);
                        x.scale(ratio)
                            .add_scaled(-alpha_next * em1, &x_pred)
                            .add_scaled(alpha_next * (em1 / h + 1.0), &d1)
                    }
                    _ => unreachable!("history_needed > 0 only for 2nd/3rd order"),
                }
            } else {
                // third-order multistep
                let (t_prev2, ref xp_prev2) = self.history[self.history.len() - 2];
                let h_prev2 = dpm_lambda(t_prev)? - dpm_lambda(t_prev2)?;
                let r0 = h_prev / h;
                let r1 = h_prev2 / h_prev;
                let d1_0 = x_pred.sub(xp_prev).scale(1.0 / r0);
                let d1_1 = xp_prev.sub(xp_prev2).scale(1.0 / r1);
                let d1 = d1_0.add_scaled(r0 / (r0 + r1), &d1_0.sub(&d1_1));
                let d2 = d1_0.sub(&d1_1).scale(1.0 / (r0 + r1));
                x.scale(ratio)
                    .add_scaled(-alpha_next * em1, &x_pred)
                    .add_scaled(alpha_next * (em1 / h + 1.0), &d1)
                    .add_scaled(-alpha_next * ((em1 + h) / (h * h) - 0.5), &d2)
            }
        };
        self.history.push((t_cur, x_pred));
        if self.history.len() > 2 {
            self.history.remove(0);
        }
        Ok(x_next)
    }
}
