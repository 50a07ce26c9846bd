//! Flow-matching regression loss with exact reverse-mode gradients.

use super::model::VelocityModel;
use super::score::T_MIN_DEFAULT;
use super::state::{Condition, ParamGrad, StateVec};
use crate::error::{CoreError, Result};
use rand::Rng;
use rand_distr::StandardNormal;

/// One pre-drawn training point for [`fm_loss_and_grad_at`].
#[derive(Debug, Clone)]
pub struct FmDraw {
    pub noise: StateVec,
    pub t: f64,
}

/// Mean over the batch of `|v_theta(x_t, t, c) - (eps - x0)|^2` with
/// `x_t = (1-t) x0 + t eps`, plus its exact parameter gradient.
///
/// Noise and times are drawn here (`eps ~ N(0, I)`, `t ~ U(t_min, 1)`); use
/// [`fm_loss_and_grad_at`] to supply them explicitly.
pub fn fm_loss_and_grad<R: Rng + ?Sized>(
    model: &VelocityModel,
    batch: &[(StateVec, Condition)],
    rng: &mut R,
) -> Result<(f64, ParamGrad)> {
    let dim = model.dim();
    let draws: Vec<FmDraw> = batch
        .iter()
        .map(|_| FmDraw {
            noise: StateVec((0..dim).map(|_| rng.sample(StandardNormal)).collect()),
            t: T_MIN_DEFAULT + (1.0 - T_MIN_DEFAULT) * rng.random::<f64>(),
        })
        .collect();
    fm_loss_and_grad_at(model, batch, &draws)
}

/// Deterministic variant with caller-supplied `(eps, t)` draws, one per batch
/// item. Times at or above the singularity clamp are required.
pub fn fm_loss_and_grad_at(
    model: &VelocityModel,
    batch: &[(StateVec, Condition)],
    draws: &[FmDraw],
) -> Result<(f64, ParamGrad)> {
    if !model.is_trainable() {
        return Err(CoreError::NotTrainable);
    }
    if batch.is_empty() {
        return Err(CoreError::invalid("flow-matching batch must be non-empty"));
    }
    if draws.len() != batch.len() {
        return Err(CoreError::invalid("one draw per batch item required"));
    }
    let n = batch.len() as f64;
    let mut loss = 0.0;
    let mut grad = ParamGrad::zeros(model.param_count());
    for ((x0, c), draw) in batch.iter().zip(draws) {
        x0.check_finite("flow-matching data point")?;
        if draw.t < T_MIN_DEFAULT || draw.t > 1.0 {
            return Err(CoreError::invalid(format!(
                "draw time must lie in [{T_MIN_DEFAULT}, 1], got {}",
                draw.t
            )));
        }
        let xt = x0.scale(1.0 - draw.t).add_scaled(draw.t, &draw.noise);
        let target = draw.noise.sub(x0);
        let (v, cache) = model.forward_cached(&xt, draw.t, *c)?;
        let residual = v.sub(&target);
        loss += residual.as_slice().iter().map(|r| r * r).sum::<f64>() / n;
        // d loss / d v = 2 residual / n
        let cotangent: Vec<f64> = residual.as_slice().iter().map(|r| 2.0 * r / n).collect();
        model.backprop(&cache, &cotangent, &mut grad);
    }
    if !loss.is_finite() {
        return Err(CoreError::Diverged(format!(
            "flow-matching loss is {loss}"
        )));
    }
    Ok((loss, grad))
}
