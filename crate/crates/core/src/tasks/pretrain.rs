//! Flow-matching pretraining driver: produces the base model that GRPO
//! post-training starts from.

use super::spec::TaskSpec;
use crate::error::{CoreError, Result};
use crate::flowcore::{fm_loss_and_grad, Condition, Optimizer, VelocityModel};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct PretrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            steps: 3000,
            batch_size: 128,
            learning_rate: 1e-3,
            weight_decay: 1e-4,
        }
    }
}

/// Run AdamW descent on the flow-matching loss; returns the per-step loss
/// curve. The model is updated in place. Aborts on a non-finite loss.
pub fn pretrain<R: Rng + ?Sized>(
    model: &mut VelocityModel,
    task: &TaskSpec,
    config: &PretrainConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !model.is_trainable() {
        return Err(CoreError::NotTrainable);
    }
    if model.dim() != task.dim() {
        return Err(CoreError::invalid("model and task dimensions differ"));
    }
    if config.batch_size == 0 {
        return Err(CoreError::invalid("batch size must be positive"));
    }
    let conds = task.cond_count().min(model.cond_count());
    let mut opt = Optimizer::adamw(
        config.learning_rate,
        config.weight_decay,
        model.param_count(),
    );
    let mut curve = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let batch: Vec<_> = (0..config.batch_size)
            .map(|_| {
                let c = Condition(rng.random_range(0..conds));
                task.sample_data(c, rng).map(|x| (x, c))
            })
            .collect::<Result<Vec<_>>>()?;
        let (loss, grad) = fm_loss_and_grad(model, &batch, rng)?;
        if !loss.is_finite() {
            return Err(CoreError::Diverged(format!(
                "non-finite flow-matching loss at step {step}"
            )));
        }
        opt.descend(model.params_mut()?, &grad);
        curve.push(loss);
    }
    Ok(curve)
}

/// Trailing mean of the last `window` entries at each position (shorter
/// prefixes average what is available).
pub fn trailing_average(curve: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(curve.len());
    let mut sum = 0.0;
    for (i, &v) in curve.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= curve[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}
