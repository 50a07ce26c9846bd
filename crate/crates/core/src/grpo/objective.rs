//! The clipped policy objective over window steps and its exact gradient.

use super::train::GrpoConfig;
use crate::error::{CoreError, Result};
use crate::flowcore::{Condition, ParamGrad, StateVec, VelocityModel};
use crate::samplers::{sde_mean_from_velocity, StepKind, StepRecord, Trajectory};
use std::ops::Range;

/// N trajectories sharing one condition and one initial noise, with rewards
/// and standardized advantages, plus the window step indices to optimize.
#[derive(Debug, Clone)]
pub struct Group {
    pub condition: Condition,
    pub init_noise: StateVec,
    pub trajectories: Vec<Trajectory>,
    /// N x K reward matrix.
    pub rewards: Vec<Vec<f64>>,
    pub advantages: Vec<f64>,
    /// Sorted step indices the objective sums over (the window `S`).
    pub opt_indices: Vec<usize>,
}

impl Group {
    /// Every trajectory must share the init noise and carry a stochastic
    /// record at each optimized index.
    pub fn validate(&self) -> Result<()> {
        if self.trajectories.len() < 2 {
            return Err(CoreError::invalid("group needs N >= 2 trajectories"));
        }
        if self.opt_indices.is_empty() {
            return Err(CoreError::invalid("group window is empty"));
        }
        for traj in &self.trajectories {
            if traj.init.as_slice() != self.init_noise.as_slice() {
                return Err(CoreError::invalid("group members must share the initial noise"));
            }
            for &idx in &self.opt_indices {
                match traj.records.get(idx) {
                    Some(rec) if rec.kind == StepKind::SdeEm => {}
                    _ => {
                        return Err(CoreError::invalid(format!(
                            "no stochastic record at window index {idx}"
                        )))
                    }
                }
            }
        }
        Ok(())
    }
}

/// Log of the policy ratio for one stochastic step: the new-policy transition
/// mean is recomputed at (x_cur, t_cur, c) through the SDE drift, and the
/// ratio reduces to a difference of quadratic forms around the two means
/// (the transition std does not depend on the parameters):
/// `(|x_next - old_mean|^2 - |x_next - new_mean|^2) / (2 std^2)`.
pub fn policy_logratio(
    step: &StepRecord,
    new_model: &VelocityModel,
    c: Condition,
) -> Result<f64> {
    let (logratio, _, _) = logratio_parts(step, new_model, c)?;
    Ok(logratio)
}

/// (log-ratio, new_mean, dmean/dv scale) for one stochastic record.
fn logratio_parts(
    step: &StepRecord,
    new_model: &VelocityModel,
    c: Condition,
) -> Result<(f64, StateVec, f64)> {
    let sde = match (&step.kind, &step.sde) {
        (StepKind::SdeEm, Some(sde)) => sde,
        _ => {
            return Err(CoreError::invalid(
                "policy ratio is defined only on stochastic window steps",
            ))
        }
    };
    if !(sde.std > 0.0) {
        return Err(CoreError::invalid("stochastic record has non-positive std"));
    }
    let v = new_model.velocity(&step.x_cur, step.t_cur, c)?;
    let new_mean = sde_mean_from_velocity(&step.x_cur, &v, step.t_cur, step.t_next, sde.sigma);
    let logratio = (step.x_next.dist2(&sde.mean) - step.x_next.dist2(&new_mean))
        / (2.0 * sde.std * sde.std);
    // mean = x (1 + s^2 dt / 2t) + v * dt (1 + s^2 (1-t) / 2t)
    let dt = step.t_next - step.t_cur;
    let scale = dt * (1.0 + sde.sigma * sde.sigma * (1.0 - step.t_cur) / (2.0 * step.t_cur));
    Ok((logratio, new_mean, scale))
}

/// Objective and exact gradient restricted to the given window indices and
/// member range, normalized by the FULL `1 / (N |S|)` so partial evaluations
/// sum to the whole objective. Advantages and old-policy quantities are
/// constants; the clipped branch contributes zero gradient where it is
/// active and binding.
pub(crate) fn objective_and_grad_slice(
    group: &Group,
    new_model: &VelocityModel,
    config: &GrpoConfig,
    steps: &[usize],
    members: Range<usize>,
) -> Result<(f64, ParamGrad)> {
    let n = group.trajectories.len() as f64;
    let s_len = group.opt_indices.len() as f64;
    let eps = config.clip_epsilon;
    let mut j = 0.0;
    let mut grad = ParamGrad::zeros(new_model.param_count());
    for i in members {
        let traj = &group.trajectories[i];
        let a = group.advantages[i];
        for &idx in steps {
            let rec = &traj.records[idx];
            let sde = rec.sde.as_ref().expect("validated stochastic record");
            let (v, cache) = new_model.forward_cached(&rec.x_cur, rec.t_cur, group.condition)?;
            let new_mean =
                sde_mean_from_velocity(&rec.x_cur, &v, rec.t_cur, rec.t_next, sde.sigma);
            let logratio = (rec.x_next.dist2(&sde.mean) - rec.x_next.dist2(&new_mean))
                / (2.0 * sde.std * sde.std);
            let ratio = logratio.exp();
            let unclipped = ratio * a;
            let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * a;
            let term = unclipped.min(clipped);
            j += term / (n * s_len);
            if unclipped <= clipped {
                // d term / d theta = A r d(logratio)/d theta
                let dt = rec.t_next - rec.t_cur;
                let scale =
                    dt * (1.0 + sde.sigma * sde.sigma * (1.0 - rec.t_cur) / (2.0 * rec.t_cur));
                let coeff = a * ratio / (n * s_len * sde.std * sde.std);
                let cotangent: Vec<f64> = (0..new_mean.dim())
                    .map(|k| coeff * (rec.x_next[k] - new_mean[k]) * scale)
                    .collect();
                new_model.backprop(&cache, &cotangent, &mut grad);
            }
        }
    }
    Ok((j, grad))
}

/// Full objective `J = (1/N) sum_i (1/|S|) sum_{t in S} min(r A, clip(r) A)`
/// and its exact parameter gradient.
pub fn grpo_objective_and_grad(
    group: &Group,
    new_model: &VelocityModel,
    config: &GrpoConfig,
) -> Result<(f64, ParamGrad)> {
    group.validate()?;
    if !new_model.is_trainable() {
        return Err(CoreError::NotTrainable);
    }
    objective_and_grad_slice(
        group,
        new_model,
        config,
        &group.opt_indices,
        0..group.trajectories.len(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowcore::{
        try_finite_diff_grad, Architecture, Condition, VelocityModel,
    };
    use crate::grpo::advantage::compute_advantages;
    use crate::samplers::{sample_trajectory, TimeGrid};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn small_arch() -> Architecture {
        Architecture {
            dim: 2,
            cond_count: 1,
            embed_dim: 2,
            hidden: vec![6],
            activation: crate::flowcore::Activation::Tanh,
        }
    }

    fn make_group(model: &VelocityModel, n: usize, window: &[usize], seed: u64) -> Group {
        let grid = TimeGrid::default_schedule(10).unwrap();
        let win: BTreeSet<usize> = window.iter().copied().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trajectories = Vec::new();
        // shared init across members, as in group sampling
        let first =
            sample_trajectory(model, &grid, &win, Condition(0), &mut rng, None).unwrap();
        let init = first.init.clone();
        trajectories.push(first);
        for _ in 1..n {
            let t = crate::samplers::sample_trajectory_from(
                model,
                &grid,
                &win,
                Condition(0),
                init.clone(),
                &mut rng,
                None,
            )
            .unwrap();
            trajectories.push(t);
        }
        let rewards: Vec<Vec<f64>> = trajectories
            .iter()
            .map(|t| vec![t.terminal()[0]])
            .collect();
        let advantages = compute_advantages(&rewards, 5.0, &[1.0]).unwrap();
        Group {
            condition: Condition(0),
            init_noise: init,
            trajectories,
            rewards,
            advantages,
            opt_indices: window.to_vec(),
        }
    }

    #[test]
    fn ratio_one_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = VelocityModel::trainable(small_arch(), &mut rng);
        let group = make_group(&model, 4, &[1, 2], 11);
        for traj in &group.trajectories {
            for &idx in &group.opt_indices {
                let lr = policy_logratio(&traj.records[idx], &model, Condition(0)).unwrap();
                assert_eq!(lr, 0.0, "same policy must give exactly zero log-ratio");
            }
        }
        let (j, _) = grpo_objective_and_grad(&group, &model, &GrpoConfig::default()).unwrap();
        let mean_adv = group.advantages.iter().sum::<f64>() / group.advantages.len() as f64;
        assert_abs_diff_eq!(j, mean_adv, epsilon = 1e-12);
        assert!(j.abs() < 1e-10);
    }

    #[test]
    fn quadratic_form_identity_by_hand() {
        // x_next=1, old_mean=0, new_mean=0.5, std=1 -> (1 - 0.25)/2 = 0.375
        let logr = (1.0f64 - 0.25) / 2.0;
        assert_abs_diff_eq!(logr, 0.375, epsilon = 1e-15);
    }

    #[test]
    fn logratio_rejected_on_ode_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = VelocityModel::trainable(small_arch(), &mut rng);
        let grid = TimeGrid::default_schedule(10).unwrap();
        let win: BTreeSet<usize> = [2].into_iter().collect();
        let traj = sample_trajectory(&model, &grid, &win, Condition(0), &mut rng, None).unwrap();
        // record 0 is an ODE step
        assert!(policy_logratio(&traj.records[0], &model, Condition(0)).is_err());
    }

    #[test]
    fn translation_invariance_of_logratio() {
        // adding the same constant to both means and x_next leaves it fixed
        let d2 = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
        };
        let base = (d2(&[1.0, 2.0], &[0.0, 0.0]) - d2(&[1.0, 2.0], &[0.5, 0.5])) / (2.0 * 0.09);
        let shifted = (d2(&[4.0, 5.0], &[3.0, 3.0]) - d2(&[4.0, 5.0], &[3.5, 3.5])) / (2.0 * 0.09);
        assert_abs_diff_eq!(base, shifted, epsilon = 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let old_model = VelocityModel::trainable(small_arch(), &mut rng);
        let group = make_group(&old_model, 4, &[1, 3], 17);
        // evaluate the objective at a slightly different policy with a clip
        // band wide enough that the unclipped branch stays differentiable
        let mut new_model = old_model.clone();
        {
            let params = new_model.params_mut().unwrap();
            let mut prng = ChaCha8Rng::seed_from_u64(999);
            for p in params.iter_mut() {
                *p += 0.01 * (rand::Rng::random::<f64>(&mut prng) - 0.5);
            }
        }
        let config = GrpoConfig {
            clip_epsilon: 0.5,
            ..GrpoConfig::default()
        };
        let (_, grad) = grpo_objective_and_grad(&group, &new_model, &config).unwrap();
        let theta_to_vec = new_model.params().to_vec();
        let mut probe = new_model.clone();
        let fd = try_finite_diff_grad(
            |p| {
                probe.set_params(p)?;
                Ok(grpo_objective_and_grad(&group, &probe, &config)?.0)
            },
            &theta_to_vec,
            1e-5,
        )
        .unwrap();
        let err = grad.max_relative_error(&fd, 1e-7);
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn clip_saturation_zeroes_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let old_model = VelocityModel::trainable(small_arch(), &mut rng);
        let mut group = make_group(&old_model, 2, &[1], 23);
        // push the policy so ratios move well outside the tiny band
        let mut new_model = old_model.clone();
        {
            let params = new_model.params_mut().unwrap();
            for p in params.iter_mut() {
                *p += 0.05;
            }
        }
        let config = GrpoConfig {
            clip_epsilon: 1e-4,
            ..GrpoConfig::default()
        };
        let r0 = policy_logratio(&group.trajectories[0].records[1], &new_model, Condition(0))
            .unwrap()
            .exp();
        assert!((r0 - 1.0).abs() > config.clip_epsilon, "ratio must leave the band");
        // advantage signed so the clipped branch is the min: saturated term,
        // exactly zero gradient
        group.advantages = vec![if r0 > 1.0 { 1.0 } else { -1.0 }, 0.0];
        let g = objective_and_grad_slice(&group, &new_model, &config, &[1], 0..1)
            .unwrap()
            .1;
        assert!(g.values.iter().all(|&v| v == 0.0), "saturated gradient must vanish");
        // opposite sign: unclipped branch is the min, gradient flows
        group.advantages = vec![if r0 > 1.0 { -1.0 } else { 1.0 }, 0.0];
        let g = objective_and_grad_slice(&group, &new_model, &config, &[1], 0..1)
            .unwrap()
            .1;
        assert!(g.values.iter().any(|&v| v != 0.0), "unsaturated gradient must flow");
    }

    #[test]
    fn empty_window_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = VelocityModel::trainable(small_arch(), &mut rng);
        let mut group = make_group(&model, 2, &[1], 29);
        group.opt_indices.clear();
        assert!(grpo_objective_and_grad(&group, &model, &GrpoConfig::default()).is_err());
    }
}
