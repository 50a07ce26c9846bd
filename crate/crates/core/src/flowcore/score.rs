//! Velocity-to-score conversion for rectified flow.

use super::state::StateVec;
use crate::error::{CoreError, Result};

/// Singularity clamp: the score has a 1/t pole, so every sampled time is kept
/// at or above this value.
pub const T_MIN_DEFAULT: f64 = 0.01;

/// Recover the marginal score from the velocity field:
/// `score = -x/t - ((1-t)/t) v`.
///
/// Valid for `t` in `[T_MIN_DEFAULT, 1)`; smaller `t` is rejected as the
/// singularity guard.
pub fn score_from_velocity(x: &StateVec, t: f64, v: &StateVec) -> Result<StateVec> {
    x.check_finite("score input x")?;
    v.check_finite("score input v")?;
    if !t.is_finite() || t < T_MIN_DEFAULT || t >= 1.0 {
        return Err(CoreError::invalid(format!(
            "score time must lie in [{T_MIN_DEFAULT}, 1), got {t}"
        )));
    }
    let a = -1.0 / t;
    let b = -(1.0 - t) / t;
    Ok(x.scale(a).add_scaled(b, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowcore::{AffineGaussianTask, Condition, VelocityModel};
    use approx::assert_abs_diff_eq;

    #[test]
    fn direct_formula_point() {
        let s = score_from_velocity(&StateVec(vec![0.5]), 0.5, &StateVec(vec![1.0])).unwrap();
        assert_abs_diff_eq!(s[0], -2.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_case() {
        for &t in &[0.01, 0.3, 0.99] {
            let s =
                score_from_velocity(&StateVec(vec![0.0, 0.0]), t, &StateVec(vec![0.0, 0.0]))
                    .unwrap();
            assert_eq!(s.as_slice(), &[0.0, 0.0]);
        }
    }

    #[test]
    fn rejects_singular_times() {
        let x = StateVec(vec![1.0]);
        let v = StateVec(vec![0.0]);
        assert!(score_from_velocity(&x, 0.005, &v).is_err());
        assert!(score_from_velocity(&x, 1.0, &v).is_err());
    }

    /// On the standard-normal oracle the converted score must equal the
    /// closed-form Gaussian score -x / (t^2 + (1-t)^2) on a grid of (x, t).
    #[test]
    fn score_identity_on_oracle_grid() {
        let task = AffineGaussianTask::standard(2);
        let model = VelocityModel::oracle(vec![task.clone()]).unwrap();
        for &t in &[0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99] {
            for &a in &[-2.0, -0.5, 0.0, 0.7, 1.5] {
                let x = StateVec(vec![a, -0.3 * a]);
                let v = model.velocity(&x, t, Condition(0)).unwrap();
                let s = score_from_velocity(&x, t, &v).unwrap();
                let m = t * t + (1.0 - t) * (1.0 - t);
                assert_abs_diff_eq!(s[0], -x[0] / m, epsilon = 1e-12);
                assert_abs_diff_eq!(s[1], -x[1] / m, epsilon = 1e-12);
                // and against the oracle's own marginal score
                let s_direct = task.marginal_score(&x, t);
                assert_abs_diff_eq!(s[0], s_direct[0], epsilon = 1e-12);
                assert_abs_diff_eq!(s[1], s_direct[1], epsilon = 1e-12);
            }
        }
    }
}
