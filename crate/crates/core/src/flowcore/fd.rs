//! Central finite-difference gradient oracle. Test-side reference for every
//! analytic gradient in the crate; deliberately knows nothing about models.

use super::state::ParamGrad;
use crate::error::{CoreError, Result};

/// Central difference `(f(theta + h e_i) - f(theta - h e_i)) / (2h)` for every
/// coordinate of `theta`.
pub fn finite_diff_grad<F>(mut f: F, theta: &[f64], h: f64) -> ParamGrad
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut grad = ParamGrad::zeros(theta.len());
    let mut probe = theta.to_vec();
    for i in 0..theta.len() {
        probe[i] = theta[i] + h;
        let up = f(&probe);
        probe[i] = theta[i] - h;
        let down = f(&probe);
        probe[i] = theta[i];
        grad.values[i] = (up - down) / (2.0 * h);
    }
    grad
}

/// Fallible variant for objectives that can reject a probe point.
pub fn try_finite_diff_grad<F>(mut f: F, theta: &[f64], h: f64) -> Result<ParamGrad>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if h <= 0.0 {
        return Err(CoreError::invalid("finite-difference step must be positive"));
    }
    let mut grad = ParamGrad::zeros(theta.len());
    let mut probe = theta.to_vec();
    for i in 0..theta.len() {
        probe[i] = theta[i] + h;
        let up = f(&probe)?;
        probe[i] = theta[i] - h;
        let down = f(&probe)?;
        probe[i] = theta[i];
        grad.values[i] = (up - down) / (2.0 * h);
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quadratic() {
        let g = finite_diff_grad(|p| p.iter().map(|x| x * x).sum(), &[3.0], 1e-5);
        assert_abs_diff_eq!(g.values[0], 6.0, epsilon = 1e-6);
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let g = finite_diff_grad(|_| 4.2, &[1.0, -2.0, 0.5], 1e-5);
        assert!(g.values.iter().all(|&v| v == 0.0));
    }
}
