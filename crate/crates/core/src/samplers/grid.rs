//! Discrete denoising schedule: shifted times and per-step noise scales.

use crate::error::{CoreError, Result};
use crate::flowcore::T_MIN_DEFAULT;

/// Flow shift `t = s*u / (1 + (s-1)*u)`. Identity at `s = 1`, pushes times
/// toward 1 for `s > 1`, and stays bounded on [0, 1].
pub fn time_shift(u: f64, s: f64) -> f64 {
    s * u / (1.0 + (s - 1.0) * u)
}

/// Log signal-to-noise ratio of the rectified-flow path,
/// `lambda(t) = log((1-t)/t)`. Rejected at the endpoints where it diverges.
pub fn dpm_lambda(t: f64) -> Result<f64> {
    if !t.is_finite() || t <= 0.0 || t >= 1.0 {
        return Err(CoreError::invalid(format!(
            "lambda(t) requires t in (0, 1), got {t}"
        )));
    }
    Ok(((1.0 - t) / t).ln())
}

/// Inverse of [`dpm_lambda`]: `t = 1 / (1 + e^lambda)`.
pub fn dpm_lambda_inv(l: f64) -> f64 {
    1.0 / (1.0 + l.exp())
}

/// The denoising schedule: `T` steps over strictly decreasing times
/// `t_0 = 1 > t_1 > ... > t_T = t_min`, raw uniform times mapped through the
/// flow shift, plus the per-step SDE noise scale
/// `sigma_i = eta * sqrt(t_i / (1 - t_i))` evaluated at each step's current
/// time. At the `t = 1` endpoint the `1 - t` denominator uses the next grid
/// time, keeping the first-step variance bounded and schedule-consistent.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
    sigmas: Vec<f64>,
    shift: f64,
    eta: f64,
    t_min: f64,
}

impl TimeGrid {
    pub fn new(steps: usize, shift: f64, eta: f64, t_min: f64) -> Result<Self> {
        if steps < 2 {
            return Err(CoreError::invalid("time grid needs at least 2 steps"));
        }
        if !(shift >= 1.0) {
            return Err(CoreError::invalid("shift must be >= 1"));
        }
        if !(eta >= 0.0) {
            return Err(CoreError::invalid("eta must be >= 0"));
        }
        if !(t_min > 0.0 && t_min < 1.0) {
            return Err(CoreError::invalid("t_min must lie in (0, 1)"));
        }
        let times: Vec<f64> = (0..=steps)
            .map(|i| {
                let u = 1.0 - i as f64 / steps as f64;
                time_shift(u, shift).clamp(t_min, 1.0)
            })
            .collect();
        for w in times.windows(2) {
            if w[1] >= w[0] {
                return Err(CoreError::invalid(
                    "times must be strictly decreasing; t_min too large for this step count",
                ));
            }
        }
        let sigmas = (0..steps)
            .map(|i| {
                let t = times[i];
                let denom_t = if t >= 1.0 - 1e-9 { times[i + 1] } else { t };
                eta * (t / (1.0 - denom_t)).sqrt()
            })
            .collect();
        Ok(TimeGrid {
            times,
            sigmas,
            shift,
            eta,
            t_min,
        })
    }

    /// Default schedule: shift 3, eta 0.7, singularity clamp 0.01.
    pub fn default_schedule(steps: usize) -> Result<Self> {
        Self::new(steps, 3.0, 0.7, T_MIN_DEFAULT)
    }

    pub fn step_count(&self) -> usize {
        self.times.len() - 1
    }

    /// `T + 1` strictly decreasing times, `times[0] = 1`, `times[T] = t_min`.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    /// Per-step noise scales, length `T`.
    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn sigma(&self, i: usize) -> f64 {
        self.sigmas[i]
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}
