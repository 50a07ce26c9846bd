//! Core value types: state vectors, conditions, parameter gradients.

use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};

/// A point of the generative state space (the `x_t` being denoised).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVec(pub Vec<f64>);

impl StateVec {
    pub fn zeros(dim: usize) -> Self {
        StateVec(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Errors unless every entry is finite.
    pub fn check_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(CoreError::NonFinite(what.to_string()))
        }
    }

    /// `self + c * other`, the workhorse of every integrator step.
    pub fn add_scaled(&self, c: f64, other: &StateVec) -> StateVec {
        debug_assert_eq!(self.dim(), other.dim());
        StateVec(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + c * b)
                .collect(),
        )
    }

    pub fn scale(&self, c: f64) -> StateVec {
        StateVec(self.0.iter().map(|a| a * c).collect())
    }

    pub fn sub(&self, other: &StateVec) -> StateVec {
        self.add_scaled(-1.0, other)
    }

    /// Squared Euclidean distance to `other`.
    pub fn dist2(&self, other: &StateVec) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

impl From<Vec<f64>> for StateVec {
    fn from(v: Vec<f64>) -> Self {
        StateVec(v)
    }
}

impl std::ops::Index<usize> for StateVec {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Discrete conditioning label (the toy stand-in for a prompt).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Condition(pub usize);

impl Condition {
    pub fn label(&self) -> usize {
        self.0
    }
}

/// Flat gradient with respect to the model parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrad {
    pub values: Vec<f64>,
}

impl ParamGrad {
    pub fn zeros(n: usize) -> Self {
        ParamGrad {
            values: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `self += other`, used by gradient accumulation.
    pub fn accumulate(&mut self, other: &ParamGrad) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for a in &mut self.values {
            *a *= c;
        }
    }

    /// Largest relative deviation from `other`, with an absolute floor for
    /// near-zero entries. Used by the finite-difference cross-checks.
    pub fn max_relative_error(&self, other: &ParamGrad, abs_floor: f64) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs() / (a.abs().max(b.abs()).max(abs_floor)))
            .fold(0.0, f64::max)
    }
}
