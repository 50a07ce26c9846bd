//! Velocity-field models: the trainable MLP and the closed-form
//! affine-Gaussian oracle used as an analytic test bed.

use super::mlp::{self, Architecture, ForwardCache, Layout};
use super::state::{Condition, ParamGrad, StateVec};
use crate::error::{CoreError, Result};
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Gaussian data distribution `x0 ~ N(mean, cov)` interpolated against unit
/// noise. Every marginal of the rectified-flow path is Gaussian, so the
/// velocity, score and moments all have closed forms — the analytic ground
/// truth behind the sampler and marginal-equivalence tests.
#[derive(Debug, Clone)]
pub struct AffineGaussianTask {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: Cholesky<f64, nalgebra::Dyn>,
}

impl AffineGaussianTask {
    /// `cov` must be symmetric positive-definite.
    pub fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d || cov.iter().any(|row| row.len() != d) {
            return Err(CoreError::invalid("covariance shape must match mean"));
        }
        let mat = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
        for i in 0..d {
            for j in 0..d {
                if (mat[(i, j)] - mat[(j, i)]).abs() > 1e-12 {
                    return Err(CoreError::invalid("covariance must be symmetric"));
                }
            }
        }
        let chol = Cholesky::new(mat.clone())
            .ok_or_else(|| CoreError::invalid("covariance must be positive-definite"))?;
        Ok(AffineGaussianTask {
            mean: DVector::from_vec(mean),
            cov: mat,
            chol,
        })
    }

    /// Isotropic task `N(mean, var * I)`.
    pub fn isotropic(mean: Vec<f64>, var: f64) -> Result<Self> {
        let d = mean.len();
        let cov = (0..d)
            .map(|i| (0..d).map(|j| if i == j { var } else { 0.0 }).collect())
            .collect();
        Self::new(mean, cov)
    }

    /// Standard normal data in `dim` dimensions.
    pub fn standard(dim: usize) -> Self {
        Self::isotropic(vec![0.0; dim], 1.0).expect("unit covariance is PD")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> Vec<f64> {
        self.mean.iter().copied().collect()
    }

    pub fn cov_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.cov[(i, j)]).collect())
            .collect()
    }

    /// Mean and covariance of the path marginal at time `t`:
    /// `x_t = (1-t) x0 + t eps` gives `N((1-t) mean, (1-t)^2 cov + t^2 I)`.
    pub fn marginal_moments(&self, t: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
        let d = self.dim();
        let mean = self.mean.scale(1.0 - t);
        let mut cov = self.cov.scale((1.0 - t) * (1.0 - t));
        for i in 0..d {
            cov[(i, i)] += t * t;
        }
        (
            mean.iter().copied().collect(),
            (0..d).map(|i| (0..d).map(|j| cov[(i, j)]).collect()).collect(),
        )
    }

    fn m_t(&self, t: f64) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = self.cov.scale((1.0 - t) * (1.0 - t));
        for i in 0..d {
            m[(i, i)] += t * t;
        }
        m
    }

    /// Exact conditional expectation `E[x1 - x0 | x_t = x]`: the rectified-flow
    /// velocity of this task. Affine in `x`.
    pub fn velocity(&self, x: &StateVec, t: f64) -> StateVec {
        let xv = DVector::from_column_slice(x.as_slice());
        let centered = &xv - self.mean.scale(1.0 - t);
        let m = self.m_t(t);
        let sol = m
            .lu()
            .solve(&centered)
            .expect("marginal covariance is PD for t in (0,1]");
        // Cov(x1 - x0, x_t) = t I - (1-t) cov
        let mut gain = self.cov.scale(-(1.0 - t));
        for i in 0..self.dim() {
            gain[(i, i)] += t;
        }
        let v = gain * sol - &self.mean;
        StateVec(v.iter().copied().collect())
    }

    /// Score of the marginal at `t`: `-M_t^{-1} (x - (1-t) mean)`.
    pub fn marginal_score(&self, x: &StateVec, t: f64) -> StateVec {
        let xv = DVector::from_column_slice(x.as_slice());
        let centered = &xv - self.mean.scale(1.0 - t);
        let sol = self
            .m_t(t)
            .lu()
            .solve(&centered)
            .expect("marginal covariance is PD");
        StateVec(sol.iter().map(|v| -v).collect())
    }

    /// Draw a data point `x0 ~ N(mean, cov)`.
    pub fn sample_x0<R: Rng + ?Sized>(&self, rng: &mut R) -> StateVec {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &self.mean + self.chol.l() * z;
        StateVec(x.iter().copied().collect())
    }
}

#[derive(Debug, Clone)]
enum Variant {
    Trainable {
        arch: Architecture,
        layout: Layout,
        params: Vec<f64>,
    },
    /// One analytic task per condition label.
    Oracle { tasks: Vec<AffineGaussianTask> },
}

/// The velocity field `v_theta(x, t, c)`: either a trainable network or the
/// zero-parameter affine-Gaussian oracle.
#[derive(Debug, Clone)]
pub struct VelocityModel {
    variant: Variant,
}

impl VelocityModel {
    /// Trainable network with seeded random initialization.
    pub fn trainable<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Self {
        let layout = arch.layout();
        let params = mlp::init_params(&arch, rng);
        VelocityModel {
            variant: Variant::Trainable {
                arch,
                layout,
                params,
            },
        }
    }

    /// Trainable network with every parameter zero (outputs the zero field).
    pub fn trainable_zeroed(arch: Architecture) -> Self {
        let layout = arch.layout();
        let params = vec![0.0; layout.total];
        VelocityModel {
            variant: Variant::Trainable {
                arch,
                layout,
                params,
            },
        }
    }

    /// Analytic oracle; `tasks[c]` is the data distribution of condition `c`.
    pub fn oracle(tasks: Vec<AffineGaussianTask>) -> Result<Self> {
        if tasks.is_empty() {
            return Err(CoreError::invalid("oracle needs at least one task"));
        }
        let d = tasks[0].dim();
        if tasks.iter().any(|t| t.dim() != d) {
            return Err(CoreError::invalid("oracle tasks must share one dimension"));
        }
        Ok(VelocityModel {
            variant: Variant::Oracle { tasks },
        })
    }

    pub fn is_trainable(&self) -> bool {
        matches!(self.variant, Variant::Trainable { .. })
    }

    pub fn dim(&self) -> usize {
        match &self.variant {
            Variant::Trainable { arch, .. } => arch.dim,
            Variant::Oracle { tasks } => tasks[0].dim(),
        }
    }

    pub fn cond_count(&self) -> usize {
        match &self.variant {
            Variant::Trainable { arch, .. } => arch.cond_count,
            Variant::Oracle { tasks } => tasks.len(),
        }
    }

    pub fn arch(&self) -> Option<&Architecture> {
        match &self.variant {
            Variant::Trainable { arch, .. } => Some(arch),
            Variant::Oracle { .. } => None,
        }
    }

    pub fn oracle_tasks(&self) -> Option<&[AffineGaussianTask]> {
        match &self.variant {
            Variant::Oracle { tasks } => Some(tasks),
            Variant::Trainable { .. } => None,
        }
    }

    /// Zero for the oracle variant (it has no trainable parameters).
    pub fn param_count(&self) -> usize {
        match &self.variant {
            Variant::Trainable { layout, .. } => layout.total,
            Variant::Oracle { .. } => 0,
        }
    }

    pub fn params(&self) -> &[f64] {
        match &self.variant {
            Variant::Trainable { params, .. } => params,
            Variant::Oracle { .. } => &[],
        }
    }

    pub fn params_mut(&mut self) -> Result<&mut [f64]> {
        match &mut self.variant {
            Variant::Trainable { params, .. } => Ok(params),
            Variant::Oracle { .. } => Err(CoreError::NotTrainable),
        }
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        let p = self.params_mut()?;
        if p.len() != values.len() {
            return Err(CoreError::invalid(format!(
                "parameter count mismatch: model has {}, got {}",
                p.len(),
                values.len()
            )));
        }
        p.copy_from_slice(values);
        Ok(())
    }

    /// Copy parameters from a structurally identical model (the old-policy
    /// snapshot in GRPO training).
    pub fn copy_params_from(&mut self, other: &VelocityModel) -> Result<()> {
        let src = other.params().to_vec();
        self.set_params(&src)
    }

    fn check_inputs(&self, x: &StateVec, t: f64, c: Condition) -> Result<()> {
        x.check_finite("velocity input x")?;
        if !t.is_finite() || t <= 0.0 || t > 1.0 {
            return Err(CoreError::invalid(format!(
                "time t must lie in (0, 1], got {t}"
            )));
        }
        if x.dim() != self.dim() {
            return Err(CoreError::invalid(format!(
                "state dimension {} does not match model dimension {}",
                x.dim(),
                self.dim()
            )));
        }
        if c.0 >= self.cond_count() {
            return Err(CoreError::invalid(format!(
                "condition label {} out of range [0, {})",
                c.0,
                self.cond_count()
            )));
        }
        Ok(())
    }

    /// Evaluate `v_theta(x, t, c)`.
    pub fn velocity(&self, x: &StateVec, t: f64, c: Condition) -> Result<StateVec> {
        self.check_inputs(x, t, c)?;
        match &self.variant {
            Variant::Trainable {
                arch,
                layout,
                params,
            } => {
                let (v, _) = mlp::forward(arch, layout, params, x.as_slice(), t, c);
                Ok(StateVec(v))
            }
            Variant::Oracle { tasks } => Ok(tasks[c.0].velocity(x, t)),
        }
    }

    /// Forward pass keeping the activations needed for [`Self::backprop`].
    pub(crate) fn forward_cached(
        &self,
        x: &StateVec,
        t: f64,
        c: Condition,
    ) -> Result<(StateVec, ForwardCache)> {
        self.check_inputs(x, t, c)?;
        match &self.variant {
            Variant::Trainable {
                arch,
                layout,
                params,
            } => {
                let (v, cache) = mlp::forward(arch, layout, params, x.as_slice(), t, c);
                Ok((StateVec(v), cache))
            }
            Variant::Oracle { .. } => Err(CoreError::NotTrainable),
        }
    }

    /// Accumulate the parameter gradient of `cotangent . v_theta` into `grad`.
    pub(crate) fn backprop(&self, cache: &ForwardCache, cotangent: &[f64], grad: &mut ParamGrad) {
        match &self.variant {
            Variant::Trainable {
                arch,
                layout,
                params,
            } => mlp::backward(arch, layout, params, cache, cotangent, &mut grad.values),
            Variant::Oracle { .. } => unreachable!("no cache can exist for the oracle"),
        }
    }
}
