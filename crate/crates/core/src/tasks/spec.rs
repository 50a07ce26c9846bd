//! Synthetic conditional data distributions.

use crate::error::{CoreError, Result};
use crate::flowcore::{AffineGaussianTask, Condition, StateVec};
use rand::Rng;
use rand_distr::StandardNormal;

/// One diagonal-covariance Gaussian mixture component.
#[derive(Debug, Clone)]
pub struct GaussianComponent {
    pub mean: Vec<f64>,
    pub var_diag: Vec<f64>,
}

/// Per-condition Gaussian mixture; weights sum to 1.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub components: Vec<GaussianComponent>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, components: Vec<GaussianComponent>) -> Result<Self> {
        if weights.len() != components.len() || components.is_empty() {
            return Err(CoreError::invalid("one weight per mixture component"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || weights.iter().any(|&w| w < 0.0) {
            return Err(CoreError::invalid("mixture weights must be a distribution"));
        }
        let d = components[0].mean.len();
        for comp in &components {
            if comp.mean.len() != d || comp.var_diag.len() != d {
                return Err(CoreError::invalid("mixture components must share dimension"));
            }
            if comp.var_diag.iter().any(|&v| v <= 0.0) {
                return Err(CoreError::invalid("component variances must be positive"));
            }
        }
        Ok(GaussianMixture {
            weights,
            components,
        })
    }

    pub fn dim(&self) -> usize {
        self.components[0].mean.len()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> StateVec {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut idx = self.components.len() - 1;
        for (k, &w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                idx = k;
                break;
            }
        }
        let comp = &self.components[idx];
        StateVec(
            comp.mean
                .iter()
                .zip(&comp.var_diag)
                .map(|(&m, &v)| m + v.sqrt() * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        )
    }

    /// Closed-form mean and covariance of the mixture.
    fn moments(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let d = self.dim();
        let mut mean = vec![0.0; d];
        for (w, comp) in self.weights.iter().zip(&self.components) {
            for i in 0..d {
                mean[i] += w * comp.mean[i];
            }
        }
        let mut cov = vec![vec![0.0; d]; d];
        for (w, comp) in self.weights.iter().zip(&self.components) {
            for i in 0..d {
                for j in 0..d {
                    let second = comp.mean[i] * comp.mean[j]
                        + if i == j { comp.var_diag[i] } else { 0.0 };
                    cov[i][j] += w * second;
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                cov[i][j] -= mean[i] * mean[j];
            }
        }
        (mean, cov)
    }
}

/// 2-D checkerboard: uniform over the parity cells of a square grid. Included
/// as a harder optional benchmark only.
#[derive(Debug, Clone)]
pub struct Checkerboard {
    pub cells_per_side: usize,
    pub extent: f64,
}

impl Checkerboard {
    fn cell_centers(&self) -> Vec<(f64, f64)> {
        let n = self.cells_per_side;
        let size = 2.0 * self.extent / n as f64;
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if (i + j) % 2 == 0 {
                    out.push((
                        -self.extent + (i as f64 + 0.5) * size,
                        -self.extent + (j as f64 + 0.5) * size,
                    ));
                }
            }
        }
        out
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> StateVec {
        let centers = self.cell_centers();
        let size = 2.0 * self.extent / self.cells_per_side as f64;
        let (cx, cy) = centers[rng.random_range(0..centers.len())];
        StateVec(vec![
            cx + size * (rng.random::<f64>() - 0.5),
            cy + size * (rng.random::<f64>() - 0.5),
        ])
    }

    fn moments(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let centers = self.cell_centers();
        let n = centers.len() as f64;
        let size = 2.0 * self.extent / self.cells_per_side as f64;
        let mean = (
            centers.iter().map(|c| c.0).sum::<f64>() / n,
            centers.iter().map(|c| c.1).sum::<f64>() / n,
        );
        let within = size * size / 12.0;
        let mut cov = vec![vec![0.0; 2]; 2];
        for (cx, cy) in &centers {
            cov[0][0] += (cx - mean.0) * (cx - mean.0) / n;
            cov[0][1] += (cx - mean.0) * (cy - mean.1) / n;
            cov[1][1] += (cy - mean.1) * (cy - mean.1) / n;
        }
        cov[1][0] = cov[0][1];
        cov[0][0] += within;
        cov[1][1] += within;
        (vec![mean.0, mean.1], cov)
    }
}

/// A conditional synthetic task: one data distribution per condition label.
#[derive(Debug, Clone)]
pub enum TaskSpec {
    AffineGaussian { tasks: Vec<AffineGaussianTask> },
    Mixture { mixtures: Vec<GaussianMixture> },
    Checkerboard { boards: Vec<Checkerboard> },
}

impl TaskSpec {
    pub fn cond_count(&self) -> usize {
        match self {
            TaskSpec::AffineGaussian { tasks } => tasks.len(),
            TaskSpec::Mixture { mixtures } => mixtures.len(),
            TaskSpec::Checkerboard { boards } => boards.len(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TaskSpec::AffineGaussian { tasks } => tasks[0].dim(),
            TaskSpec::Mixture { mixtures } => mixtures[0].dim(),
            TaskSpec::Checkerboard { .. } => 2,
        }
    }

    /// Standard-normal data, `conds` identical conditions.
    pub fn standard_affine(dim: usize, conds: usize) -> Self {
        TaskSpec::AffineGaussian {
            tasks: (0..conds).map(|_| AffineGaussianTask::standard(dim)).collect(),
        }
    }

    /// The default two-mode benchmark: condition `c` places modes at
    /// `+-mode_c` with equal weights, where mode_0 = (dist, 0),
    /// mode_1 = (0, dist), alternating axes for further conditions.
    pub fn default_bimodal(cond_count: usize, mode_distance: f64, comp_std: f64) -> Result<Self> {
        let mixtures = (0..cond_count)
            .map(|c| {
                let axis = c % 2;
                let mut m = vec![0.0, 0.0];
                m[axis] = mode_distance;
                let var = comp_std * comp_std;
                GaussianMixture::new(
                    vec![0.5, 0.5],
                    vec![
                        GaussianComponent {
                            mean: m.clone(),
                            var_diag: vec![var, var],
                        },
                        GaussianComponent {
                            mean: m.iter().map(|v| -v).collect(),
                            var_diag: vec![var, var],
                        },
                    ],
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TaskSpec::Mixture { mixtures })
    }

    pub fn checkerboard_default(cond_count: usize) -> Self {
        TaskSpec::Checkerboard {
            boards: (0..cond_count)
                .map(|_| Checkerboard {
                    cells_per_side: 4,
                    extent: 2.0,
                })
                .collect(),
        }
    }

    fn check_condition(&self, c: Condition) -> Result<()> {
        if c.0 >= self.cond_count() {
            return Err(CoreError::invalid(format!(
                "condition {} out of range [0, {})",
                c.0,
                self.cond_count()
            )));
        }
        Ok(())
    }

    /// Draw one data point from the condition's distribution.
    pub fn sample_data<R: Rng + ?Sized>(&self, c: Condition, rng: &mut R) -> Result<StateVec> {
        self.check_condition(c)?;
        Ok(match self {
            TaskSpec::AffineGaussian { tasks } => tasks[c.0].sample_x0(rng),
            TaskSpec::Mixture { mixtures } => mixtures[c.0].sample(rng),
            TaskSpec::Checkerboard { boards } => boards[c.0].sample(rng),
        })
    }

    /// Closed-form data mean and covariance of the condition's distribution.
    pub fn data_moments(&self, c: Condition) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        self.check_condition(c)?;
        Ok(match self {
            TaskSpec::AffineGaussian { tasks } => (tasks[c.0].mean(), tasks[c.0].cov_rows()),
            TaskSpec::Mixture { mixtures } => mixtures[c.0].moments(),
            TaskSpec::Checkerboard { boards } => boards[c.0].moments(),
        })
    }

    /// A natural reward target for the condition: the first mixture mode, the
    /// Gaussian mean, or the first checkerboard cell center.
    pub fn suggested_target(&self, c: Condition) -> Result<Vec<f64>> {
        self.check_condition(c)?;
        Ok(match self {
            TaskSpec::AffineGaussian { tasks } => tasks[c.0].mean(),
            TaskSpec::Mixture { mixtures } => mixtures[c.0].components[0].mean.clone(),
            TaskSpec::Checkerboard { boards } => {
                let (x, y) = boards[c.0].cell_centers()[0];
                vec![x, y]
            }
        })
    }
}
