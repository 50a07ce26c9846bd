//! Run configuration: a flat TOML file with one section per subsystem.
//! Parse -> serialize -> parse is the identity on every field.

use anyhow::{bail, Context, Result};
use mixgrpo_core::samplers::StepKind;
use mixgrpo_core::scheduler::{IntervalSchedule, Strategy};
use mixgrpo_core::tasks::{RewardSpec, TaskSpec};
use mixgrpo_core::{Architecture, Condition, StateVec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    #[serde(default)]
    pub task: TaskSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub scheduler: SchedulerSection,
    #[serde(default)]
    pub grpo: GrpoSection,
    #[serde(default)]
    pub flash: FlashSection,
    #[serde(default)]
    pub pretrain: PretrainSection,
    #[serde(default)]
    pub rewards: RewardsSection,
    #[serde(default)]
    pub eval: EvalSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
}

fn default_out_dir() -> String {
    "runs/out".to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    AffineGaussian,
    Bimodal,
    Checkerboard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    pub kind: TaskKind,
    pub dim: usize,
    pub cond_count: usize,
    /// Bimodal: distance of each mode pair from the origin.
    pub mode_distance: f64,
    /// Bimodal: per-component standard deviation.
    pub comp_std: f64,
}

impl Default for TaskSection {
    fn default() -> Self {
        TaskSection {
            kind: TaskKind::Bimodal,
            dim: 2,
            cond_count: 1,
            mode_distance: 2.0,
            comp_std: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub hidden: Vec<usize>,
    pub embed_dim: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            hidden: vec![64, 64, 64],
            embed_dim: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub steps: usize,
    pub shift: f64,
    pub eta: f64,
    pub t_min: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            steps: 25,
            shift: 3.0,
            eta: 0.7,
            t_min: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerSection {
    pub strategy: Strategy,
    pub schedule: IntervalSchedule,
    pub window: usize,
    pub tau0: f64,
    pub decay_k: f64,
    pub lambda_thr: f64,
    pub stride: usize,
    pub random_respect_tau: bool,
}

impl Default for SchedulerSection {
    fn default() -> Self {
        SchedulerSection {
            strategy: Strategy::Progressive,
            schedule: IntervalSchedule::Constant,
            window: 4,
            tau0: 25.0,
            decay_k: 0.1,
            lambda_thr: 13.0,
            stride: 1,
            random_respect_tau: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrpoSection {
    pub group_size: usize,
    pub clip_epsilon: f64,
    pub advantage_clip: f64,
    pub accumulation_chunks: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub iterations: usize,
    pub fused_window_update: bool,
}

impl Default for GrpoSection {
    fn default() -> Self {
        GrpoSection {
            group_size: 12,
            clip_epsilon: 1e-4,
            advantage_clip: 5.0,
            accumulation_chunks: 3,
            // full-scale reference value; desk-scale runs use larger rates
            learning_rate: 1e-5,
            weight_decay: 1e-4,
            iterations: 300,
            fused_window_update: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Dpm1,
    Dpm2Midpoint,
    Dpm2Heun,
    Dpm3,
}

impl SolverKind {
    pub fn step_kind(self) -> StepKind {
        match self {
            SolverKind::Dpm1 => StepKind::OdeDpm1,
            SolverKind::Dpm2Midpoint => StepKind::OdeDpm2Midpoint,
            SolverKind::Dpm2Heun => StepKind::OdeDpm2Heun,
            SolverKind::Dpm3 => StepKind::OdeDpm3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlashSection {
    /// Compression rate for the post-window region, in (0, 1].
    pub compression: f64,
    pub solver: SolverKind,
}

impl Default for FlashSection {
    fn default() -> Self {
        FlashSection {
            // post-window count 4 at T=25, w=4
            compression: 4.0 / 21.0,
            solver: SolverKind::Dpm2Midpoint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainSection {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
}

impl Default for PretrainSection {
    fn default() -> Self {
        PretrainSection {
            steps: 3000,
            batch_size: 128,
            learning_rate: 1e-3,
            weight_decay: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardsSection {
    /// Temperatures of the proximity rewards (K = len).
    pub temperatures: Vec<f64>,
    /// Per-reward offset added to the task's suggested target along `offset_axis`.
    pub offsets: Vec<f64>,
    pub offset_axis: usize,
    pub weights: Vec<f64>,
}

impl Default for RewardsSection {
    fn default() -> Self {
        RewardsSection {
            temperatures: vec![0.5, 1.0, 2.0, 4.0],
            offsets: vec![0.0, 0.0, 0.2, -0.2],
            offset_axis: 0,
            weights: vec![1.0, 1.0, 1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub p_mix: Vec<f64>,
    pub group_size: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            p_mix: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            group_size: 64,
        }
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).context("invalid config")?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialized form (after any overrides).
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml().as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Field-labelled validation against every module's preconditions; runs
    /// before any command starts.
    pub fn validate(&self) -> Result<()> {
        if self.task.dim == 0 {
            bail!("task.dim must be positive");
        }
        if self.task.cond_count == 0 {
            bail!("task.cond_count must be positive");
        }
        if self.task.kind == TaskKind::Checkerboard && self.task.dim != 2 {
            bail!("task.dim must be 2 for the checkerboard task");
        }
        if !(self.task.comp_std > 0.0) {
            bail!("task.comp_std must be positive");
        }
        self.build_grid().context("grid section")?;
        self.build_window_state().context("scheduler section")?;
        self.build_grpo().validate().map_err(anyhow::Error::from).context("grpo section")?;
        if !(self.flash.compression > 0.0 && self.flash.compression <= 1.0) {
            bail!("flash.compression must lie in (0, 1]");
        }
        if self.rewards.temperatures.is_empty() {
            bail!("rewards.temperatures must not be empty");
        }
        if self.rewards.temperatures.len() != self.rewards.offsets.len()
            || self.rewards.temperatures.len() != self.rewards.weights.len()
        {
            bail!("rewards.temperatures, rewards.offsets and rewards.weights must have one entry per reward");
        }
        if self.rewards.offset_axis >= self.task.dim {
            bail!("rewards.offset_axis out of range for task.dim");
        }
        if self.rewards.temperatures.iter().any(|&t| t <= 0.0) {
            bail!("rewards.temperatures must be positive");
        }
        if self.eval.group_size < 2 {
            bail!("eval.group_size must be >= 2");
        }
        if self.eval.p_mix.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            bail!("eval.p_mix entries must lie in [0, 1]");
        }
        if self.pretrain.batch_size == 0 {
            bail!("pretrain.batch_size must be positive");
        }
        Ok(())
    }

    pub fn build_task(&self) -> Result<TaskSpec> {
        Ok(match self.task.kind {
            TaskKind::AffineGaussian => {
                TaskSpec::standard_affine(self.task.dim, self.task.cond_count)
            }
            TaskKind::Bimodal => TaskSpec::default_bimodal(
                self.task.cond_count,
                self.task.mode_distance,
                self.task.comp_std,
            )?,
            TaskKind::Checkerboard => TaskSpec::checkerboard_default(self.task.cond_count),
        })
    }

    pub fn build_rewards(&self, task: &TaskSpec) -> Result<Vec<RewardSpec>> {
        let conds = task.cond_count();
        self.rewards
            .temperatures
            .iter()
            .zip(&self.rewards.offsets)
            .zip(&self.rewards.weights)
            .map(|((&temp, &offset), &weight)| {
                let targets = (0..conds)
                    .map(|c| {
                        let mut t = task.suggested_target(Condition(c))?;
                        t[self.rewards.offset_axis] += offset;
                        Ok(StateVec(t))
                    })
                    .collect::<mixgrpo_core::Result<Vec<_>>>()?;
                Ok(RewardSpec::mode_proximity(targets, temp)?.with_weight(weight))
            })
            .collect()
    }

    pub fn build_grid(&self) -> Result<mixgrpo_core::TimeGrid> {
        Ok(mixgrpo_core::TimeGrid::new(
            self.grid.steps,
            self.grid.shift,
            self.grid.eta,
            self.grid.t_min,
        )?)
    }

    pub fn build_window_state(&self) -> Result<mixgrpo_core::WindowState> {
        let mut ws = mixgrpo_core::WindowState::new(
            self.grid.steps,
            self.scheduler.window,
            self.scheduler.strategy,
            self.scheduler.schedule,
            self.scheduler.tau0,
            self.scheduler.decay_k,
            self.scheduler.lambda_thr,
            self.scheduler.stride,
        )?;
        ws.random_respect_tau = self.scheduler.random_respect_tau;
        Ok(ws)
    }

    pub fn build_grpo(&self) -> mixgrpo_core::grpo::GrpoConfig {
        mixgrpo_core::grpo::GrpoConfig {
            group_size: self.grpo.group_size,
            clip_epsilon: self.grpo.clip_epsilon,
            advantage_clip: self.grpo.advantage_clip,
            accumulation_chunks: self.grpo.accumulation_chunks,
            learning_rate: self.grpo.learning_rate,
            weight_decay: self.grpo.weight_decay,
            iterations: self.grpo.iterations,
            reward_weights: Some(self.rewards.weights.clone()),
            fused_window_update: self.grpo.fused_window_update,
            sde_all_steps: false,
        }
    }

    pub fn build_arch(&self) -> Architecture {
        Architecture {
            dim: self.task.dim,
            cond_count: self.task.cond_count,
            embed_dim: self.model.embed_dim,
            hidden: self.model.hidden.clone(),
            activation: mixgrpo_core::flowcore::Activation::Tanh,
        }
    }
}
