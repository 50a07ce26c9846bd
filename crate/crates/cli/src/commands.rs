//! Command implementations behind the CLI surface.

use crate::config::{RunConfig, SolverKind};
use crate::manifest::RunManifest;
use anyhow::{bail, Context, Result};
use mixgrpo_core::flowcore::{load_checkpoint, save_checkpoint};
use mixgrpo_core::grpo::{train_iteration, FlashSettings, NfeLedger};
use mixgrpo_core::scheduler::{FlashVariant, Strategy, TraceRow};
use mixgrpo_core::tasks::{eval_suite, pretrain, PretrainConfig};
use mixgrpo_core::{Condition, Optimizer, VelocityModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};

/// Training variants selectable on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Variant {
    /// Sliding-window mixed sampling.
    Mix,
    /// Progressive window with a compressed post-window region.
    Flash,
    /// Frozen window at the start with a compressed post-window region.
    FlashStar,
    /// All-step stochastic sampling, optimizing only the window steps.
    DanceBaseline,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Mix => write!(f, "mix"),
            Variant::Flash => write!(f, "flash"),
            Variant::FlashStar => write!(f, "flash-star"),
            Variant::DanceBaseline => write!(f, "dance-baseline"),
        }
    }
}

/// Ablation axes mirroring the study tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AblationAxis {
    Strategy,
    Tau,
    W,
    Stride,
    Order,
    Nfe,
}

impl fmt::Display for AblationAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AblationAxis::Strategy => write!(f, "strategy"),
            AblationAxis::Tau => write!(f, "tau"),
            AblationAxis::W => write!(f, "w"),
            AblationAxis::Stride => write!(f, "stride"),
            AblationAxis::Order => write!(f, "order"),
            AblationAxis::Nfe => write!(f, "nfe"),
        }
    }
}

#[derive(Debug)]
pub struct PretrainOutputs {
    pub checkpoint: PathBuf,
    pub loss_curve: PathBuf,
}

/// Pretrain the base model: writes `checkpoint.json`, `loss_curve.csv` and a
/// manifest under `<out>/pretrain/`.
pub fn cmd_pretrain(config: &RunConfig) -> Result<PretrainOutputs> {
    let dir = Path::new(&config.run.out_dir).join("pretrain");
    let manifest = RunManifest::start(&dir, "pretrain", &config.hash())?;
    let task = config.build_task()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.run.seed);
    let mut model = VelocityModel::trainable(config.build_arch(), &mut rng);
    let curve = pretrain(
        &mut model,
        &task,
        &PretrainConfig {
            steps: config.pretrain.steps,
            batch_size: config.pretrain.batch_size,
            learning_rate: config.pretrain.learning_rate,
            weight_decay: config.pretrain.weight_decay,
        },
        &mut rng,
    )?;
    let ckpt = dir.join("checkpoint.json");
    save_checkpoint(&ckpt, &model, config.run.seed)?;
    let curve_path = dir.join("loss_curve.csv");
    {
        let mut f = std::fs::File::create(&curve_path)?;
        writeln!(f, "step,loss")?;
        for (i, loss) in curve.iter().enumerate() {
            writeln!(f, "{i},{loss}")?;
        }
    }
    manifest.finalize(
        &dir,
        vec!["checkpoint.json".into(), "loss_curve.csv".into()],
    )?;
    Ok(PretrainOutputs {
        checkpoint: ckpt,
        loss_curve: curve_path,
    })
}

#[derive(Debug)]
pub struct TrainOutputs {
    pub dir: PathBuf,
    pub metrics: PathBuf,
    pub final_checkpoint: PathBuf,
    pub mean_nfe_old: f64,
    pub mean_iter_secs: f64,
}

/// Run `iterations` of GRPO post-training from a pretrained checkpoint.
/// Writes `metrics.jsonl`, `trace.csv`, `ledger.csv`, periodic checkpoints
/// and a manifest under `<out>/train-<variant>/`.
pub fn cmd_train(config: &RunConfig, variant: Variant, checkpoint: &Path) -> Result<TrainOutputs> {
    let dir = Path::new(&config.run.out_dir).join(format!("train-{variant}"));
    let manifest = RunManifest::start(&dir, &format!("train --variant {variant}"), &config.hash())?;
    let (mut model, _seed) = load_checkpoint(checkpoint)
        .with_context(|| format!("cannot load checkpoint {}", checkpoint.display()))?;
    let expected = config.build_arch();
    match model.arch() {
        Some(arch) if *arch == expected => {}
        Some(arch) => bail!(
            "checkpoint/config mismatch: checkpoint architecture {:?} differs from config {:?}",
            arch,
            expected
        ),
        None => bail!("checkpoint/config mismatch: the analytic oracle is not trainable"),
    }
    let task = config.build_task()?;
    let rewards = config.build_rewards(&task)?;
    let grid = config.build_grid()?;
    let mut window_state = config.build_window_state()?;
    let mut grpo_config = config.build_grpo();
    let flash = match variant {
        Variant::Mix => None,
        Variant::Flash => Some(FlashSettings {
            variant: FlashVariant::Flash,
            compression: config.flash.compression,
            solver: config.flash.solver.step_kind(),
        }),
        Variant::FlashStar => {
            window_state.strategy = Strategy::Frozen;
            Some(FlashSettings {
                variant: FlashVariant::FlashStar,
                compression: config.flash.compression,
                solver: config.flash.solver.step_kind(),
            })
        }
        Variant::DanceBaseline => {
            grpo_config.sde_all_steps = true;
            None
        }
    };
    let conditions: Vec<Condition> = (0..task.cond_count()).map(Condition).collect();
    let mut old_model = model.clone();
    let mut optimizer = Optimizer::adamw(
        grpo_config.learning_rate,
        grpo_config.weight_decay,
        model.param_count(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.run.seed);
    rng.set_stream(1);
    let mut ledger = NfeLedger::new();
    let mut trace: Vec<TraceRow> = Vec::with_capacity(grpo_config.iterations);
    let metrics_path = dir.join("metrics.jsonl");
    let mut metrics_file = std::fs::File::create(&metrics_path)?;
    let ckpt_every = (grpo_config.iterations / 5).max(1);
    let mut artifacts: Vec<String> = vec![
        "metrics.jsonl".into(),
        "trace.csv".into(),
        "ledger.csv".into(),
        "checkpoint_final.json".into(),
    ];
    for m in 1..=grpo_config.iterations {
        let metrics = train_iteration(
            m,
            &mut window_state,
            &mut model,
            &mut old_model,
            &conditions,
            &rewards,
            &grid,
            &grpo_config,
            flash,
            &mut optimizer,
            &mut rng,
            &mut ledger,
        )?;
        writeln!(metrics_file, "{}", serde_json::to_string(&metrics)?)?;
        trace.push(TraceRow {
            m,
            strategy: window_state.strategy,
            l: window_state.l,
            tau: window_state.tau,
            window_start: metrics.window_start,
            window_len: metrics.window_len,
            effective_steps: metrics.nfe_old,
        });
        if m % ckpt_every == 0 && m < grpo_config.iterations {
            let name = format!("checkpoint_iter_{m}.json");
            save_checkpoint(&dir.join(&name), &model, config.run.seed)?;
            artifacts.push(name);
        }
    }
    save_checkpoint(&dir.join("checkpoint_final.json"), &model, config.run.seed)?;
    {
        let mut f = std::fs::File::create(dir.join("trace.csv"))?;
        mixgrpo_core::scheduler::write_trace_csv(&trace, &mut f)?;
    }
    {
        let mut f = std::fs::File::create(dir.join("ledger.csv"))?;
        ledger.write_csv(&mut f)?;
    }
    let mean_iter_secs = ledger
        .rows()
        .iter()
        .map(|r| r.wall_secs)
        .sum::<f64>()
        / ledger.rows().len().max(1) as f64;
    let mean_nfe_old = ledger.mean_nfe_old();
    manifest.finalize(&dir, artifacts)?;
    Ok(TrainOutputs {
        metrics: metrics_path,
        final_checkpoint: dir.join("checkpoint_final.json"),
        dir,
        mean_nfe_old,
        mean_iter_secs,
    })
}

#[derive(Debug)]
pub struct EvalOutputs {
    pub report: PathBuf,
    pub sweep: PathBuf,
}

/// Hybrid-inference evaluation of a trained checkpoint against the base
/// checkpoint. Writes `report.txt`, `sweep.csv` and a manifest under
/// `<out>/eval/`.
pub fn cmd_eval(config: &RunConfig, trained_ckpt: &Path, base_ckpt: &Path) -> Result<EvalOutputs> {
    let dir = Path::new(&config.run.out_dir).join("eval");
    let manifest = RunManifest::start(&dir, "eval", &config.hash())?;
    let (trained, _) = load_checkpoint(trained_ckpt)?;
    let (base, _) = load_checkpoint(base_ckpt)?;
    let task = config.build_task()?;
    let rewards = config.build_rewards(&task)?;
    let grid = config.build_grid()?;
    let report = eval_suite(
        &trained,
        &base,
        &task,
        &rewards,
        &grid,
        &config.eval.p_mix,
        config.eval.group_size,
        config.run.seed,
        &config.hash(),
    )?;
    let report_path = dir.join("report.txt");
    {
        let mut f = std::fs::File::create(&report_path)?;
        report.write_text(&mut f)?;
    }
    let sweep_path = dir.join("sweep.csv");
    {
        let mut f = std::fs::File::create(&sweep_path)?;
        report.write_sweep_csv(&mut f)?;
    }
    manifest.finalize(&dir, vec!["report.txt".into(), "sweep.csv".into()])?;
    Ok(EvalOutputs {
        report: report_path,
        sweep: sweep_path,
    })
}

#[derive(Debug, Serialize)]
struct AblationRow {
    label: String,
    reward_means: Vec<f64>,
    weighted: f64,
    nfe_old: f64,
    nfe_new: usize,
    mean_iter_secs: f64,
}

/// Train-and-evaluate one configuration for an ablation row, at a reduced
/// iteration budget, in its own subdirectory.
fn ablation_row(
    base_config: &RunConfig,
    variant: Variant,
    label: &str,
    checkpoint: &Path,
    mutate: impl FnOnce(&mut RunConfig),
) -> Result<AblationRow> {
    let mut cfg = base_config.clone();
    cfg.grpo.iterations = (base_config.grpo.iterations / 3).max(1);
    let safe_label: String = label
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { '-' })
        .collect();
    cfg.run.out_dir = format!("{}/ablate-rows/{safe_label}", base_config.run.out_dir);
    mutate(&mut cfg);
    cfg.validate()?;
    let train = cmd_train(&cfg, variant, checkpoint)?;
    // score the trained model against the base checkpoint
    let mut eval_cfg = cfg.clone();
    eval_cfg.eval.p_mix = vec![1.0];
    eval_cfg.eval.group_size = base_config.eval.group_size.max(16);
    let (trained, _) = load_checkpoint(&train.final_checkpoint)?;
    let (base, _) = load_checkpoint(checkpoint)?;
    let task = eval_cfg.build_task()?;
    let rewards = eval_cfg.build_rewards(&task)?;
    let grid = eval_cfg.build_grid()?;
    let report = eval_suite(
        &trained,
        &base,
        &task,
        &rewards,
        &grid,
        &eval_cfg.eval.p_mix,
        eval_cfg.eval.group_size,
        eval_cfg.run.seed,
        &eval_cfg.hash(),
    )?;
    let weighted = report
        .sweep
        .iter()
        .find(|r| (r.p_mix - 1.0).abs() < 1e-12)
        .expect("p=1 row always present")
        .weighted_mean;
    Ok(AblationRow {
        label: label.to_string(),
        reward_means: report.per_reward_mean.clone(),
        weighted,
        nfe_old: train.mean_nfe_old,
        nfe_new: cfg.scheduler.window,
        mean_iter_secs: train.mean_iter_secs,
    })
}

/// Run the configuration matrix for one ablation axis and emit a CSV shaped
/// like the corresponding study table.
pub fn cmd_ablate(config: &RunConfig, axis: AblationAxis, checkpoint: &Path) -> Result<PathBuf> {
    let dir = Path::new(&config.run.out_dir).join(format!("ablate-{axis}"));
    let manifest = RunManifest::start(&dir, &format!("ablate --axis {axis}"), &config.hash())?;
    let mut rows: Vec<AblationRow> = Vec::new();
    match axis {
        AblationAxis::Strategy => {
            use mixgrpo_core::scheduler::IntervalSchedule;
            rows.push(ablation_row(config, Variant::Mix, "frozen", checkpoint, |c| {
                c.scheduler.strategy = Strategy::Frozen;
            })?);
            rows.push(ablation_row(config, Variant::Mix, "random", checkpoint, |c| {
                c.scheduler.strategy = Strategy::Random;
            })?);
            for (name, schedule) in [
                ("progressive-linear", IntervalSchedule::LinearDecay),
                ("progressive-exp", IntervalSchedule::ExpDecay),
                ("progressive-constant", IntervalSchedule::Constant),
            ] {
                rows.push(ablation_row(config, Variant::Mix, name, checkpoint, |c| {
                    c.scheduler.strategy = Strategy::Progressive;
                    c.scheduler.schedule = schedule;
                })?);
            }
        }
        AblationAxis::Tau => {
            for tau in [15.0, 20.0, 25.0, 30.0] {
                rows.push(ablation_row(
                    config,
                    Variant::Mix,
                    &format!("tau-{tau}"),
                    checkpoint,
                    |c| c.scheduler.tau0 = tau,
                )?);
            }
        }
        AblationAxis::W => {
            for w in [2usize, 4, 6] {
                rows.push(ablation_row(
                    config,
                    Variant::Mix,
                    &format!("w-{w}"),
                    checkpoint,
                    |c| c.scheduler.window = w,
                )?);
            }
        }
        AblationAxis::Stride => {
            for s in [1usize, 2, 3, 4] {
                rows.push(ablation_row(
                    config,
                    Variant::Mix,
                    &format!("stride-{s}"),
                    checkpoint,
                    |c| c.scheduler.stride = s,
                )?);
            }
        }
        AblationAxis::Order => {
            for (name, solver) in [
                ("order-1", SolverKind::Dpm1),
                ("order-2-midpoint", SolverKind::Dpm2Midpoint),
                ("order-2-heun", SolverKind::Dpm2Heun),
                ("order-3", SolverKind::Dpm3),
            ] {
                rows.push(ablation_row(config, Variant::Flash, name, checkpoint, |c| {
                    c.flash.solver = solver;
                })?);
            }
        }
        AblationAxis::Nfe => {
            let t = config.grid.steps as f64;
            let w = config.scheduler.window as f64;
            rows.push(ablation_row(
                config,
                Variant::DanceBaseline,
                "dance-25",
                checkpoint,
                |c| c.scheduler.strategy = Strategy::Random,
            )?);
            for post in [8usize, 6, 4] {
                rows.push(ablation_row(
                    config,
                    Variant::FlashStar,
                    &format!("flash-star-{}", config.scheduler.window + post),
                    checkpoint,
                    |c| c.flash.compression = post as f64 / (t - w),
                )?);
            }
        }
    }
    let table = dir.join("table.csv");
    {
        let mut f = std::fs::File::create(&table)?;
        let k = rows.first().map(|r| r.reward_means.len()).unwrap_or(0);
        write!(f, "label")?;
        for i in 0..k {
            write!(f, ",reward_{i}")?;
        }
        writeln!(f, ",weighted,nfe_old,nfe_new,mean_iter_secs")?;
        for r in &rows {
            write!(f, "{}", r.label)?;
            for v in &r.reward_means {
                write!(f, ",{v}")?;
            }
            writeln!(
                f,
                ",{},{},{},{:.6}",
                r.weighted, r.nfe_old, r.nfe_new, r.mean_iter_secs
            )?;
        }
    }
    manifest.finalize(&dir, vec!["table.csv".into()])?;
    Ok(table)
}
