use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use mixgrpo_cli::commands::{cmd_ablate, cmd_eval, cmd_pretrain, cmd_train, AblationAxis, Variant};
use mixgrpo_cli::config::RunConfig;
use std::path::PathBuf;

/// Desk-scale mixed ODE-SDE GRPO training driver.
#[derive(Parser)]
#[command(name = "mixgrpo", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed (or set MIXGRPO_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory (or set MIXGRPO_OUT).
    #[arg(long)]
    out: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain the base flow-matching model.
    Pretrain {
        #[command(flatten)]
        common: Common,
    },
    /// GRPO post-training from a pretrained checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        variant: Variant,
        /// Pretrained checkpoint to start from.
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Hybrid-inference evaluation of a trained checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Trained checkpoint.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Frozen base checkpoint.
        #[arg(long)]
        base_checkpoint: PathBuf,
    },
    /// Configuration sweeps along one axis, reduced budget.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: AblationAxis,
        /// Pretrained checkpoint to start each row from.
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut config = RunConfig::from_path(&common.config)?;
    if let Some(seed) = common.seed {
        config.run.seed = seed;
    } else if let Ok(seed) = std::env::var("MIXGRPO_SEED") {
        config.run.seed = seed
            .parse()
            .context("MIXGRPO_SEED must be an unsigned integer")?;
    }
    if let Some(out) = &common.out {
        config.run.out_dir = out.clone();
    } else if let Ok(out) = std::env::var("MIXGRPO_OUT") {
        config.run.out_dir = out;
    }
    Ok(config)
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Pretrain { common } => {
            let config = load_config(&common)?;
            let out = cmd_pretrain(&config)?;
            println!("checkpoint: {}", out.checkpoint.display());
            println!("loss curve: {}", out.loss_curve.display());
        }
        Command::Train {
            common,
            variant,
            checkpoint,
        } => {
            let config = load_config(&common)?;
            let out = cmd_train(&config, variant, &checkpoint)?;
            println!("metrics: {}", out.metrics.display());
            println!("final checkpoint: {}", out.final_checkpoint.display());
            println!(
                "mean NFE_old {:.2}, mean iteration {:.3}s",
                out.mean_nfe_old, out.mean_iter_secs
            );
        }
        Command::Eval {
            common,
            checkpoint,
            base_checkpoint,
        } => {
            let config = load_config(&common)?;
            let out = cmd_eval(&config, &checkpoint, &base_checkpoint)?;
            println!("report: {}", out.report.display());
            println!("sweep: {}", out.sweep.display());
        }
        Command::Ablate {
            common,
            axis,
            checkpoint,
        } => {
            let config = load_config(&common)?;
            let table = cmd_ablate(&config, axis, &checkpoint)?;
            println!("table: {}", table.display());
        }
    }
    Ok(())
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
