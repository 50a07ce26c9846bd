//! Acceptance suite: every release criterion as one test, each printing a
//! pass/fail line (`cargo test --test acceptance -- --nocapture` to see them).
//!
//! Heavier criteria share one pretrained fixture and cache their training
//! runs, so the suite stays well inside its time budget.

use mixgrpo_cli::commands::{cmd_pretrain, cmd_train, Variant};
use mixgrpo_cli::config::RunConfig;
use mixgrpo_core::grpo::{
    grpo_objective_and_grad, nfe_account, nfe_account_flash_avg, nfe_account_flash_star,
    policy_logratio, sample_group, train_iteration, FlashSettings, GrpoConfig, NfeLedger,
};
use mixgrpo_core::samplers::{
    fit_convergence_order, ode_sample, sample_trajectory_from, terminal_ensemble_crn, StepKind,
    TimeGrid,
};
use mixgrpo_core::scheduler::{
    speedup, tau_of, FlashVariant, IntervalSchedule, Strategy, WindowState,
};
use mixgrpo_core::tasks::stats::{covariance, frobenius_diff_rel, mean_state, spearman};
use mixgrpo_core::tasks::{
    default_reward_suite, eval_suite, group_dispersion, pretrain, reward_oracle_max,
    weighted_reward, PretrainConfig, RewardSpec, TaskSpec,
};
use mixgrpo_core::flowcore::{fm_loss_and_grad_at, try_finite_diff_grad, FmDraw};
use mixgrpo_core::{
    AffineGaussianTask, Architecture, Condition, Optimizer, StateVec, VelocityModel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::sync::OnceLock;

// ---------------------------------------------------------------- fixture

struct Fixture {
    task: TaskSpec,
    rewards: Vec<RewardSpec>,
    base: VelocityModel,
    reward_before: f64,
    reward_max: f64,
}

static FIXTURE: OnceLock<Fixture> = OnceLock::new();

fn fixture() -> &'static Fixture {
    FIXTURE.get_or_init(|| {
        let task = TaskSpec::default_bimodal(1, 2.0, 0.3).unwrap();
        let rewards = default_reward_suite(&task).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1000);
        let mut base = VelocityModel::trainable(Architecture::default_net(2, 1), &mut rng);
        pretrain(
            &mut base,
            &task,
            &PretrainConfig {
                steps: 3000,
                batch_size: 128,
                learning_rate: 1e-3,
                weight_decay: 1e-4,
            },
            &mut rng,
        )
        .expect("pretraining converges");
        let reward_before = eval_model_reward(&base, &rewards);
        let reward_max = reward_oracle_max(&rewards, Condition(0), &[2.0, 0.0], 1.2, 400);
        Fixture {
            task,
            rewards,
            base,
            reward_before,
            reward_max,
        }
    })
}

/// Mean weighted reward of 256 deterministic-policy (pure ODE) samples.
fn eval_model_reward(model: &VelocityModel, rewards: &[RewardSpec]) -> f64 {
    let grid = TimeGrid::default_schedule(25).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(777);
    let mut sum = 0.0;
    for _ in 0..256 {
        let init = StateVec(vec![rng.sample(rand_distr::StandardNormal), rng.sample(rand_distr::StandardNormal)]);
        let x = ode_sample(model, &grid, Condition(0), init).unwrap();
        sum += weighted_reward(rewards, &x, Condition(0));
    }
    sum / 256.0
}

#[derive(Clone, Copy, PartialEq)]
enum ToyVariant {
    Mix,
    FlashStar,
    RandomWindow,
}

struct ToyRun {
    model: VelocityModel,
    improvement: f64,
    mean_nfe_old: f64,
}

/// 200 iterations of toy post-training at desk-scale hyperparameters.
fn train_toy(variant: ToyVariant, seed: u64) -> ToyRun {
    let fx = fixture();
    let grid = TimeGrid::default_schedule(25).unwrap();
    let mut ws = match variant {
        ToyVariant::Mix => WindowState::progressive_constant(25, 4, 9.0, 1).unwrap(),
        ToyVariant::FlashStar => WindowState::new(
            25,
            4,
            Strategy::Frozen,
            IntervalSchedule::Constant,
            9.0,
            0.0,
            0.0,
            1,
        )
        .unwrap(),
        ToyVariant::RandomWindow => WindowState::new(
            25,
            4,
            Strategy::Random,
            IntervalSchedule::Constant,
            9.0,
            0.0,
            0.0,
            1,
        )
        .unwrap(),
    };
    let flash = match variant {
        ToyVariant::FlashStar => Some(FlashSettings {
            variant: FlashVariant::FlashStar,
            compression: 4.0 / 21.0,
            solver: StepKind::OdeDpm2Midpoint,
        }),
        _ => None,
    };
    let config = GrpoConfig {
        group_size: 12,
        accumulation_chunks: 3,
        learning_rate: 3e-4,
        weight_decay: 1e-4,
        iterations: 200,
        ..Default::default()
    };
    let mut model = fx.base.clone();
    let mut old = fx.base.clone();
    let mut opt = Optimizer::adamw(config.learning_rate, config.weight_decay, model.param_count());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ledger = NfeLedger::new();
    for m in 1..=config.iterations {
        train_iteration(
            m,
            &mut ws,
            &mut model,
            &mut old,
            &[Condition(0)],
            &fx.rewards,
            &grid,
            &config,
            flash,
            &mut opt,
            &mut rng,
            &mut ledger,
        )
        .expect("training iteration");
    }
    let after = eval_model_reward(&model, &fx.rewards);
    let improvement = (after - fx.reward_before) / (fx.reward_max - fx.reward_before);
    ToyRun {
        model,
        improvement,
        mean_nfe_old: ledger.mean_nfe_old(),
    }
}

const SEEDS: [u64; 3] = [11, 22, 33];

static MIX_RUNS: OnceLock<Vec<ToyRun>> = OnceLock::new();
static FLASH_RUNS: OnceLock<Vec<ToyRun>> = OnceLock::new();
static RANDOM_RUNS: OnceLock<Vec<ToyRun>> = OnceLock::new();

fn mix_runs() -> &'static [ToyRun] {
    MIX_RUNS.get_or_init(|| SEEDS.iter().map(|&s| train_toy(ToyVariant::Mix, s)).collect())
}

fn flash_runs() -> &'static [ToyRun] {
    FLASH_RUNS.get_or_init(|| {
        SEEDS
            .iter()
            .map(|&s| train_toy(ToyVariant::FlashStar, s))
            .collect()
    })
}

fn random_runs() -> &'static [ToyRun] {
    RANDOM_RUNS.get_or_init(|| {
        SEEDS
            .iter()
            .map(|&s| train_toy(ToyVariant::RandomWindow, s))
            .collect()
    })
}

/// Window boundaries visited during a 300-iteration progressive run with
/// tau = 25, stride 1 (the boundary active while each iteration samples).
fn visited_boundaries_300() -> Vec<usize> {
    let mut ws = WindowState::progressive_constant(25, 4, 25.0, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut visited = Vec::with_capacity(300);
    for m in 1..=300 {
        visited.push(ws.l);
        ws.advance(m, &mut rng);
    }
    visited
}

// ---------------------------------------------------------------- criteria

#[test]
fn acceptance_01_overhead_arithmetic() {
    assert_eq!(nfe_account(25, 4), (25, 4), "mixed-window row");
    assert_eq!(nfe_account(25, 14), (25, 14), "all-SDE official row");
    assert_eq!(nfe_account(25, 4), (25, 4), "all-SDE reduced row (4 optimized steps)");
    assert_eq!(
        nfe_account_flash_star(25, 4, 4.0 / 21.0).unwrap(),
        (8, 4),
        "frozen compressed row"
    );
    let visited = visited_boundaries_300();
    let (avg, w) = nfe_account_flash_avg(25, 4, 0.4, &visited).unwrap();
    assert_eq!(w, 4);
    assert!(
        (avg - 16.0).abs() <= 1.0,
        "flash average {avg:.2} not within 16 +- 1"
    );
    println!("[PASS] criterion 1: overhead arithmetic exact; flash average {avg:.2} within 16 +- 1");
}

#[test]
fn acceptance_02_scheduler_golden_trace() {
    let mut ws = WindowState::progressive_constant(25, 4, 25.0, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for m in 1..=300usize {
        ws.advance(m, &mut rng);
        let expected = (m / 25).min(21);
        assert_eq!(ws.l, expected, "boundary after iteration {m}");
        assert_eq!(ws.tau, 25, "constant interval at iteration {m}");
    }
    for l in 0..=13 {
        assert_eq!(tau_of(l, IntervalSchedule::ExpDecay, 20.0, 0.1, 13.0), 20);
    }
    assert_eq!(tau_of(23, IntervalSchedule::ExpDecay, 20.0, 0.1, 13.0), 8);
    println!("[PASS] criterion 2: 300-iteration golden trace exact; exp-decay intervals 20 / 8");
}

#[test]
fn acceptance_03_marginal_equivalence() {
    let model = VelocityModel::oracle(vec![AffineGaussianTask::standard(2)]).unwrap();
    // moderate noise scale keeps the Euler-Maruyama weak error within the
    // 5% budget at T = 50; common random numbers across all五 variants
    let grid = TimeGrid::new(50, 3.0, 0.3, 0.01).unwrap();
    let windows: Vec<(&str, BTreeSet<usize>)> = vec![
        ("pure-ode", BTreeSet::new()),
        ("pure-sde", (0..50).collect()),
        ("window-early", (0..4).collect()),
        ("window-mid", (23..27).collect()),
        ("window-late", (46..50).collect()),
    ];
    let ensembles: Vec<(&str, Vec<StateVec>)> = windows
        .iter()
        .map(|(name, win)| {
            (
                *name,
                terminal_ensemble_crn(&model, &grid, win, Condition(0), 10_000, 2024).unwrap(),
            )
        })
        .collect();
    let moments: Vec<(&str, Vec<f64>, Vec<Vec<f64>>)> = ensembles
        .iter()
        .map(|(name, e)| (*name, mean_state(e), covariance(e)))
        .collect();
    let mut worst_mean = 0.0f64;
    let mut worst_cov = 0.0f64;
    for i in 0..moments.len() {
        for j in i + 1..moments.len() {
            let dm = moments[i]
                .1
                .iter()
                .zip(&moments[j].1)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let dc = frobenius_diff_rel(&moments[i].2, &moments[j].2);
            assert!(
                dm < 0.02 && dc < 0.05,
                "{} vs {}: mean diff {dm:.4}, cov diff {:.2}%",
                moments[i].0,
                moments[j].0,
                dc * 100.0
            );
            worst_mean = worst_mean.max(dm);
            worst_cov = worst_cov.max(dc);
        }
    }
    println!(
        "[PASS] criterion 3: marginal equivalence, worst pairwise mean {worst_mean:.4} (< 0.02), cov {:.2}% (< 5%)",
        worst_cov * 100.0
    );
}

#[test]
fn acceptance_04_solver_order() {
    let model = VelocityModel::oracle(vec![AffineGaussianTask::standard(2)]).unwrap();
    let start = StateVec(vec![1.3, -0.7]);
    // step counts in the asymptotic regime: at very coarse grids the solver
    // over-delivers on this smooth field (measured slope ~2.3 against the
    // exact solution), settling to 2 as the grids refine
    let second = fit_convergence_order(
        &model,
        Condition(0),
        StepKind::OdeDpm2Midpoint,
        &start,
        0.95,
        0.05,
        &[64, 128, 256, 512],
        8192,
    )
    .unwrap();
    assert!(
        (1.8..=2.2).contains(&second),
        "second-order slope {second:.3} outside [1.8, 2.2]"
    );
    let first = fit_convergence_order(
        &model,
        Condition(0),
        StepKind::OdeDpm1,
        &start,
        0.95,
        0.05,
        &[64, 128, 256, 512],
        8192,
    )
    .unwrap();
    assert!(first >= 0.9, "first-order slope {first:.3} below 0.9");
    println!("[PASS] criterion 4: solver order {second:.3} in [1.8, 2.2]; first-order {first:.3} >= 0.9");
}

#[test]
fn acceptance_05_gradient_correctness() {
    let mut worst = 0.0f64;
    let mut instances = 0usize;
    // flow-matching loss instances
    for i in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(4000 + i);
        let arch = Architecture {
            dim: 2,
            cond_count: 2,
            embed_dim: 2,
            hidden: vec![5 + (i % 3) as usize, 4],
            activation: mixgrpo_core::flowcore::Activation::Tanh,
        };
        let model = VelocityModel::trainable(arch, &mut rng);
        let batch: Vec<(StateVec, Condition)> = (0..3)
            .map(|k| {
                (
                    StateVec(vec![rng.sample(rand_distr::StandardNormal), rng.sample(rand_distr::StandardNormal)]),
                    Condition(k % 2),
                )
            })
            .collect();
        let draws: Vec<FmDraw> = (0..3)
            .map(|_| FmDraw {
                noise: StateVec(vec![rng.sample(rand_distr::StandardNormal), rng.sample(rand_distr::StandardNormal)]),
                t: 0.1 + 0.85 * rng.random::<f64>(),
            })
            .collect();
        let (_, grad) = fm_loss_and_grad_at(&model, &batch, &draws).unwrap();
        let theta = model.params().to_vec();
        let mut probe = model.clone();
        let fd = try_finite_diff_grad(
            |p| {
                probe.set_params(p)?;
                Ok(fm_loss_and_grad_at(&probe, &batch, &draws)?.0)
            },
            &theta,
            1e-5,
        )
        .unwrap();
        let err = grad.max_relative_error(&fd, 1e-7);
        assert!(err < 1e-4, "fm instance {i}: relative error {err}");
        worst = worst.max(err);
        instances += 1;
    }
    // clipped-objective instances (d=2, N=4, w=2)
    let grid = TimeGrid::default_schedule(10).unwrap();
    for i in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + i);
        let arch = Architecture {
            dim: 2,
            cond_count: 1,
            embed_dim: 2,
            hidden: vec![6],
            activation: mixgrpo_core::flowcore::Activation::Tanh,
        };
        let old_model = VelocityModel::trainable(arch, &mut rng);
        let config = GrpoConfig {
            group_size: 4,
            accumulation_chunks: 2,
            // half the instances probe the smooth branch, half the tiny band
            clip_epsilon: if i % 2 == 0 { 0.25 } else { 1e-4 },
            ..Default::default()
        };
        let window: BTreeSet<usize> = [1usize, 2].into_iter().collect();
        let opt_indices: Vec<usize> = window.iter().copied().collect();
        let group = sample_group(
            &old_model,
            &grid,
            &window,
            &opt_indices,
            None,
            &config,
            &fixture().rewards,
            Condition(0),
            &mut rng,
        )
        .unwrap();
        let mut new_model = old_model.clone();
        {
            let params = new_model.params_mut().unwrap();
            for p in params.iter_mut() {
                *p += 0.01 * (rng.random::<f64>() - 0.5);
            }
        }
        let (_, grad) = grpo_objective_and_grad(&group, &new_model, &config).unwrap();
        let theta = new_model.params().to_vec();
        let mut probe = new_model.clone();
        let fd = try_finite_diff_grad(
            |p| {
                probe.set_params(p)?;
                Ok(grpo_objective_and_grad(&group, &probe, &config)?.0)
            },
            &theta,
            1e-5,
        )
        .unwrap();
        let err = grad.max_relative_error(&fd, 1e-7);
        assert!(err < 1e-4, "grpo instance {i}: relative error {err}");
        worst = worst.max(err);
        instances += 1;
    }
    assert!(instances >= 20);
    println!("[PASS] criterion 5: {instances} gradient instances, worst relative error {worst:.2e} (< 1e-4)");
}

#[test]
fn acceptance_06_ratio_one_identity() {
    let fx = fixture();
    let grid = TimeGrid::default_schedule(25).unwrap();
    let window: BTreeSet<usize> = (0..4).collect();
    let opt_indices: Vec<usize> = window.iter().copied().collect();
    let config = GrpoConfig {
        group_size: 12,
        accumulation_chunks: 3,
        // effectively unclipped advantages: the identity is about raw ratios
        advantage_clip: 1e9,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    let group = sample_group(
        &fx.base,
        &grid,
        &window,
        &opt_indices,
        None,
        &config,
        &fx.rewards,
        Condition(0),
        &mut rng,
    )
    .unwrap();
    let mut worst = 0.0f64;
    for traj in &group.trajectories {
        for &idx in &group.opt_indices {
            let ratio = policy_logratio(&traj.records[idx], &fx.base, Condition(0))
                .unwrap()
                .exp();
            worst = worst.max((ratio - 1.0).abs());
        }
    }
    assert!(worst < 1e-12, "worst |ratio - 1| = {worst:.3e}");
    let (j, _) = grpo_objective_and_grad(&group, &fx.base, &config).unwrap();
    assert!(j.abs() < 1e-10, "objective at theta = theta_old is {j:.3e}");
    println!("[PASS] criterion 6: ratios 1 within {worst:.1e} (< 1e-12), objective {j:.1e} (< 1e-10)");
}

#[test]
fn acceptance_07_toy_reward_improvement() {
    let mix = mix_runs();
    let flash = flash_runs();
    for (seed, run) in SEEDS.iter().zip(mix) {
        assert!(
            run.improvement >= 0.30,
            "seed {seed}: mixed-window improvement {:.3} below 30% of the pretrained-to-max gap",
            run.improvement
        );
    }
    let mix_mean = mix.iter().map(|r| r.improvement).sum::<f64>() / mix.len() as f64;
    let flash_mean = flash.iter().map(|r| r.improvement).sum::<f64>() / flash.len() as f64;
    assert!(
        flash_mean >= 0.8 * mix_mean,
        "compressed variant keeps {:.1}% of the improvement (needs >= 80%)",
        100.0 * flash_mean / mix_mean
    );
    let nfe_ratio = flash.iter().map(|r| r.mean_nfe_old).sum::<f64>()
        / mix.iter().map(|r| r.mean_nfe_old).sum::<f64>();
    assert!(
        nfe_ratio <= 0.40,
        "compressed sampling NFE ratio {nfe_ratio:.3} above 40%"
    );
    println!(
        "[PASS] criterion 7: improvements {:?} (each >= 0.30); compressed retains {:.0}% at {:.0}% NFE",
        mix.iter().map(|r| (r.improvement * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
        100.0 * flash_mean / mix_mean,
        100.0 * nfe_ratio
    );
}

#[test]
fn acceptance_08_window_strategy_ordering() {
    let fx = fixture();
    let mix = mix_runs();
    let random = random_runs();
    let mut wins = 0;
    for ((seed, m), r) in SEEDS.iter().zip(mix).zip(random) {
        let reward_mix = eval_model_reward(&m.model, &fx.rewards);
        let reward_rand = eval_model_reward(&r.model, &fx.rewards);
        if reward_mix >= reward_rand {
            wins += 1;
        } else {
            println!(
                "[note] criterion 8 deviation at seed {seed}: progressive {reward_mix:.4} < random {reward_rand:.4}"
            );
        }
    }
    assert!(
        wins >= 2,
        "progressive-constant beat random in only {wins} of 3 seeds"
    );
    println!("[PASS] criterion 8: progressive-constant >= random in {wins} of 3 seeds");
}

#[test]
fn acceptance_09_dispersion_ordering() {
    let model = VelocityModel::oracle(vec![AffineGaussianTask::standard(2)]).unwrap();
    let grid = TimeGrid::default_schedule(25).unwrap();
    let (t, w) = (25usize, 4usize);
    let mut pairs = Vec::new();
    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let init = StateVec(vec![rng.sample(rand_distr::StandardNormal), rng.sample(rand_distr::StandardNormal)]);
        let mut disp = |l: usize| {
            let win: BTreeSet<usize> = (l..l + w).collect();
            let states: Vec<StateVec> = (0..64)
                .map(|_| {
                    sample_trajectory_from(&model, &grid, &win, Condition(0), init.clone(), &mut rng, None)
                        .unwrap()
                        .terminal()
                        .clone()
                })
                .collect();
            group_dispersion(&states).unwrap()
        };
        let early = disp(0);
        let late = disp(t - w);
        assert!(
            early > late,
            "seed {seed}: early-window dispersion {early:.4} not strictly above late {late:.4}"
        );
        pairs.push((early, late));
    }
    println!(
        "[PASS] criterion 9: early-window dispersion strictly larger at all 3 seeds: {:?}",
        pairs
            .iter()
            .map(|(a, b)| format!("{a:.3}>{b:.3}"))
            .collect::<Vec<_>>()
    );
}

#[test]
fn acceptance_10_hybrid_inference_trend() {
    let fx = fixture();
    let trained = &mix_runs()[0].model;
    let grid = TimeGrid::default_schedule(25).unwrap();
    let ps = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
    let report = eval_suite(
        trained,
        &fx.base,
        &fx.task,
        &fx.rewards,
        &grid,
        &ps,
        256,
        424242,
        "acceptance",
    )
    .unwrap();
    let rewards: Vec<f64> = report.sweep.iter().map(|r| r.weighted_mean).collect();
    let rho = spearman(&ps, &rewards);
    assert!(
        rho > 0.8,
        "hybrid sweep not monotone enough: spearman {rho:.3}, rewards {rewards:?}"
    );
    println!(
        "[PASS] criterion 10: hybrid sweep spearman {rho:.3} (> 0.8), rewards {:?}",
        rewards.iter().map(|r| (r * 1000.0).round() / 1000.0).collect::<Vec<_>>()
    );
}

#[test]
fn acceptance_11_speedup_formulas() {
    let star = speedup(25, 4, 4.0 / 21.0, None);
    assert_eq!(star, 3.125, "frozen-variant speedup must be exactly 25/8");
    let visited = visited_boundaries_300();
    let flash = speedup(25, 4, 4.0 / 21.0, Some(&visited));
    assert!(
        flash < star,
        "averaged speedup {flash:.4} must be strictly below {star:.4}"
    );
    println!("[PASS] criterion 11: frozen speedup exactly 3.125; averaged {flash:.3} strictly smaller");
}

#[test]
fn acceptance_12_cli_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let make_cfg = |sub: &str| {
        let text = format!(
            r#"
[run]
seed = 21
out_dir = "{}/{sub}"

[model]
hidden = [16, 16]
embed_dim = 2

[scheduler]
strategy = "progressive"
schedule = "constant"
window = 4
tau0 = 3.0
decay_k = 0.1
lambda_thr = 13.0
stride = 1
random_respect_tau = false

[grpo]
group_size = 6
clip_epsilon = 0.0001
advantage_clip = 5.0
accumulation_chunks = 3
learning_rate = 0.0003
weight_decay = 0.0001
iterations = 8
fused_window_update = false

[pretrain]
steps = 200
batch_size = 32
learning_rate = 0.001
weight_decay = 0.0001
"#,
            tmp.path().display()
        );
        RunConfig::from_toml(&text).unwrap()
    };
    let cfg_a = make_cfg("a");
    let cfg_b = make_cfg("b");
    let pre_a = cmd_pretrain(&cfg_a).unwrap();
    let pre_b = cmd_pretrain(&cfg_b).unwrap();
    let bytes = |p: &std::path::Path| std::fs::read(p).unwrap();
    assert_eq!(
        bytes(&pre_a.loss_curve),
        bytes(&pre_b.loss_curve),
        "pretrain loss curves must be bit-identical"
    );
    assert_eq!(bytes(&pre_a.checkpoint), bytes(&pre_b.checkpoint));
    let tr_a = cmd_train(&cfg_a, Variant::Mix, &pre_a.checkpoint).unwrap();
    let tr_b = cmd_train(&cfg_b, Variant::Mix, &pre_b.checkpoint).unwrap();
    assert_eq!(
        bytes(&tr_a.metrics),
        bytes(&tr_b.metrics),
        "training metrics streams must be bit-identical"
    );
    assert_eq!(
        bytes(&tr_a.dir.join("trace.csv")),
        bytes(&tr_b.dir.join("trace.csv"))
    );
    assert_eq!(bytes(&tr_a.final_checkpoint), bytes(&tr_b.final_checkpoint));
    println!("[PASS] criterion 12: pretrain and train reruns bit-identical (metrics, traces, checkpoints)");
}
