//! Ensemble-level sampler properties on the affine-Gaussian oracle: terminal
//! moments of the Euler ODE, ODE/SDE marginal agreement, solver convergence
//! order, and the window-position dispersion ordering.

use mixgrpo_core::samplers::{
    fit_convergence_order, sample_trajectory_from, terminal_ensemble_crn, StepKind, TimeGrid,
};
use mixgrpo_core::tasks::group_dispersion;
use mixgrpo_core::tasks::stats::{covariance, frobenius_diff_rel, mean_state};
use mixgrpo_core::{AffineGaussianTask, Condition, StateVec, VelocityModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::collections::BTreeSet;

fn oracle() -> VelocityModel {
    VelocityModel::oracle(vec![AffineGaussianTask::standard(2)]).unwrap()
}

#[test]
fn euler_terminal_moments_match_analytic_marginal() {
    let model = oracle();
    // t_min below 1/T so the uniform grid stays strictly decreasing
    let grid = TimeGrid::new(200, 1.0, 0.7, 0.004).unwrap();
    let states =
        terminal_ensemble_crn(&model, &grid, &BTreeSet::new(), Condition(0), 10_000, 31).unwrap();
    let mean = mean_state(&states);
    assert!(mean.iter().all(|m| m.abs() < 0.03), "terminal mean {mean:?}");
    let cov = covariance(&states);
    let task = AffineGaussianTask::standard(2);
    let (_, expected) = task.marginal_moments(grid.t_min());
    let rel = frobenius_diff_rel(&cov, &expected);
    assert!(rel < 0.05, "covariance off by {:.2}% from analytic", rel * 100.0);
}

#[test]
fn sde_and_ode_share_terminal_moments() {
    let model = oracle();
    // moderate noise scale: the Euler-Maruyama weak error grows with sigma^2
    let grid = TimeGrid::new(50, 1.0, 0.3, 0.01).unwrap();
    let all: BTreeSet<usize> = (0..50).collect();
    let ode =
        terminal_ensemble_crn(&model, &grid, &BTreeSet::new(), Condition(0), 10_000, 77).unwrap();
    let sde = terminal_ensemble_crn(&model, &grid, &all, Condition(0), 10_000, 77).unwrap();
    let (m_ode, m_sde) = (mean_state(&ode), mean_state(&sde));
    let mean_diff = m_ode
        .iter()
        .zip(&m_sde)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(mean_diff < 0.02, "mean diff {mean_diff}");
    let rel = frobenius_diff_rel(&covariance(&ode), &covariance(&sde));
    assert!(rel < 0.05, "covariance diff {:.2}%", rel * 100.0);
}

#[test]
fn dpm_solver_orders_on_oracle_field() {
    let model = oracle();
    let start = StateVec(vec![1.3, -0.7]);
    let second = fit_convergence_order(
        &model,
        Condition(0),
        StepKind::OdeDpm2Midpoint,
        &start,
        0.95,
        0.05,
        &[8, 16, 32, 64],
        4096,
    )
    .unwrap();
    assert!(second >= 1.8, "second-order fit {second}");
    let first = fit_convergence_order(
        &model,
        Condition(0),
        StepKind::OdeDpm1,
        &start,
        0.95,
        0.05,
        &[8, 16, 32, 64],
        4096,
    )
    .unwrap();
    assert!(first >= 0.9, "first-order fit {first}");
}

#[test]
fn early_window_disperses_groups_more_than_late_window() {
    let model = oracle();
    let grid = TimeGrid::default_schedule(25).unwrap();
    let (t, w) = (25usize, 4usize);
    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let init = StateVec(vec![rng.sample(StandardNormal), rng.sample(StandardNormal)]);
        let mut disp = |l: usize| {
            let win: BTreeSet<usize> = (l..l + w).collect();
            let states: Vec<StateVec> = (0..64)
                .map(|_| {
                    sample_trajectory_from(
                        &model,
                        &grid,
                        &win,
                        Condition(0),
                        init.clone(),
                        &mut rng,
                        None,
                    )
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
            "seed {seed}: early {early:.4} must exceed late {late:.4}"
        );
    }
}

#[test]
fn mixed_window_marginals_agree_with_ode() {
    let model = oracle();
    let grid = TimeGrid::new(50, 3.0, 0.3, 0.01).unwrap();
    let ode =
        terminal_ensemble_crn(&model, &grid, &BTreeSet::new(), Condition(0), 10_000, 5).unwrap();
    let (m0, c0) = (mean_state(&ode), covariance(&ode));
    for l in [0usize, 23, 46] {
        let win: BTreeSet<usize> = (l..l + 4).collect();
        let mixed = terminal_ensemble_crn(&model, &grid, &win, Condition(0), 10_000, 5).unwrap();
        let m = mean_state(&mixed);
        let dm = m.iter().zip(&m0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let dc = frobenius_diff_rel(&covariance(&mixed), &c0);
        assert!(dm < 0.02 && dc < 0.05, "window at {l}: dm={dm:.4} dc={:.2}%", dc * 100.0);
    }
}
