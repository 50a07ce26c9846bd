//! Integrators and trajectory sampling for the mixed ODE-SDE schedule.

mod grid;
mod steps;
mod trajectory;

pub use grid::{dpm_lambda, dpm_lambda_inv, time_shift, TimeGrid};
pub use steps::{
    ode_euler_step, sde_em_step, sde_mean_from_velocity, transition_logprob, DpmState, SdeStepOut,
    StepKind,
};
pub use trajectory::{
    fit_convergence_order, hybrid_sample, ode_sample, sample_trajectory, sample_trajectory_from,
    terminal_ensemble_crn, SdeTransition, StepRecord, Trajectory,
};
