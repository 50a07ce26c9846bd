//! Sliding-window state machine and the Flash step-compression plan.
//!
//! The window `W(l) = {l, ..., l+w-1}` marks the denoising steps that receive
//! stochastic sampling and gradient updates. Under the progressive strategy
//! the left boundary advances by `stride` every `tau` iterations (checked at
//! the end of each iteration), capped at `T - w`; decaying schedules re-derive
//! `tau` from the new boundary immediately after each shift.

use crate::error::{CoreError, Result};
use crate::samplers::StepKind;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::Write;

/// Window placement strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Frozen,
    Random,
    Progressive,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Strategy::Frozen => write!(f, "frozen"),
            Strategy::Random => write!(f, "random"),
            Strategy::Progressive => write!(f, "progressive"),
        }
    }
}

/// How the shift interval evolves with the boundary position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalSchedule {
    Constant,
    LinearDecay,
    ExpDecay,
}

impl std::fmt::Display for IntervalSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IntervalSchedule::Constant => write!(f, "constant"),
            IntervalSchedule::LinearDecay => write!(f, "linear-decay"),
            IntervalSchedule::ExpDecay => write!(f, "exp-decay"),
        }
    }
}

/// Shift interval as a function of the boundary position. Constant keeps
/// `tau0`; ExpDecay is `tau0 * exp(-k * relu(l - lambda_thr))`; LinearDecay
/// mirrors the same threshold structure, `tau0 * max(0, 1 - k * relu(l -
/// lambda_thr))`. Non-integer intervals round up and never drop below 1.
pub fn tau_of(l: usize, schedule: IntervalSchedule, tau0: f64, k: f64, lambda_thr: f64) -> usize {
    let relu = (l as f64 - lambda_thr).max(0.0);
    let raw = match schedule {
        IntervalSchedule::Constant => tau0,
        IntervalSchedule::ExpDecay => tau0 * (-k * relu).exp(),
        IntervalSchedule::LinearDecay => tau0 * (1.0 - k * relu).max(0.0),
    };
    (ceil_robust(raw)).max(1)
}

/// Ceiling with a tiny downward nudge so that products that are integers in
/// exact arithmetic do not round up one extra step.
fn ceil_robust(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

/// Sliding-window scheduler state.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowState {
    /// Left boundary, `0 <= l <= total_steps - w`.
    pub l: usize,
    /// Window size.
    pub w: usize,
    /// Boundary stride per shift.
    pub stride: usize,
    /// Current shift interval (iterations between boundary moves).
    pub tau: usize,
    pub strategy: Strategy,
    pub schedule: IntervalSchedule,
    pub tau0: f64,
    pub decay_k: f64,
    pub lambda_thr: f64,
    pub total_steps: usize,
    /// Random strategy only: re-draw the boundary every `tau` iterations
    /// instead of every iteration.
    pub random_respect_tau: bool,
}

impl WindowState {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        total_steps: usize,
        w: usize,
        strategy: Strategy,
        schedule: IntervalSchedule,
        tau0: f64,
        decay_k: f64,
        lambda_thr: f64,
        stride: usize,
    ) -> Result<Self> {
        if w == 0 || w > total_steps {
            return Err(CoreError::invalid(format!(
                "window size {w} invalid for {total_steps} steps"
            )));
        }
        if stride == 0 {
            return Err(CoreError::invalid("stride must be >= 1"));
        }
        if !(tau0 >= 1.0) {
            return Err(CoreError::invalid("tau0 must be >= 1"));
        }
        let tau = tau_of(0, schedule, tau0, decay_k, lambda_thr);
        Ok(WindowState {
            l: 0,
            w,
            stride,
            tau,
            strategy,
            schedule,
            tau0,
            decay_k,
            lambda_thr,
            total_steps,
            random_respect_tau: false,
        })
    }

    /// Progressive strategy with a constant shift interval.
    pub fn progressive_constant(total_steps: usize, w: usize, tau: f64, stride: usize) -> Result<Self> {
        Self::new(
            total_steps,
            w,
            Strategy::Progressive,
            IntervalSchedule::Constant,
            tau,
            0.0,
            0.0,
            stride,
        )
    }

    pub fn max_l(&self) -> usize {
        self.total_steps - self.w
    }

    /// Window indices for the current iteration. Frozen/Progressive return
    /// `{l, ..., l+w-1}`; Random draws a fresh boundary uniformly from
    /// `[0, T-w]` (unless `random_respect_tau`, in which case the stored
    /// boundary, re-drawn by [`Self::advance`], is used). Call once per
    /// iteration.
    pub fn window_at<R: Rng + ?Sized>(&self, rng: &mut R) -> BTreeSet<usize> {
        let start = match self.strategy {
            Strategy::Frozen | Strategy::Progressive => self.l,
            Strategy::Random => {
                if self.random_respect_tau {
                    self.l
                } else {
                    rng.random_range(0..=self.max_l())
                }
            }
        };
        (start..start + self.w).collect()
    }

    /// End-of-iteration update for iteration `m >= 1`: under Progressive,
    /// when `m mod tau == 0` the boundary advances by `stride` (capped at
    /// `T - w`) and decaying schedules re-derive `tau` from the new boundary.
    /// Frozen never moves; Random moves only in `random_respect_tau` mode.
    pub fn advance<R: Rng + ?Sized>(&mut self, m: usize, rng: &mut R) {
        debug_assert!(m >= 1);
        match self.strategy {
            Strategy::Frozen => {}
            Strategy::Progressive => {
                if m % self.tau == 0 {
                    self.l = (self.l + self.stride).min(self.max_l());
                    self.tau = tau_of(self.l, self.schedule, self.tau0, self.decay_k, self.lambda_thr);
                }
            }
            Strategy::Random => {
                if self.random_respect_tau && m % self.tau == 0 {
                    self.l = rng.random_range(0..=self.max_l());
                }
            }
        }
    }
}

/// Flash variants: progressive window with a compressed tail, or the frozen
/// `l = 0` variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlashVariant {
    Flash,
    FlashStar,
}

/// Step-compression plan for the post-window ODE region.
#[derive(Debug, Clone, PartialEq)]
pub struct FlashPlan {
    pub variant: FlashVariant,
    /// Compression rate in (0, 1].
    pub compression: f64,
    pub l: usize,
    pub w: usize,
    pub total_steps: usize,
    /// Compressed post-window step count `ceil((T - l - w) * compression)`.
    pub post_steps: usize,
    /// `l + w + post_steps`.
    pub effective_steps: usize,
    /// Solver used on the compressed region.
    pub solver: StepKind,
}

/// Build a plan; `FlashStar` forces the boundary to 0 (frozen strategy).
pub fn flash_plan(
    total_steps: usize,
    l: usize,
    w: usize,
    compression: f64,
    variant: FlashVariant,
    solver: StepKind,
) -> Result<FlashPlan> {
    if !(compression > 0.0 && compression <= 1.0) {
        return Err(CoreError::invalid(format!(
            "compression rate must lie in (0, 1], got {compression}"
        )));
    }
    if !solver.is_dpm() {
        return Err(CoreError::invalid(
            "flash solver must be one of the DPM step kinds",
        ));
    }
    let l = match variant {
        FlashVariant::FlashStar => 0,
        FlashVariant::Flash => l,
    };
    if w == 0 || l + w > total_steps {
        return Err(CoreError::invalid(format!(
            "window [{l}, {}) invalid for {total_steps} steps",
            l + w
        )));
    }
    let post_steps = ceil_robust((total_steps - l - w) as f64 * compression);
    Ok(FlashPlan {
        variant,
        compression,
        l,
        w,
        total_steps,
        post_steps,
        effective_steps: l + w + post_steps,
        solver,
    })
}

impl FlashPlan {
    /// First post-window step index.
    pub fn window_end(&self) -> usize {
        self.l + self.w
    }

    /// The sampler's window must be exactly this plan's contiguous window.
    pub fn check_consistent(&self, total_steps: usize, window: &BTreeSet<usize>) -> Result<()> {
        if self.total_steps != total_steps {
            return Err(CoreError::invalid(format!(
                "flash plan built for {} steps, grid has {total_steps}",
                self.total_steps
            )));
        }
        let expect: BTreeSet<usize> = (self.l..self.l + self.w).collect();
        if *window != expect {
            return Err(CoreError::invalid(format!(
                "window {:?} does not match flash plan window [{}, {})",
                window,
                self.l,
                self.l + self.w
            )));
        }
        Ok(())
    }
}

/// Theoretical training-time sampling speedup. With `visited_l = None` this is
/// the frozen-boundary form `T / (w + (T - w) r)`; otherwise the averaged form
/// `T / mean_l(w + l + ceil((T - w - l) r))` over the visited boundaries.
pub fn speedup(total_steps: usize, w: usize, compression: f64, visited_l: Option<&[usize]>) -> f64 {
    let t = total_steps as f64;
    match visited_l {
        None => t / (w as f64 + (t - w as f64) * compression),
        Some(ls) => {
            assert!(!ls.is_empty(), "averaged speedup needs visited boundaries");
            let mean: f64 = ls
                .iter()
                .map(|&l| {
                    (w + l + ceil_robust((total_steps - w - l) as f64 * compression)) as f64
                })
                .sum::<f64>()
                / ls.len() as f64;
            t / mean
        }
    }
}

/// One row of the scheduler trace. `l` and `tau` are the post-advance values
/// of iteration `m` (the boundary the NEXT iteration will use); the window
/// columns are what iteration `m` actually sampled with.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub m: usize,
    pub strategy: Strategy,
    pub l: usize,
    pub tau: usize,
    pub window_start: usize,
    pub window_len: usize,
    pub effective_steps: usize,
}

/// CSV export: `m,strategy,l,tau,window,t_eff` with the window rendered as an
/// inclusive index range `start-end`.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "m,strategy,l,tau,window,t_eff")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}-{},{}",
            r.m,
            r.strategy,
            r.l,
            r.tau,
            r.window_start,
            r.window_start + r.window_len - 1,
            r.effective_steps
        )?;
    }
    Ok(())
}
