//! First-order solvers for `min_{x ∈ Q} f(x)` sharing one termination and
//! history-logging contract.
//!
//! Every run produces a [`ConvergenceHistory`] whose row `k` describes the
//! iterate `x⁽ᵏ⁾`. The `grad_map_norm` of a row is the most recent
//! gradient-map norm the solver computed at or before producing that row
//! (`NaN` when none has been computed yet). On a gradient-map stop the final
//! row is the returned point and carries the norm that certified the stop.

mod bt;
mod gp;
mod gpbb;
mod nesterov;
mod upn;

pub use bt::{bt_step, bt_step_with, rounding_slack, theta_next, BtStep, MAX_BACKTRACKS, ROUNDING_SLACK_FACTOR};
pub use gp::gp_solve;
pub use gpbb::gpbb_solve;
pub use nesterov::nesterov_solve;
pub use upn::{restart_check, upn0_solve, upn_solve, SolverState, MAX_STAGES};

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::objective::Objective;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Gp,
    Gpbb,
    Nesterov,
    Upn,
    Upn0,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Gp,
        Algorithm::Gpbb,
        Algorithm::Nesterov,
        Algorithm::Upn,
        Algorithm::Upn0,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Gp => "gp",
            Algorithm::Gpbb => "gpbb",
            Algorithm::Nesterov => "nesterov",
            Algorithm::Upn => "upn",
            Algorithm::Upn0 => "upn0",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parse(format!("unknown algorithm {s:?}")))
    }
}

/// Solver parameters.
///
/// For [`Algorithm::Nesterov`], `mu_init` and `l_init` are taken as the known
/// `μ` and `L`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// Gradient-map tolerance `ε̄`.
    pub eps_bar: f64,
    pub max_iters: usize,
    /// Initial strong-convexity estimate `μ̄`.
    pub mu_init: f64,
    /// Initial Lipschitz estimate `L̄`.
    pub l_init: f64,
    pub rho_l: f64,
    pub rho_mu: f64,
    pub gpbb_k: usize,
    pub gpbb_sigma: f64,
    /// Nesterov's `θ₀`; `None` means `√(μ/L)`.
    pub theta0: Option<f64>,
    /// Record elapsed wall time per iteration. Off by default so histories
    /// are reproducible byte for byte.
    pub record_wall_time: bool,
}

impl SolverConfig {
    pub const DEFAULT_RHO_L: f64 = 1.5;
    pub const DEFAULT_RHO_MU: f64 = 0.7;
    pub const DEFAULT_GPBB_K: usize = 2;
    pub const DEFAULT_GPBB_SIGMA: f64 = 1e-4;

    /// Defaults with `L̄ = l_init` and `μ̄ = L̄/10`.
    pub fn new(algorithm: Algorithm, l_init: f64) -> Self {
        Self {
            algorithm,
            eps_bar: 1e-6,
            max_iters: 10_000,
            mu_init: 0.1 * l_init,
            l_init,
            rho_l: Self::DEFAULT_RHO_L,
            rho_mu: Self::DEFAULT_RHO_MU,
            gpbb_k: Self::DEFAULT_GPBB_K,
            gpbb_sigma: Self::DEFAULT_GPBB_SIGMA,
            theta0: None,
            record_wall_time: false,
        }
    }

    /// Defaults derived from a power-iteration estimate of `‖A‖²`: the
    /// Lipschitz estimate starts at a tenth of it.
    pub fn from_norm_estimate(algorithm: Algorithm, norm_a_sq: f64) -> Self {
        Self::new(algorithm, norm_a_sq / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.eps_bar > 0.0) {
            return bad(format!("eps_bar must be > 0, got {}", self.eps_bar));
        }
        if !(self.l_init > 0.0) || !self.l_init.is_finite() {
            return bad(format!("l_init must be > 0, got {}", self.l_init));
        }
        if !(self.mu_init >= 0.0) || !self.mu_init.is_finite() {
            return bad(format!("mu_init must be >= 0, got {}", self.mu_init));
        }
        if !(self.rho_l > 1.0) {
            return bad(format!("rho_l must be > 1, got {}", self.rho_l));
        }
        if !(self.rho_mu > 0.0 && self.rho_mu < 1.0) {
            return bad(format!("rho_mu must lie in (0,1), got {}", self.rho_mu));
        }
        if !(0.0..=1.0).contains(&self.gpbb_sigma) {
            return bad(format!("gpbb_sigma must lie in [0,1], got {}", self.gpbb_sigma));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// `‖G(x)‖ ≤ ε̄` at the current iterate (or its projected-gradient successor).
    GradMapAtX,
    /// `‖G_{L_k}(y⁽ᵏ⁾)‖ ≤ ε̄` at the extrapolated point.
    GradMapAtY,
    MaxIters,
}

impl StopReason {
    pub fn converged(self) -> bool {
        !matches!(self, StopReason::MaxIters)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub phi: f64,
    pub grad_map_norm: f64,
    pub mu_k: f64,
    pub l_k: f64,
    pub restarts: usize,
    pub fevals: u64,
    pub gevals: u64,
    pub wall_s: f64,
}

/// Append-only per-iteration log.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceHistory {
    records: Vec<IterRecord>,
}

impl ConvergenceHistory {
    pub fn records(&self) -> &[IterRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterRecord> {
        self.records.last()
    }

    pub fn push(&mut self, rec: IterRecord) {
        if let Some(prev) = self.records.last() {
            debug_assert!(rec.iter > prev.iter);
            debug_assert!(rec.fevals >= prev.fevals && rec.gevals >= prev.gevals);
        }
        self.records.push(rec);
    }

    /// First iteration whose `phi` satisfies `(phi − phi_star)/phi_star ≤ rel`.
    pub fn iters_to_rel_subopt(&self, phi_star: f64, rel: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| (r.phi - phi_star) / phi_star.abs() <= rel)
            .map(|r| r.iter)
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub x: Vec<f64>,
    pub history: ConvergenceHistory,
    pub stop: StopReason,
    pub restarts: usize,
}

/// Runs the solver selected by `config.algorithm`.
pub fn solve<F: Objective + ?Sized>(f: &F, config: &SolverConfig, x0: &[f64]) -> Result<SolveResult> {
    match config.algorithm {
        Algorithm::Gp => gp_solve(f, config, x0),
        Algorithm::Gpbb => gpbb_solve(f, config, x0),
        Algorithm::Nesterov => nesterov_solve(f, config, x0),
        Algorithm::Upn => upn_solve(f, config, x0),
        Algorithm::Upn0 => upn0_solve(f, config, x0),
    }
}

/// Objective wrapper counting evaluations. `value_grad` counts as one
/// function and one gradient evaluation.
pub(crate) struct Counted<'a, F: ?Sized> {
    inner: &'a F,
    fevals: Cell<u64>,
    gevals: Cell<u64>,
}

impl<'a, F: Objective + ?Sized> Counted<'a, F> {
    pub(crate) fn new(inner: &'a F) -> Self {
        Self {
            inner,
            fevals: Cell::new(0),
            gevals: Cell::new(0),
        }
    }

    /// `value_grad` into a fresh buffer, rejecting non-finite results.
    pub(crate) fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut g = vec![0.0; x.len()];
        let v = self.value_grad(x, &mut g)?;
        if !v.is_finite() || g.iter().any(|gi| !gi.is_finite()) {
            return Err(Error::NonFinite("objective evaluation"));
        }
        Ok((v, g))
    }
}

impl<F: Objective + ?Sized> Objective for Counted<'_, F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.fevals.set(self.fevals.get() + 1);
        self.inner.value(x)
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.fevals.set(self.fevals.get() + 1);
        self.gevals.set(self.gevals.get() + 1);
        self.inner.value_grad(x, grad)
    }

    fn project(&self, x: &mut [f64]) {
        self.inner.project(x)
    }
}

/// Shared bookkeeping for building histories.
pub(crate) struct Recorder {
    history: ConvergenceHistory,
    start: Instant,
    timed: bool,
    next_iter: usize,
}

impl Recorder {
    pub(crate) fn new(timed: bool) -> Self {
        Self {
            history: ConvergenceHistory::default(),
            start: Instant::now(),
            timed,
            next_iter: 0,
        }
    }

    /// Index the next pushed row will get.
    pub(crate) fn iter(&self) -> usize {
        self.next_iter
    }

    pub(crate) fn push<F: Objective + ?Sized>(
        &mut self,
        counter: &Counted<'_, F>,
        phi: f64,
        grad_map_norm: f64,
        mu_k: f64,
        l_k: f64,
        restarts: usize,
    ) {
        let wall_s = if self.timed {
            self.start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        self.history.push(IterRecord {
            iter: self.next_iter,
            phi,
            grad_map_norm,
            mu_k,
            l_k,
            restarts,
            fevals: counter.fevals.get(),
            gevals: counter.gevals.get(),
            wall_s,
        });
        self.next_iter += 1;
    }

    pub(crate) fn finish(self) -> ConvergenceHistory {
        self.history
    }
}

pub(crate) fn check_start<F: Objective + ?Sized>(f: &F, x0: &[f64]) -> Result<Vec<f64>> {
    crate::error::check_len("solver start point", f.dim(), x0.len())?;
    let mut x = x0.to_vec();
    f.project(&mut x);
    Ok(x)
}
