//! Nesterov's method with unknown parameters: backtracking on `L_k`, the
//! local strong-convexity heuristic for `μ_k`, and restarts when the
//! heuristic turns out too optimistic.

use super::{bt_step_with, check_start, rounding_slack, theta_next, Counted, Recorder, SolveResult, SolverConfig, StopReason};
use crate::error::{Error, Result};
use crate::linalg::dist_sq;
use crate::objective::{local_mu, Objective};

/// Maximum number of restart stages in one run.
pub const MAX_STAGES: usize = 200;

/// Per-stage solver quantities.
///
/// `log_prod_factor` holds `ln Π_{i=1}^{k}(1 − √(μ_i/L_i))`, accumulated in log
/// space so long stages do not underflow.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub x_prev: Vec<f64>,
    pub theta_k: f64,
    pub mu_k: f64,
    pub l_k: f64,
    /// `L̃_{k+1}` from the stopping-test backtrack at `x⁽ᵏ⁺¹⁾`.
    pub l_tilde: f64,
    /// `L₀` from the stage's initial projected-gradient step.
    pub l_0: f64,
    pub gamma_1: f64,
    /// `‖G_{L₀}(x⁽⁰⁾)‖²` of the current stage.
    pub g0_norm_sq: f64,
    pub log_prod_factor: f64,
    pub restart_count: usize,
    pub iter: usize,
}

impl SolverState {
    pub fn prod_factor(&self) -> f64 {
        self.log_prod_factor.exp()
    }
}

/// `true` when `μ_k ≠ 0` and
/// `½ L̃_{k+1}⁻¹ ‖G‖² ≤ Π(1 − √(μ_i/L_i)) · (2/μ_k − 1/(2L₀) + 2γ₁/μ_k²) · ‖G_{L₀}(x⁽⁰⁾)‖²`
/// is violated, where `g_new_norm_sq = ‖G_{L̃_{k+1}}(x⁽ᵏ⁺¹⁾)‖²`.
pub fn restart_check(state: &SolverState, g_new_norm_sq: f64) -> bool {
    let mu = state.mu_k;
    if mu == 0.0 {
        return false;
    }
    let lhs = 0.5 * g_new_norm_sq / state.l_tilde;
    let bracket = 2.0 / mu - 1.0 / (2.0 * state.l_0) + 2.0 * state.gamma_1 / (mu * mu);
    let scale = bracket * state.g0_norm_sq;
    if lhs <= 0.0 {
        return false;
    }
    if !(scale > 0.0) {
        return true;
    }
    if scale.is_infinite() {
        return false;
    }
    lhs.ln() > state.log_prod_factor + scale.ln()
}

/// `γ₁ = θ₁(θ₁L₁ − μ₁)/(1 − θ₁)`.
fn gamma_one(theta1: f64, l1: f64, mu1: f64) -> f64 {
    let num = theta1 * (theta1 * l1 - mu1);
    if num <= 0.0 {
        0.0
    } else if theta1 >= 1.0 {
        f64::INFINITY
    } else {
        num / (1.0 - theta1)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Variant {
    Estimating,
    ZeroMu,
}

/// UPN: `μ̄ = config.mu_init`, `L̄ = config.l_init`, tolerance `config.eps_bar`.
pub fn upn_solve<F: Objective + ?Sized>(f: &F, config: &SolverConfig, x0: &[f64]) -> Result<SolveResult> {
    run(f, config, x0, Variant::Estimating)
}

/// UPN with `μ_i ≡ 0` and `θ₁ = 1` (no strong-convexity estimate, no restarts).
pub fn upn0_solve<F: Objective + ?Sized>(f: &F, config: &SolverConfig, x0: &[f64]) -> Result<SolveResult> {
    run(f, config, x0, Variant::ZeroMu)
}

fn run<F: Objective + ?Sized>(f: &F, config: &SolverConfig, x0: &[f64], variant: Variant) -> Result<SolveResult> {
    config.validate()?;
    let f = Counted::new(f);
    let mut rec = Recorder::new(config.record_wall_time);
    let eps = config.eps_bar;

    let mut stage_x0 = check_start(&f, x0)?;
    let (mut stage_f0, mut stage_g0) = f.eval(&stage_x0)?;
    let mut mu_bar = match variant {
        Variant::Estimating => config.mu_init,
        Variant::ZeroMu => 0.0,
    };
    let mut l_bar = config.l_init;
    let mut restarts = 0usize;
    rec.push(&f, stage_f0, f64::NAN, mu_bar, l_bar, 0);

    'stage: loop {
        // Initial projected gradient step of the stage.
        let first = bt_step_with(&f, &stage_x0, stage_f0, &stage_g0, l_bar, config.rho_l)?;
        let l_0 = first.l_tilde;
        let g0_norm_sq = l_0 * l_0 * dist_sq(&stage_x0, &first.x);
        let mu_0 = mu_bar.min(l_0);
        let theta_1 = match variant {
            Variant::Estimating => (mu_0 / l_0).sqrt(),
            Variant::ZeroMu => 1.0,
        };
        rec.push(&f, first.f_x, g0_norm_sq.sqrt(), mu_0, l_0, restarts);

        let mut st = SolverState {
            x: first.x.clone(),
            y: first.x,
            x_prev: stage_x0.clone(),
            theta_k: theta_1,
            mu_k: mu_0,
            l_k: l_0,
            l_tilde: l_0,
            l_0,
            gamma_1: 0.0,
            g0_norm_sq,
            log_prod_factor: 0.0,
            restart_count: restarts,
            iter: rec.iter(),
        };
        let mut f_xk = first.f_x;

        for k in 1usize.. {
            if rec.iter() > config.max_iters {
                let x = std::mem::take(&mut st.x);
                return Ok(finish(x, rec, StopReason::MaxIters, restarts));
            }
            let (f_y, g_y) = f.eval(&st.y)?;
            let main = bt_step_with(&f, &st.y, f_y, &g_y, st.l_k, config.rho_l)?;
            st.l_k = main.l_tilde;
            let x_next = main.x;
            let f_next = main.f_x;
            let (_, g_next) = f.eval(&x_next)?;
            let check = bt_step_with(&f, &x_next, f_next, &g_next, st.l_k, config.rho_l)?;
            st.l_tilde = check.l_tilde;
            let gx_sq = st.l_tilde * st.l_tilde * dist_sq(&x_next, &check.x);
            let gx = gx_sq.sqrt();
            let gy = st.l_k * dist_sq(&st.y, &x_next).sqrt();

            if gx <= eps {
                rec.push(&f, check.f_x, gx, st.mu_k, st.l_k, restarts);
                return Ok(finish(check.x, rec, StopReason::GradMapAtX, restarts));
            }
            if gy <= eps {
                rec.push(&f, f_next, gy, st.mu_k, st.l_k, restarts);
                return Ok(finish(x_next, rec, StopReason::GradMapAtY, restarts));
            }

            if variant == Variant::Estimating {
                let m = local_mu(f_xk, f_y, &g_y, &st.x, &st.y);
                // A numerator at rounding level carries no curvature information.
                let noise = m.is_finite() && (m * 0.5 * dist_sq(&st.x, &st.y)).abs() <= rounding_slack(f_xk, f_y, st.x.len());
                if !noise {
                    st.mu_k = st.mu_k.min(m.max(0.0));
                }
                st.mu_k = st.mu_k.min(st.l_k);
            }
            rec.push(&f, f_next, gx, st.mu_k, st.l_k, restarts);
            st.iter = rec.iter();

            let ratio = st.mu_k / st.l_k;
            if variant == Variant::Estimating {
                if k == 1 {
                    st.gamma_1 = gamma_one(st.theta_k, st.l_k, st.mu_k);
                }
                st.log_prod_factor += (1.0 - ratio.sqrt()).ln();
                if restart_check(&st, gx_sq) {
                    restarts += 1;
                    if restarts >= MAX_STAGES {
                        return Err(Error::RestartLimit(MAX_STAGES));
                    }
                    mu_bar = config.rho_mu * st.mu_k;
                    l_bar = st.l_k;
                    stage_x0 = x_next;
                    stage_f0 = f_next;
                    stage_g0 = g_next;
                    continue 'stage;
                }
            }

            let theta_new = theta_next(st.theta_k, ratio);
            let beta = st.theta_k * (1.0 - st.theta_k) / (st.theta_k * st.theta_k + theta_new);
            st.y = x_next
                .iter()
                .zip(&st.x)
                .map(|(xn, xo)| xn + beta * (xn - xo))
                .collect();
            st.x_prev = std::mem::replace(&mut st.x, x_next);
            st.theta_k = theta_new;
            f_xk = f_next;
        }
        unreachable!("iteration counter overflow");
    }
}

fn finish(x: Vec<f64>, rec: Recorder, stop: StopReason, restarts: usize) -> SolveResult {
    SolveResult {
        x,
        history: rec.finish(),
        stop,
        restarts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::objective::BoxQuadratic;
    use crate::solvers::Algorithm;

    fn state(mu: f64) -> SolverState {
        SolverState {
            x: vec![],
            y: vec![],
            x_prev: vec![],
            theta_k: 0.1,
            mu_k: mu,
            l_k: 10.0,
            l_tilde: 10.0,
            l_0: 10.0,
            gamma_1: 0.0,
            g0_norm_sq: 1.0,
            log_prod_factor: -50.0,
            restart_count: 0,
            iter: 5,
        }
    }

    #[test]
    fn zero_mu_never_restarts() {
        assert!(!restart_check(&state(0.0), 1e10));
    }

    #[test]
    fn restart_fires_only_when_bound_is_violated() {
        let s = state(1.0);
        // bound = e^-50 · (2 − 0.05) · 1
        let bound = (-50.0f64).exp() * 1.95;
        let g_ok = 2.0 * 10.0 * bound * 0.99;
        let g_bad = 2.0 * 10.0 * bound * 1.01;
        assert!(!restart_check(&s, g_ok));
        assert!(restart_check(&s, g_bad));
    }

    #[test]
    fn starting_at_minimizer_stops_immediately() {
        let c = vec![0.5, 0.25];
        let f = BoxQuadratic::new(DenseMatrix::diag(&[1.0, 3.0]), c.clone()).unwrap();
        let r = upn_solve(&f, &SolverConfig::new(Algorithm::Upn, 1.0), &c).unwrap();
        assert!(r.stop.converged());
        assert!(r.history.len() <= 3);
        let r0 = upn0_solve(&f, &SolverConfig::new(Algorithm::Upn0, 1.0), &c).unwrap();
        assert!(r0.stop.converged());
    }

    #[test]
    fn upn0_has_zero_mu_and_no_restarts() {
        let f = BoxQuadratic::with_spectrum(12, 1e-3, 1.0, vec![0.5; 12], 3).unwrap();
        let mut cfg = SolverConfig::new(Algorithm::Upn0, 0.1);
        cfg.eps_bar = 1e-8;
        let r = upn0_solve(&f, &cfg, &[0.0; 12]).unwrap();
        assert_eq!(r.restarts, 0);
        assert!(r.history.records().iter().all(|h| h.mu_k == 0.0));
    }

    #[test]
    fn restart_scales_mu_by_rho() {
        // Stiff error almost gone, μ̄ far above the soft curvature: the first
        // steps only see the stiff direction, so μ_k stays too high.
        let f = BoxQuadratic::new(DenseMatrix::diag(&[1.0, 1e-2]), vec![0.5, 0.5]).unwrap();
        let mut cfg = SolverConfig::new(Algorithm::Upn, 1.0);
        cfg.mu_init = 0.9;
        cfg.eps_bar = 1e-10;
        let r = upn_solve(&f, &cfg, &[0.5 - 1e-4, 0.05]).unwrap();
        assert!(r.stop.converged());
        assert!(r.restarts >= 1);
        let recs = r.history.records();
        for w in recs.windows(2).filter(|w| w[1].restarts > w[0].restarts) {
            assert_eq!(w[1].mu_k, cfg.rho_mu * w[0].mu_k);
            assert_eq!(w[1].l_k, w[0].l_k);
        }
    }

    #[test]
    fn estimates_are_monotone_between_restarts() {
        let f = BoxQuadratic::with_spectrum(20, 1e-3, 1.0, vec![0.5; 20], 5).unwrap();
        let mut cfg = SolverConfig::new(Algorithm::Upn, 0.05);
        cfg.eps_bar = 1e-9;
        let r = upn_solve(&f, &cfg, &[0.0; 20]).unwrap();
        assert!(r.stop.converged());
        for w in r.history.records().windows(2) {
            if w[0].restarts == w[1].restarts {
                assert!(w[1].mu_k <= w[0].mu_k);
                assert!(w[1].l_k >= w[0].l_k);
            }
            assert!(w[1].mu_k <= w[1].l_k);
        }
    }
}
