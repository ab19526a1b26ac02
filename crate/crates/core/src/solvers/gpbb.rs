use std::collections::VecDeque;

use super::{check_start, Counted, Recorder, SolveResult, SolverConfig, StopReason};
use crate::error::{Error, Result};
use crate::linalg::{dist_sq, dot};
use crate::objective::Objective;

const BB_MIN: f64 = 1e-10;
const BB_MAX: f64 = 1e10;
const MAX_REDUCTIONS: usize = 60;
const BETA_INIT: f64 = 0.95;

/// Barzilai–Borwein step with the projected box and a nonmonotone line search.
///
/// `θ₀ = 1`, then `θ_k = ‖Δx‖²/⟨Δx, Δg⟩`. Trial points
/// `x̄ = P_Q(x⁽ᵏ⁾ − βθ_k∇f(x⁽ᵏ⁾))` start at `β = 0.95` and square `β` until
/// `f(x̄) < f̂ − σ∇f(x⁽ᵏ⁾)ᵀ(x⁽ᵏ⁾ − x̄)` with `f̂` the largest of the last `K+1`
/// objective values.
///
/// When `⟨Δx, Δg⟩ ≤ 0` the previous step is reused, clipped to `[1e-10, 1e10]`.
/// The run stops once a trial step gives `‖G_{1/(βθ_k)}(x⁽ᵏ⁾)‖ ≤ ε̄` and
/// returns `x⁽ᵏ⁾` (or the trial point, if it has lower objective).
pub fn gpbb_solve<F: Objective + ?Sized>(f: &F, config: &SolverConfig, x0: &[f64]) -> Result<SolveResult> {
    config.validate()?;
    let f = Counted::new(f);
    let mut rec = Recorder::new(config.record_wall_time);
    let mut x = check_start(&f, x0)?;
    let (mut f_x, mut g) = f.eval(&x)?;
    let mut recent: VecDeque<f64> = VecDeque::with_capacity(config.gpbb_k + 1);
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut theta: f64 = 1.0;

    loop {
        if let Some((xp, gp)) = &prev {
            theta = bb_step(&x, xp, &g, gp).unwrap_or_else(|| theta.clamp(BB_MIN, BB_MAX));
        }

        if recent.len() == config.gpbb_k + 1 {
            recent.pop_front();
        }
        recent.push_back(f_x);
        let f_hat = recent.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let mut beta = BETA_INIT;
        let mut trial = vec![0.0; x.len()];
        let mut accepted = None;
        for _ in 0..=MAX_REDUCTIONS {
            let step = beta * theta;
            trial
                .iter_mut()
                .zip(x.iter().zip(&g))
                .for_each(|(t, (xi, gi))| *t = xi - step * gi);
            f.project(&mut trial);
            let gm = dist_sq(&x, &trial).sqrt() / step;
            let f_trial = f.value(&trial)?;
            if !f_trial.is_finite() {
                return Err(Error::NonFinite("gpbb trial point"));
            }
            if gm <= config.eps_bar {
                let l_k = 1.0 / step;
                if f_trial < f_x {
                    rec.push(&f, f_trial, gm, 0.0, l_k, 0);
                    return Ok(finish(trial, rec, StopReason::GradMapAtX));
                }
                rec.push(&f, f_x, gm, 0.0, l_k, 0);
                return Ok(finish(x, rec, StopReason::GradMapAtX));
            }
            let descent: f64 = dot(&g, &x) - dot(&g, &trial);
            if f_trial < f_hat - config.gpbb_sigma * descent {
                accepted = Some((f_trial, gm, step));
                break;
            }
            beta *= beta;
        }
        let (f_new, gm, step) = accepted.ok_or(Error::LineSearchFailed(MAX_REDUCTIONS))?;

        rec.push(&f, f_x, gm, 0.0, 1.0 / step, 0);
        if rec.iter() > config.max_iters {
            return Ok(finish(x, rec, StopReason::MaxIters));
        }
        let x_new = trial;
        let (f_chk, g_new) = f.eval(&x_new)?;
        debug_assert_eq!(f_chk, f_new);
        prev = Some((std::mem::replace(&mut x, x_new), std::mem::replace(&mut g, g_new)));
        f_x = f_chk;
    }
}

/// `‖Δx‖²/⟨Δx, Δg⟩`, or `None` when the curvature term is not positive.
pub(crate) fn bb_step(x: &[f64], x_prev: &[f64], g: &[f64], g_prev: &[f64]) -> Option<f64> {
    let mut sx = 0.0;
    let mut sg = 0.0;
    for i in 0..x.len() {
        let dx = x[i] - x_prev[i];
        sx += dx * dx;
        sg += dx * (g[i] - g_prev[i]);
    }
    let bb = sx / sg;
    (sg > 0.0 && bb.is_finite()).then_some(bb)
}

fn finish(x: Vec<f64>, rec: Recorder, stop: StopReason) -> SolveResult {
    SolveResult {
        x,
        history: rec.finish(),
        stop,
        restarts: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::objective::BoxQuadratic;
    use crate::solvers::Algorithm;

    #[test]
    fn starts_at_minimizer() {
        let c = vec![0.3, 0.6];
        let f = BoxQuadratic::new(DenseMatrix::diag(&[1.0, 5.0]), c.clone()).unwrap();
        let r = gpbb_solve(&f, &SolverConfig::new(Algorithm::Gpbb, 1.0), &c).unwrap();
        assert_eq!(r.stop, StopReason::GradMapAtX);
        assert_eq!(r.history.len(), 1);
    }

    #[test]
    fn bb_step_lies_in_inverse_spectrum() {
        let (lo, hi) = (0.5, 20.0);
        let f = BoxQuadratic::with_spectrum(6, lo, hi, vec![0.5; 6], 4).unwrap();
        let h = f.hessian();
        for seed in 0..20u64 {
            let xp: Vec<f64> = (0..6).map(|i| ((seed * 7 + i) as f64).sin()).collect();
            let x: Vec<f64> = (0..6).map(|i| ((seed * 3 + 2 * i) as f64).cos()).collect();
            let mut g = vec![0.0; 6];
            let mut gp = vec![0.0; 6];
            f.value_grad(&x, &mut g).unwrap();
            f.value_grad(&xp, &mut gp).unwrap();
            let theta = bb_step(&x, &xp, &g, &gp).unwrap();
            let dx: Vec<f64> = x.iter().zip(&xp).map(|(a, b)| a - b).collect();
            let hdx = crate::linalg::LinearOperator::apply(h, &dx).unwrap();
            let rayleigh_inv = dot(&dx, &dx) / dot(&dx, &hdx);
            assert!((theta - rayleigh_inv).abs() <= 1e-12 * rayleigh_inv);
            assert!(theta >= (1.0 / hi) * (1.0 - 1e-12) && theta <= (1.0 / lo) * (1.0 + 1e-12));
        }
        assert_eq!(bb_step(&[1.0], &[0.0], &[-1.0], &[0.0]), None);
    }

    #[test]
    fn converges_on_interior_quadratic() {
        let f = BoxQuadratic::with_spectrum(6, 0.5, 20.0, vec![0.5; 6], 4).unwrap();
        let mut cfg = SolverConfig::new(Algorithm::Gpbb, 1.0);
        cfg.eps_bar = 1e-10;
        let r = gpbb_solve(&f, &cfg, &[0.0; 6]).unwrap();
        assert!(r.stop.converged());
        assert!(r.history.last().unwrap().phi < 1e-18);
    }

    #[test]
    fn monotone_when_k_is_zero() {
        let f = BoxQuadratic::with_spectrum(8, 1e-2, 10.0, vec![0.9; 8], 2).unwrap();
        let mut cfg = SolverConfig::new(Algorithm::Gpbb, 1.0);
        cfg.gpbb_k = 0;
        cfg.eps_bar = 1e-9;
        cfg.max_iters = 500;
        let r = gpbb_solve(&f, &cfg, &[0.0; 8]).unwrap();
        let h = r.history.records();
        assert!(h.windows(2).all(|w| w[1].phi <= w[0].phi));
    }
}
