use crate::error::{Error, Result};
use crate::linalg::dist_sq;
use crate::objective::Objective;

/// Hard cap on Lipschitz increases inside one backtracking call.
pub const MAX_BACKTRACKS: usize = 100;

/// Lower bound on the multiple of machine epsilon used by [`rounding_slack`].
pub const ROUNDING_SLACK_FACTOR: f64 = 8.0;

/// Size below which `f(x) − f(y) − ∇f(y)ᵀ(x − y)` is indistinguishable from
/// rounding error in `f`, for an objective summed over about `n` terms:
/// `ε·max(8, √n)·(|f(x)| + |f(y)|)`.
pub fn rounding_slack(f_x: f64, f_y: f64, n: usize) -> f64 {
    let factor = (n as f64).sqrt().max(ROUNDING_SLACK_FACTOR);
    factor * f64::EPSILON * (f_x.abs() + f_y.abs())
}

/// Result of one backtracked projected-gradient step.
#[derive(Clone, Debug, PartialEq)]
pub struct BtStep {
    pub x: Vec<f64>,
    pub f_x: f64,
    pub l_tilde: f64,
    pub backtracks: usize,
}

impl BtStep {
    /// `‖G_{L̃}(y)‖ = L̃‖y − x‖`.
    pub fn grad_map_norm(&self, y: &[f64]) -> f64 {
        self.l_tilde * dist_sq(y, &self.x).sqrt()
    }
}

/// Backtracking projected-gradient step from `y`, evaluating `f(y)` and `∇f(y)`.
pub fn bt_step<F: Objective + ?Sized>(f: &F, y: &[f64], l_bar: f64, rho_l: f64) -> Result<BtStep> {
    let mut g = vec![0.0; y.len()];
    let f_y = f.value_grad(y, &mut g)?;
    bt_step_with(f, y, f_y, &g, l_bar, rho_l)
}

/// Backtracking step reusing a known `f(y)` and `∇f(y)`.
///
/// Finds the smallest `n ≥ 0` with `L̃ = L̄·ρ_Lⁿ` such that
/// `x = P_Q(y − ∇f(y)/L̃)` satisfies
/// `f(x) ≤ f(y) + ∇f(y)ᵀ(x − y) + ½L̃‖x − y‖²`, up to [`rounding_slack`],
/// or else the sufficient condition `‖∇f(x) − ∇f(y)‖ ≤ L̃‖x − y‖`.
/// Without these safeguards, steps near the optimum fail the test on rounding
/// noise alone and `L̃` grows without bound.
pub fn bt_step_with<F: Objective + ?Sized>(
    f: &F,
    y: &[f64],
    f_y: f64,
    grad_y: &[f64],
    l_bar: f64,
    rho_l: f64,
) -> Result<BtStep> {
    if !(l_bar > 0.0) || !l_bar.is_finite() {
        return Err(Error::InvalidParameter(format!("L_bar must be > 0, got {l_bar}")));
    }
    if !(rho_l > 1.0) {
        return Err(Error::InvalidParameter(format!("rho_L must be > 1, got {rho_l}")));
    }
    if !f_y.is_finite() || grad_y.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("bt_step at y"));
    }
    let mut l_tilde = l_bar;
    let mut x = vec![0.0; y.len()];
    for backtracks in 0..=MAX_BACKTRACKS {
        x.iter_mut()
            .zip(y.iter().zip(grad_y))
            .for_each(|(xi, (yi, gi))| *xi = yi - gi / l_tilde);
        f.project(&mut x);
        let f_x = f.value(&x)?;
        if !f_x.is_finite() {
            return Err(Error::NonFinite("bt_step trial point"));
        }
        let mut lin = 0.0;
        let mut dsq = 0.0;
        for ((xi, yi), gi) in x.iter().zip(y).zip(grad_y) {
            let d = xi - yi;
            lin += gi * d;
            dsq += d * d;
        }
        let accept = f_x - f_y - lin <= 0.5 * l_tilde * dsq + rounding_slack(f_x, f_y, y.len())
            || gradient_test(f, &x, grad_y, l_tilde, dsq)?;
        if accept {
            return Ok(BtStep {
                x,
                f_x,
                l_tilde,
                backtracks,
            });
        }
        l_tilde *= rho_l;
    }
    Err(Error::BacktrackLimit(MAX_BACKTRACKS))
}

/// `‖∇f(x) − ∇f(y)‖ ≤ L̃‖x − y‖`, which implies the descent inequality.
///
/// Consulted only when the function-value test fails. Near a minimizer
/// `½L̃‖x − y‖²` can fall below the rounding error of `f` itself, and the
/// value test then rejects good steps; gradient differences stay accurate.
fn gradient_test<F: Objective + ?Sized>(f: &F, x: &[f64], grad_y: &[f64], l_tilde: f64, dsq: f64) -> Result<bool> {
    if dsq == 0.0 {
        return Ok(true);
    }
    let mut g = vec![0.0; x.len()];
    f.value_grad(x, &mut g)?;
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("bt_step trial gradient"));
    }
    let diff_sq: f64 = g.iter().zip(grad_y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(diff_sq <= l_tilde * l_tilde * dsq)
}

/// Positive root of `θ² = (1 − θ)θ_k² + r·θ`, computed without cancellation.
pub fn theta_next(theta_k: f64, ratio: f64) -> f64 {
    let tk2 = theta_k * theta_k;
    // θ² + bθ − θ_k² = 0
    let b = tk2 - ratio;
    let disc = (b * b + 4.0 * tk2).sqrt();
    if b > 0.0 {
        2.0 * tk2 / (b + disc)
    } else {
        0.5 * (disc - b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::objective::BoxQuadratic;

    fn quad_1d(h: f64) -> BoxQuadratic {
        BoxQuadratic::new(DenseMatrix::diag(&[h]), vec![0.0]).unwrap()
    }

    #[test]
    fn no_backtrack_when_l_bar_dominates() {
        let f = quad_1d(2.0);
        let s = bt_step(&f, &[0.8], 3.0, 1.5).unwrap();
        assert_eq!(s.backtracks, 0);
        assert_eq!(s.l_tilde, 3.0);
    }

    #[test]
    fn exact_backtrack_count_for_quadratic() {
        let f = quad_1d(4.0);
        let s = bt_step(&f, &[0.8], 1.0, 2.0).unwrap();
        assert_eq!(s.backtracks, 2);
        assert_eq!(s.l_tilde, 4.0);
        assert!(s.l_tilde >= 1.0);
    }

    #[test]
    fn invalid_parameters() {
        let f = quad_1d(1.0);
        assert!(bt_step(&f, &[0.5], 0.0, 2.0).is_err());
        assert!(bt_step(&f, &[0.5], 1.0, 1.0).is_err());
        assert!(bt_step_with(&f, &[0.5], f64::NAN, &[0.5], 1.0, 2.0).is_err());
    }

    #[test]
    fn theta_examples() {
        let r: f64 = 0.09;
        assert!((theta_next(r.sqrt(), r) - r.sqrt()).abs() < 1e-15);
        assert!((theta_next(1.0, 0.0) - 0.618_033_988_749_894_8).abs() < 1e-15);
        assert_eq!(theta_next(1.0, 1.0), 1.0);
    }

    #[test]
    fn theta_satisfies_recurrence() {
        for &tk in &[1.0, 0.5, 0.1, 1e-3, 1e-8] {
            for &r in &[0.0f64, 1e-12, 1e-6, 1e-2, 0.5, 1.0] {
                if r.sqrt() > tk {
                    continue;
                }
                let t = theta_next(tk, r);
                assert!(t > 0.0 && t <= 1.0);
                let resid = t * t - ((1.0 - t) * tk * tk + r * t);
                assert!(resid.abs() <= 1e-15 * (1.0 + tk * tk), "{tk} {r} {resid}");
            }
        }
    }
}
