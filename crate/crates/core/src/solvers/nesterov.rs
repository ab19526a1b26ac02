use super::{check_start, theta_next, Counted, Recorder, SolveResult, SolverConfig, StopReason};
use crate::error::{Error, Result};
use crate::objective::Objective;

/// Nesterov's optimal method with known `μ = config.mu_init` and `L = config.l_init`.
///
/// `x⁽ᵏ⁺¹⁾ = P_Q(y⁽ᵏ⁾ − ∇f(y⁽ᵏ⁾)/L)`, `θ_{k+1}` from the `μ/L` recurrence,
/// `β_k = θ_k(1 − θ_k)/(θ_k² + θ_{k+1})`, `y⁽ᵏ⁺¹⁾ = x⁽ᵏ⁺¹⁾ + β_k(x⁽ᵏ⁺¹⁾ − x⁽ᵏ⁾)`.
/// Stops when `‖G_L(y⁽ᵏ⁾)‖ ≤ ε̄`, returning `x⁽ᵏ⁺¹⁾`.
///
/// `θ₀` defaults to `√(μ/L)` and must lie in `[√(μ/L), 1]`.
pub fn nesterov_solve<F: Objective + ?Sized>(f: &F, config: &SolverConfig, x0: &[f64]) -> Result<SolveResult> {
    config.validate()?;
    let (mu, l) = (config.mu_init, config.l_init);
    if mu > l {
        return Err(Error::InvalidParameter(format!("mu ({mu}) exceeds L ({l})")));
    }
    let ratio = mu / l;
    let mut theta = config.theta0.unwrap_or_else(|| ratio.sqrt());
    if !(theta >= ratio.sqrt() && theta <= 1.0 && theta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "theta0 = {theta} outside [sqrt(mu/L), 1] = [{}, 1]",
            ratio.sqrt()
        )));
    }

    let f = Counted::new(f);
    let mut rec = Recorder::new(config.record_wall_time);
    let mut x = check_start(&f, x0)?;
    let mut y = x.clone();
    rec.push(&f, f.value(&x)?, f64::NAN, mu, l, 0);

    loop {
        let (_, g) = f.eval(&y)?;
        let mut x_new: Vec<f64> = y.iter().zip(&g).map(|(yi, gi)| yi - gi / l).collect();
        f.project(&mut x_new);
        let gm = l * crate::linalg::dist_sq(&y, &x_new).sqrt();
        let f_new = f.value(&x_new)?;
        if !f_new.is_finite() {
            return Err(Error::NonFinite("nesterov iterate"));
        }
        rec.push(&f, f_new, gm, mu, l, 0);
        if gm <= config.eps_bar {
            return Ok(finish(x_new, rec, StopReason::GradMapAtY));
        }
        if rec.iter() > config.max_iters {
            return Ok(finish(x_new, rec, StopReason::MaxIters));
        }
        let theta_new = theta_next(theta, ratio);
        let beta = theta * (1.0 - theta) / (theta * theta + theta_new);
        y.iter_mut()
            .zip(x_new.iter().zip(&x))
            .for_each(|(yi, (xn, xo))| *yi = xn + beta * (xn - xo));
        x = x_new;
        theta = theta_new;
    }
}

fn finish(x: Vec<f64>, rec: Recorder, stop: StopReason) -> SolveResult {
    SolveResult {
        x,
        history: rec.finish(),
        stop,
        restarts: 0,
    }
}
