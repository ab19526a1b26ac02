use super::{bt_step_with, check_start, Counted, Recorder, SolveResult, SolverConfig, StopReason};
use crate::error::Result;
use crate::objective::Objective;

/// Gradient projection `x⁽ᵏ⁺¹⁾ = P_Q(x⁽ᵏ⁾ − ∇f(x⁽ᵏ⁾)/L̃_k)` with backtracking on `L̃_k`.
///
/// The Lipschitz estimate only grows, starting from `config.l_init`. Stops
/// when `‖G_{L̃_k}(x⁽ᵏ⁾)‖ ≤ ε̄`, returning `x⁽ᵏ⁾`.
pub fn gp_solve<F: Objective + ?Sized>(f: &F, config: &SolverConfig, x0: &[f64]) -> Result<SolveResult> {
    config.validate()?;
    let f = Counted::new(f);
    let mut rec = Recorder::new(config.record_wall_time);
    let mut x = check_start(&f, x0)?;
    let (mut f_x, mut g) = f.eval(&x)?;
    let mut l = config.l_init;

    loop {
        let step = bt_step_with(&f, &x, f_x, &g, l, config.rho_l)?;
        l = step.l_tilde;
        let gm = step.grad_map_norm(&x);
        rec.push(&f, f_x, gm, 0.0, l, 0);
        if gm <= config.eps_bar {
            return Ok(finish(x, rec, StopReason::GradMapAtX));
        }
        if rec.iter() > config.max_iters {
            return Ok(finish(x, rec, StopReason::MaxIters));
        }
        x = step.x;
        (f_x, g) = f.eval(&x)?;
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
