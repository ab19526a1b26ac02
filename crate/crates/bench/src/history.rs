//! Convergence-history output: CSV for analysis and whitespace-separated
//! `.dat` files for gnuplot.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use tvnest::solvers::ConvergenceHistory;

use crate::error::{IoContext, Result};

pub const HISTORY_HEADER: &str = "iter,phi,rel_subopt,grad_map_norm,mu_k,L_k,restarts,fevals,gevals,wall_s";

/// Relative suboptimality values at or below this are written as this value,
/// so log-scale plots stay finite.
pub const REL_SUBOPT_FLOOR: f64 = 1e-15;

/// `(phi − φ*)/|φ*|` floored at [`REL_SUBOPT_FLOOR`]; absolute when `φ* = 0`,
/// `NaN` without a reference.
pub fn rel_subopt(phi: f64, phi_star: Option<f64>) -> f64 {
    match phi_star {
        None => f64::NAN,
        Some(s) => {
            let scale = if s == 0.0 { 1.0 } else { s.abs() };
            ((phi - s) / scale).max(REL_SUBOPT_FLOOR)
        }
    }
}

/// Real number with 17 significant digits.
pub fn fmt_real(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn write_history_csv<W: Write>(history: &ConvergenceHistory, phi_star: Option<f64>, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{HISTORY_HEADER}")?;
    for r in history.records() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.iter,
            fmt_real(r.phi),
            fmt_real(rel_subopt(r.phi, phi_star)),
            fmt_real(r.grad_map_norm),
            fmt_real(r.mu_k),
            fmt_real(r.l_k),
            r.restarts,
            r.fevals,
            r.gevals,
            fmt_real(r.wall_s),
        )?;
    }
    w.flush()
}

pub fn emit_history_csv(path: &Path, history: &ConvergenceHistory, phi_star: Option<f64>) -> Result<()> {
    let file = File::create(path).at(path)?;
    write_history_csv(history, phi_star, BufWriter::new(file)).at(path)
}

/// Gnuplot data: `# ` comment header, then `iter rel_subopt mu_k L_k grad_map_norm restarts`.
pub fn write_history_dat<W: Write>(
    history: &ConvergenceHistory,
    phi_star: Option<f64>,
    label: &str,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "# {label}")?;
    match phi_star {
        Some(s) => writeln!(w, "# phi_star {}", fmt_real(s))?,
        None => writeln!(w, "# phi_star none")?,
    }
    writeln!(w, "# rel_subopt floored at {REL_SUBOPT_FLOOR:e}")?;
    writeln!(w, "# iter rel_subopt mu_k L_k grad_map_norm restarts")?;
    for r in history.records() {
        writeln!(
            w,
            "{} {} {} {} {} {}",
            r.iter,
            fmt_real(rel_subopt(r.phi, phi_star)),
            fmt_real(r.mu_k),
            fmt_real(r.l_k),
            fmt_real(r.grad_map_norm),
            r.restarts
        )?;
    }
    w.flush()
}

pub fn emit_history_dat(path: &Path, history: &ConvergenceHistory, phi_star: Option<f64>, label: &str) -> Result<()> {
    let file = File::create(path).at(path)?;
    write_history_dat(history, phi_star, label, BufWriter::new(file)).at(path)
}
