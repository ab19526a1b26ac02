//! Grid runs over `(α, τ, solver)` with shared data, warm start and reference.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use tvnest::linalg::{power_iter_norm_sq, CsrMatrix};
use tvnest::objective::TvRegProblem;
use tvnest::solvers::{solve, ConvergenceHistory, SolverConfig, StopReason};
use tvnest::tomo::{make_test_problem, TestProblem};
use tvnest::tv::DIFF_NORM_SQ_BOUND;
use tvnest::Algorithm;

use crate::config::{ExperimentConfig, ReferencePolicy};
use crate::error::{IoContext, Result};
use crate::history::{emit_history_csv, emit_history_dat, fmt_real};
use crate::reference::{cache_path, compute_reference, reference_key, Reference};

/// Power-iteration steps for the `‖A‖²` estimate.
pub const NORM_ESTIMATE_ITERS: usize = 100;

/// Solver settings for a tomography problem with `‖A‖² ≈ norm_a_sq`.
///
/// Estimating solvers start from `L̄ = ‖A‖²/10`, `μ̄ = L̄/10`. Nesterov gets
/// the Lipschitz bound `‖A‖² + 12α/τ` with `μ = 0` and `θ₀ = 1`.
pub fn default_solver_config(algorithm: Algorithm, norm_a_sq: f64, alpha: f64, tau: f64) -> SolverConfig {
    let mut cfg = SolverConfig::from_norm_estimate(algorithm, norm_a_sq);
    if algorithm == Algorithm::Nesterov {
        cfg.l_init = norm_a_sq + alpha * DIFF_NORM_SQ_BOUND / tau;
        cfg.mu_init = 0.0;
        cfg.theta0 = Some(1.0);
    }
    cfg
}

/// Problem data shared by every cell of an experiment.
pub struct SharedProblem {
    pub test: TestProblem,
    pub norm_a_sq: f64,
}

impl SharedProblem {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let spec = cfg.problem.spec(1.0, 1.0)?;
        let test = make_test_problem(&spec)?;
        let norm_a_sq = power_iter_norm_sq(test.matrix(), NORM_ESTIMATE_ITERS, spec.seed);
        Ok(Self { test, norm_a_sq })
    }

    pub fn objective(&self, alpha: f64, tau: f64) -> Result<TvRegProblem<&CsrMatrix>> {
        Ok(TvRegProblem::new(
            self.test.matrix(),
            self.test.rhs().to_vec(),
            self.test.spec.dims,
            alpha,
            tau,
        )?)
    }
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub alpha: f64,
    pub tau: f64,
    pub config: SolverConfig,
    pub history: ConvergenceHistory,
    pub stop: StopReason,
    pub restarts: usize,
    pub phi_star: f64,
    pub x: Option<Vec<f64>>,
    pub elapsed_s: f64,
    pub csv: PathBuf,
    pub dat: PathBuf,
}

impl RunRecord {
    pub fn algorithm(&self) -> Algorithm {
        self.config.algorithm
    }

    /// `φ* ≤ min φ_k + 1e-12·|φ*|`.
    pub fn reference_is_consistent(&self) -> bool {
        let min_phi = self.history.records().iter().map(|r| r.phi).fold(f64::INFINITY, f64::min);
        self.phi_star <= min_phi + 1e-12 * self.phi_star.abs()
    }
}

#[derive(Debug)]
pub struct CellFailure {
    pub label: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub records: Vec<RunRecord>,
    pub failures: Vec<CellFailure>,
    pub manifest: PathBuf,
}

impl ExperimentOutput {
    pub fn find(&self, alpha: f64, tau: f64, algorithm: Algorithm) -> Option<&RunRecord> {
        self.records
            .iter()
            .find(|r| r.alpha == alpha && r.tau == tau && r.algorithm() == algorithm)
    }
}

pub fn cell_label(problem: &str, alpha: f64, tau: f64, algorithm: Option<Algorithm>) -> String {
    let base = format!("{problem}_a{alpha:?}_t{tau:?}");
    match algorithm {
        Some(a) => format!("{base}_{a}"),
        None => base,
    }
}

/// The cached or freshly computed reference for one `(α, τ)` cell.
pub fn reference_for(
    cfg: &ExperimentConfig,
    shared: &SharedProblem,
    alpha: f64,
    tau: f64,
) -> Result<Reference> {
    let f = shared.objective(alpha, tau)?;
    let mut base = default_solver_config(Algorithm::Upn, shared.norm_a_sq, alpha, tau);
    base.eps_bar = cfg.eps_bar;
    base.max_iters = cfg.reference_max_iters;
    let dir = cfg.cache_dir();
    if cfg.reference == ReferencePolicy::Recompute {
        let stale = cache_path(&dir, &reference_key(&f, &shared.test.x0, &base));
        if stale.exists() {
            fs::remove_file(&stale).at(&stale)?;
        }
    }
    compute_reference(&f, &shared.test.x0, &base, Some(&dir))
}

/// Runs one solver against a known `φ*` and writes its history files.
pub fn run_cell(
    cfg: &ExperimentConfig,
    shared: &SharedProblem,
    phi_star: f64,
    alpha: f64,
    tau: f64,
    algorithm: Algorithm,
) -> Result<RunRecord> {
    let f = shared.objective(alpha, tau)?;
    let mut sc = default_solver_config(algorithm, shared.norm_a_sq, alpha, tau);
    sc.eps_bar = cfg.eps_bar;
    sc.max_iters = cfg.max_iters;
    sc.record_wall_time = cfg.timing;
    let t = Instant::now();
    let run = solve(&f, &sc, &shared.test.x0)?;
    let elapsed_s = t.elapsed().as_secs_f64();

    let label = cell_label(&cfg.problem.name(), alpha, tau, Some(algorithm));
    let csv = cfg.out_dir.join(format!("{label}.csv"));
    let dat = cfg.out_dir.join(format!("{label}.dat"));
    emit_history_csv(&csv, &run.history, Some(phi_star))?;
    emit_history_dat(&dat, &run.history, Some(phi_star), &label)?;
    let x = if cfg.save_solution {
        let path = cfg.out_dir.join(format!("{label}.vol"));
        let vol = tvnest::Volume::from_vec(shared.test.spec.dims, run.x.clone())?;
        let file = fs::File::create(&path).at(&path)?;
        vol.write_binary(std::io::BufWriter::new(file)).at(&path)?;
        Some(run.x)
    } else {
        None
    };
    Ok(RunRecord {
        alpha,
        tau,
        config: sc,
        history: run.history,
        stop: run.stop,
        restarts: run.restarts,
        phi_star,
        x,
        elapsed_s,
        csv,
        dat,
    })
}

/// Builds the problem once, computes one reference per `(α, τ)`, runs every
/// solver cell in parallel and writes per-cell CSV and `.dat` files plus
/// `config.txt` and `manifest.txt` into `cfg.out_dir`.
///
/// A failing cell is reported in [`ExperimentOutput::failures`]; the other
/// cells still run and are written.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir).at(&cfg.out_dir)?;
    let config_path = cfg.out_dir.join("config.txt");
    fs::write(&config_path, cfg.to_kv()).at(&config_path)?;

    let shared = SharedProblem::build(cfg)?;
    let grid: Vec<(f64, f64)> = cfg
        .alphas
        .iter()
        .flat_map(|&a| cfg.taus.iter().map(move |&t| (a, t)))
        .collect();
    let references: Vec<Result<Reference>> = grid
        .par_iter()
        .map(|&(a, t)| reference_for(cfg, &shared, a, t))
        .collect();

    let cells: Vec<(usize, Algorithm)> = (0..grid.len())
        .flat_map(|g| cfg.solvers.iter().map(move |&s| (g, s)))
        .collect();
    let outcomes: Vec<(String, Result<RunRecord>)> = cells
        .par_iter()
        .map(|&(g, alg)| {
            let (a, t) = grid[g];
            let label = cell_label(&cfg.problem.name(), a, t, Some(alg));
            let res = match &references[g] {
                Ok(r) => run_cell(cfg, &shared, r.phi_star, a, t, alg),
                Err(e) => Err(crate::error::Error::Config(format!("no reference: {e}"))),
            };
            (label, res)
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (label, res) in outcomes {
        match res {
            Ok(r) => records.push(r),
            Err(e) => failures.push(CellFailure {
                label,
                message: e.to_string(),
            }),
        }
    }
    let manifest = write_manifest(cfg, &records, &failures, &grid, &references)?;
    Ok(ExperimentOutput {
        records,
        failures,
        manifest,
    })
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).at(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn write_manifest(
    cfg: &ExperimentConfig,
    records: &[RunRecord],
    failures: &[CellFailure],
    grid: &[(f64, f64)],
    references: &[Result<Reference>],
) -> Result<PathBuf> {
    let mut files: Vec<PathBuf> = vec![cfg.out_dir.join("config.txt")];
    for r in records {
        files.push(r.csv.clone());
        files.push(r.dat.clone());
    }
    files.sort();
    let mut text = String::from("# sha256  file\n");
    for f in &files {
        let name = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        text.push_str(&format!("{}  {}\n", sha256_file(f)?, name));
    }
    text.push_str("# references: alpha tau phi_star iters\n");
    for (&(a, t), r) in grid.iter().zip(references) {
        match r {
            Ok(r) => text.push_str(&format!("# ref {a:?} {t:?} {} {}\n", fmt_real(r.phi_star), r.iters)),
            Err(e) => text.push_str(&format!("# ref {a:?} {t:?} failed: {e}\n")),
        }
    }
    let mut sorted: Vec<&CellFailure> = failures.iter().collect();
    sorted.sort_by(|a, b| a.label.cmp(&b.label));
    for f in sorted {
        text.push_str(&format!("# failed {}: {}\n", f.label, f.message));
    }
    let path = cfg.out_dir.join("manifest.txt");
    let mut file = fs::File::create(&path).at(&path)?;
    file.write_all(text.as_bytes()).at(&path)?;
    Ok(path)
}

/// Re-hashes every file listed in a manifest; returns the names that differ.
pub fn verify_manifest(path: &Path) -> Result<Vec<String>> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let text = fs::read_to_string(path).at(path)?;
    let mut bad = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#')) {
        if let Some((hash, name)) = line.split_once("  ") {
            let p = dir.join(name);
            if !p.exists() || sha256_file(&p)? != hash {
                bad.push(name.to_string());
            }
        }
    }
    Ok(bad)
}
