use std::fs;
use std::path::Path;
use std::process::Command;

use tvnest::objective::BoxQuadratic;
use tvnest::{Algorithm, Dims, SolverConfig};
use tvnest_bench::experiment::verify_manifest;
use tvnest_bench::{compute_reference, run_experiment, Error, ExperimentConfig};

/// 7³ volume, 11×11 detector, 13 directions: a few seconds per grid.
fn tiny(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.problem.preset = "T2-desk".into();
    cfg.problem.dims = Some(Dims::cube(7));
    cfg.problem.pixels = Some(11);
    cfg.alphas = vec![0.1];
    cfg.taus = vec![1e-2];
    cfg.eps_bar = 1e-5;
    cfg.out_dir = out.to_path_buf();
    cfg
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let col = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect()
}

#[test]
fn experiment_outputs_are_byte_identical_across_runs() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let a = run_experiment(&tiny(d1.path())).unwrap();
    let b = run_experiment(&tiny(d2.path())).unwrap();
    assert!(a.failures.is_empty(), "{:?}", a.failures);
    assert_eq!(a.records.len(), 4);
    for r in &a.records {
        let name = r.csv.file_name().unwrap();
        assert_eq!(fs::read(&r.csv).unwrap(), fs::read(d2.path().join(name)).unwrap());
    }
    // config.txt records the output directory, so it is the only entry allowed to differ.
    let entries = |p: &Path| -> Vec<String> {
        fs::read_to_string(p).unwrap().lines().filter(|l| !l.ends_with("config.txt")).map(String::from).collect()
    };
    assert_eq!(entries(&a.manifest), entries(&b.manifest));
    assert!(verify_manifest(&a.manifest).unwrap().is_empty());

    fs::write(&a.records[0].csv, "tampered").unwrap();
    assert_eq!(verify_manifest(&a.manifest).unwrap().len(), 1);
}

#[test]
fn records_satisfy_run_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path());
    cfg.solvers = Algorithm::ALL.to_vec();
    let out = run_experiment(&cfg).unwrap();
    assert!(out.failures.is_empty(), "{:?}", out.failures);
    let x0 = out.records[0].history.records()[0].phi;
    for r in &out.records {
        assert!(!r.history.is_empty());
        assert!(r.reference_is_consistent(), "{}", r.algorithm());
        assert_eq!(r.history.records()[0].phi, x0, "shared start point");
        if r.stop.converged() {
            assert!(r.history.last().unwrap().grad_map_norm <= cfg.eps_bar);
        }
    }
    let gp = out.find(0.1, 1e-2, Algorithm::Gp).unwrap();
    let rel = csv_column(&gp.csv, "rel_subopt");
    assert!(rel.windows(2).all(|w| w[1] <= w[0]), "GP must be monotone");
}

#[test]
fn one_iteration_run_has_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path());
    cfg.solvers = vec![Algorithm::Upn];
    cfg.max_iters = 1;
    let out = run_experiment(&cfg).unwrap();
    let text = fs::read_to_string(&out.records[0].csv).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("0,") && rows[1].starts_with("1,"));
}

#[test]
fn empty_solver_list_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path());
    cfg.solvers.clear();
    assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
    assert!(ExperimentConfig::load(None, &["solvers=".into()]).is_err());
    assert!(ExperimentConfig::load(None, &["alphas=0".into()]).is_err());
}

#[test]
fn reference_matches_closed_form_and_is_cached() {
    let n = 12;
    let center: Vec<f64> = (0..n).map(|i| 0.1 + 0.06 * i as f64).collect();
    let f = BoxQuadratic::with_spectrum(n, 0.5, 50.0, center.clone(), 4).unwrap();
    let mut cfg = SolverConfig::new(Algorithm::Upn, 5.0);
    cfg.mu_init = 0.5;
    cfg.eps_bar = 1e-6;
    cfg.max_iters = 100_000;
    let dir = tempfile::tempdir().unwrap();
    let x0 = vec![0.0; n];

    let r = compute_reference(&f, &x0, &cfg, Some(dir.path())).unwrap();
    assert!(!r.from_cache);
    let err = r.x.iter().zip(&center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    assert!(err <= 1e-8, "‖x* − c‖ = {err:e}");

    let cached = compute_reference(&f, &x0, &cfg, Some(dir.path())).unwrap();
    assert!(cached.from_cache);
    assert_eq!(cached.phi_star.to_bits(), r.phi_star.to_bits());
    assert!(cached.x.iter().zip(&r.x).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn reference_cap_returns_partial_result() {
    let f = BoxQuadratic::with_spectrum(8, 1e-3, 1e3, vec![0.5; 8], 2).unwrap();
    let mut cfg = SolverConfig::new(Algorithm::Upn, 100.0);
    cfg.max_iters = 3;
    match compute_reference(&f, &[0.0; 8], &cfg, None) {
        Err(Error::ReferenceNotConverged { iters, partial, .. }) => {
            assert_eq!(iters, 3);
            assert_eq!(partial.x.len(), 8);
        }
        other => panic!("expected nonconvergence, got {other:?}"),
    }
}

#[test]
fn cli_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_tvnest");
    let dir = tempfile::tempdir().unwrap();
    let vol = dir.path().join("p.txt");
    let ok = Command::new(exe)
        .args(["phantom", "--dims", "5,4,3", "--out"])
        .arg(&vol)
        .status()
        .unwrap();
    assert_eq!(ok.code(), Some(0));
    assert!(fs::read_to_string(&vol).unwrap().starts_with("5 4 3"));

    let bad = Command::new(exe)
        .args(["experiment", "--set", "solvers=bogus"])
        .current_dir(dir.path())
        .status()
        .unwrap();
    assert_eq!(bad.code(), Some(1));

    let cfg = dir.path().join("problem.txt");
    fs::write(&cfg, "preset = T2-desk\ndims = 5,5,5\npixels = 7\n").unwrap();
    let capped = Command::new(exe)
        .args(["solve", "--algorithm", "gp", "--max-iters", "2", "--problem"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .status()
        .unwrap();
    assert_eq!(capped.code(), Some(2));
}
