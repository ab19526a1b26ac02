use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tvnest::tomo::{shepp_logan_3d, TestProblemSpec};
use tvnest::{Algorithm, LinearOperator, Objective, Volume};
use tvnest_bench::config::parse_dims;
use tvnest_bench::error::{Error, IoContext, Result};
use tvnest_bench::experiment::{reference_for, run_cell, SharedProblem};
use tvnest_bench::{init_threads, run_experiment, ExperimentConfig, ProblemConfig, ReferencePolicy};

/// Box-constrained TV tomography solvers and experiment runner.
///
/// The worker thread count is read from `TVNEST_THREADS`.
#[derive(Parser)]
#[command(name = "tvnest", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ProblemArgs {
    /// Preset (T1, T2, T1-desk, T2-desk) or a key = value problem file.
    #[arg(long, default_value = "T1-desk")]
    problem: String,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1e-4)]
    tau: f64,
    #[arg(long, default_value_t = 1e-4)]
    eps_bar: f64,
    /// Noise seed; overrides the preset.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solver and write its convergence history.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value = "upn")]
        algorithm: Algorithm,
        #[arg(long, default_value_t = 20_000)]
        max_iters: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Reference solution volume; without it one is computed (and cached).
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        save_solution: bool,
        /// Record wall-clock time per iteration (breaks byte determinism).
        #[arg(long)]
        timing: bool,
    },
    /// Compute a high-accuracy solution and print its objective value.
    Reference {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 200_000)]
        max_iters: usize,
        /// Output volume (binary).
        #[arg(long)]
        out: PathBuf,
        /// Ignore and refresh the reference cache.
        #[arg(long)]
        recompute: bool,
        #[arg(long, default_value = "out/cache")]
        cache_dir: PathBuf,
    },
    /// Write the 3D Shepp-Logan phantom as a text volume.
    Phantom {
        #[arg(long, value_parser = parse_dims_arg)]
        dims: tvnest::Dims,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a preset system matrix in Matrix Market format.
    Matrix {
        #[arg(long)]
        preset: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a grid of (α, τ, solver) cells from a config file.
    Experiment {
        #[arg(long)]
        config: Option<PathBuf>,
        /// `key=value` override, repeatable; wins over the file.
        #[arg(long = "set")]
        overrides: Vec<String>,
    },
}

fn parse_dims_arg(v: &str) -> std::result::Result<tvnest::Dims, String> {
    parse_dims(v).map_err(|e| e.to_string())
}

fn problem_config(args: &ProblemArgs) -> Result<ProblemConfig> {
    let mut p = ProblemConfig::from_arg(&args.problem)?;
    if args.seed.is_some() {
        p.seed = args.seed;
    }
    Ok(p)
}

fn base_config(args: &ProblemArgs, max_iters: usize, out: PathBuf) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig {
        problem: problem_config(args)?,
        alphas: vec![args.alpha],
        taus: vec![args.tau],
        eps_bar: args.eps_bar,
        max_iters,
        out_dir: out,
        ..ExperimentConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn read_volume(path: &PathBuf) -> Result<Volume> {
    let file = fs::File::open(path).at(path)?;
    Volume::read_binary(BufReader::new(file)).at(path)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve {
            problem,
            algorithm,
            max_iters,
            out,
            reference,
            save_solution,
            timing,
        } => {
            let mut cfg = base_config(&problem, max_iters, out)?;
            cfg.solvers = vec![algorithm];
            cfg.save_solution = save_solution;
            cfg.timing = timing;
            fs::create_dir_all(&cfg.out_dir).at(&cfg.out_dir)?;
            let shared = SharedProblem::build(&cfg)?;
            let phi_star = match reference {
                Some(path) => {
                    let x = read_volume(&path)?;
                    shared.objective(problem.alpha, problem.tau)?.value(x.as_slice())?
                }
                None => reference_for(&cfg, &shared, problem.alpha, problem.tau)?.phi_star,
            };
            let rec = run_cell(&cfg, &shared, phi_star, problem.alpha, problem.tau, algorithm)?;
            let last = rec.history.last().expect("history has iteration 0");
            println!(
                "{algorithm}: {:?} after {} iterations, phi {:.10e}, phi* {:.10e}, restarts {}, {:.2}s",
                rec.stop, last.iter, last.phi, phi_star, rec.restarts, rec.elapsed_s
            );
            println!("history: {}", rec.csv.display());
            Ok(if rec.stop.converged() { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Reference {
            problem,
            max_iters,
            out,
            recompute,
            cache_dir,
        } => {
            let mut cfg = base_config(&problem, 20_000, PathBuf::from("."))?;
            cfg.reference_max_iters = max_iters;
            cfg.cache_dir = Some(cache_dir);
            if recompute {
                cfg.reference = ReferencePolicy::Recompute;
            }
            let shared = SharedProblem::build(&cfg)?;
            let r = match reference_for(&cfg, &shared, problem.alpha, problem.tau) {
                Ok(r) => r,
                Err(Error::ReferenceNotConverged { iters, phi, partial }) => {
                    write_volume(&shared, partial.x, &out)?;
                    eprintln!("reference not converged after {iters} iterations (phi {phi:.17e}); partial result written");
                    return Ok(ExitCode::from(2));
                }
                Err(e) => return Err(e),
            };
            println!("phi_star {:.17e}", r.phi_star);
            println!("iters {} ({})", r.iters, if r.from_cache { "cached" } else { "computed" });
            write_volume(&shared, r.x, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Phantom { dims, out } => {
            let v = shepp_logan_3d(dims.m, dims.n, dims.l);
            let file = fs::File::create(&out).at(&out)?;
            v.write_text(BufWriter::new(file)).at(&out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Matrix { preset, out } => {
            let spec = TestProblemSpec::preset(&preset)?;
            let tp = tvnest::tomo::make_test_problem(&spec)?;
            let a = tp.matrix();
            let file = fs::File::create(&out).at(&out)?;
            a.write_matrix_market(BufWriter::new(file)).at(&out)?;
            println!("{} x {}, {} nonzeros", a.nrows(), a.ncols(), a.nnz());
            Ok(ExitCode::SUCCESS)
        }
        Command::Experiment { config, overrides } => {
            let cfg = ExperimentConfig::load(config.as_deref(), &overrides)?;
            let out = run_experiment(&cfg)?;
            let mut all_converged = true;
            for r in &out.records {
                all_converged &= r.stop.converged();
                println!(
                    "a={:?} t={:?} {}: {:?} after {} iterations",
                    r.alpha,
                    r.tau,
                    r.algorithm(),
                    r.stop,
                    r.history.last().map_or(0, |h| h.iter)
                );
            }
            for f in &out.failures {
                eprintln!("{}: {}", f.label, f.message);
            }
            println!("manifest: {}", out.manifest.display());
            Ok(if !out.failures.is_empty() {
                ExitCode::FAILURE
            } else if all_converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
    }
}

fn write_volume(shared: &SharedProblem, x: Vec<f64>, out: &PathBuf) -> Result<()> {
    let v = Volume::from_vec(shared.test.spec.dims, x)?;
    let file = fs::File::create(out).at(out)?;
    v.write_binary(BufWriter::new(file)).at(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| run(cli));
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
