//! Flat `key = value` configuration.
//!
//! Later sources override earlier ones: defaults, then the config file, then
//! command-line `key=value` overrides. Lists are comma separated; `#` starts
//! a comment.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use tvnest::linalg::Dims;
use tvnest::tomo::TestProblemSpec;
use tvnest::Algorithm;

use crate::error::{Error, IoContext, Result};

/// Splits `key = value` lines, skipping blanks and `#` comments.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {raw:?}", no + 1)))?;
        out.push((k.trim().to_ascii_lowercase().replace('-', "_"), v.trim().to_string()));
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| Error::Config(format!("{key}: {v:?}: {e}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got {v:?}"))),
    }
}

pub fn parse_dims(v: &str) -> Result<Dims> {
    let d: Vec<usize> = parse_list("dims", v)?;
    match d[..] {
        [m, n, l] if m > 0 && n > 0 && l > 0 => Ok(Dims::new(m, n, l)),
        _ => Err(Error::Config(format!("dims: expected m,n,l positive, got {v:?}"))),
    }
}

/// A tomography test problem: a preset with optional overrides.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemConfig {
    pub preset: String,
    pub dims: Option<Dims>,
    pub pixels: Option<usize>,
    pub projections: Option<usize>,
    pub noise: Option<f64>,
    pub seed: Option<u64>,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            preset: "T1-desk".into(),
            dims: None,
            pixels: None,
            projections: None,
            noise: None,
            seed: None,
        }
    }
}

impl ProblemConfig {
    /// Applies one key; returns `false` if the key is not a problem key.
    pub fn apply(&mut self, key: &str, v: &str) -> Result<bool> {
        match key {
            "problem" | "preset" => {
                TestProblemSpec::preset(v)?;
                self.preset = v.to_string();
            }
            "dims" => self.dims = Some(parse_dims(v)?),
            "pixels" => self.pixels = Some(parse_num(key, v)?),
            "projections" => self.projections = Some(parse_num(key, v)?),
            "noise" => self.noise = Some(parse_num(key, v)?),
            "seed" => self.seed = Some(parse_num(key, v)?),
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// A preset name, or a path to a `key = value` file of problem keys.
    pub fn from_arg(arg: &str) -> Result<Self> {
        let mut p = Self::default();
        if TestProblemSpec::preset(arg).is_ok() {
            p.preset = arg.to_string();
            return Ok(p);
        }
        let path = Path::new(arg);
        let text = std::fs::read_to_string(path).at(path)?;
        for (k, v) in parse_kv(&text)? {
            if !p.apply(&k, &v)? {
                return Err(Error::Config(format!("{}: unknown problem key {k:?}", path.display())));
            }
        }
        Ok(p)
    }

    /// Short name used in output file names.
    pub fn name(&self) -> String {
        let custom = self.dims.is_some() || self.pixels.is_some() || self.projections.is_some();
        if custom {
            let s = self.spec(1.0, 1.0).expect("validated preset");
            let [m, n, l] = s.dims.as_array();
            format!("custom{m}x{n}x{l}p{}d{}", s.pixels, s.n_proj)
        } else {
            self.preset.clone()
        }
    }

    pub fn spec(&self, alpha: f64, tau: f64) -> Result<TestProblemSpec> {
        let mut s = TestProblemSpec::preset(&self.preset)?;
        if let Some(d) = self.dims {
            s.dims = d;
        }
        if let Some(p) = self.pixels {
            s.pixels = p;
        }
        if let Some(n) = self.projections {
            s.n_proj = n;
        }
        if let Some(e) = self.noise {
            s.noise = e;
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        s.alpha = alpha;
        s.tau = tau;
        Ok(s)
    }

    fn write_kv(&self, out: &mut String) {
        let _ = writeln!(out, "problem = {}", self.preset);
        if let Some(d) = self.dims {
            let [m, n, l] = d.as_array();
            let _ = writeln!(out, "dims = {m},{n},{l}");
        }
        if let Some(p) = self.pixels {
            let _ = writeln!(out, "pixels = {p}");
        }
        if let Some(p) = self.projections {
            let _ = writeln!(out, "projections = {p}");
        }
        if let Some(e) = self.noise {
            let _ = writeln!(out, "noise = {e:?}");
        }
        if let Some(s) = self.seed {
            let _ = writeln!(out, "seed = {s}");
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferencePolicy {
    /// Reuse a cached reference with the same content key if present.
    Cached,
    /// Always recompute (and refresh the cache).
    Recompute,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub solvers: Vec<Algorithm>,
    pub alphas: Vec<f64>,
    pub taus: Vec<f64>,
    pub eps_bar: f64,
    pub max_iters: usize,
    /// Iteration cap for reference solves.
    pub reference_max_iters: usize,
    pub out_dir: PathBuf,
    pub reference: ReferencePolicy,
    /// Reference cache; `None` means `<out_dir>/cache`.
    pub cache_dir: Option<PathBuf>,
    pub save_solution: bool,
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemConfig::default(),
            solvers: vec![Algorithm::Gp, Algorithm::Gpbb, Algorithm::Upn, Algorithm::Upn0],
            alphas: vec![1.0],
            taus: vec![1e-4],
            eps_bar: 1e-4,
            max_iters: 20_000,
            reference_max_iters: 200_000,
            out_dir: PathBuf::from("out"),
            reference: ReferencePolicy::Cached,
            cache_dir: None,
            save_solution: false,
            timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn apply(&mut self, key: &str, v: &str) -> Result<()> {
        if self.problem.apply(key, v)? {
            return Ok(());
        }
        match key {
            "solvers" | "solver" | "algorithms" => {
                self.solvers = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<Algorithm>().map_err(Error::from))
                    .collect::<Result<_>>()?;
            }
            "alpha" | "alphas" => self.alphas = parse_list(key, v)?,
            "tau" | "taus" => self.taus = parse_list(key, v)?,
            "eps_bar" => self.eps_bar = parse_num(key, v)?,
            "max_iters" => self.max_iters = parse_num(key, v)?,
            "reference_max_iters" => self.reference_max_iters = parse_num(key, v)?,
            "out" | "out_dir" => self.out_dir = PathBuf::from(v),
            "reference" => {
                self.reference = match v.to_ascii_lowercase().as_str() {
                    "cached" | "cache" => ReferencePolicy::Cached,
                    "recompute" => ReferencePolicy::Recompute,
                    _ => return Err(Error::Config(format!("reference: expected cached or recompute, got {v:?}"))),
                }
            }
            "cache_dir" => self.cache_dir = Some(PathBuf::from(v)),
            "save_solution" => self.save_solution = parse_bool(key, v)?,
            "timing" => self.timing = parse_bool(key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (k, v) in parse_kv(text)? {
            self.apply(&k, &v)?;
        }
        Ok(())
    }

    /// Defaults, then `file`, then `overrides` (each `key=value`).
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).at(path)?;
            cfg.apply_text(&text)?;
        }
        for o in overrides {
            cfg.apply_text(o)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.solvers.is_empty() {
            return Err(Error::Config("at least one solver is required".into()));
        }
        if self.alphas.is_empty() || self.taus.is_empty() {
            return Err(Error::Config("alpha and tau grids must be nonempty".into()));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::Config(format!("alpha must be > 0, got {a}")));
        }
        if let Some(t) = self.taus.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::Config(format!("tau must be > 0, got {t}")));
        }
        if !(self.eps_bar > 0.0) {
            return Err(Error::Config(format!("eps_bar must be > 0, got {}", self.eps_bar)));
        }
        self.problem.spec(1.0, 1.0)?;
        Ok(())
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.out_dir.join("cache"))
    }

    /// Canonical `key = value` form; reloading it gives an equal config.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        self.problem.write_kv(&mut s);
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        let names: Vec<&str> = self.solvers.iter().map(|a| a.name()).collect();
        let _ = writeln!(s, "solvers = {}", names.join(","));
        let _ = writeln!(s, "alpha = {}", join(&self.alphas));
        let _ = writeln!(s, "tau = {}", join(&self.taus));
        let _ = writeln!(s, "eps_bar = {:?}", self.eps_bar);
        let _ = writeln!(s, "max_iters = {}", self.max_iters);
        let _ = writeln!(s, "reference_max_iters = {}", self.reference_max_iters);
        let _ = writeln!(s, "out = {}", self.out_dir.display());
        let policy = match self.reference {
            ReferencePolicy::Cached => "cached",
            ReferencePolicy::Recompute => "recompute",
        };
        let _ = writeln!(s, "reference = {policy}");
        if let Some(c) = &self.cache_dir {
            let _ = writeln!(s, "cache_dir = {}", c.display());
        }
        let _ = writeln!(s, "save_solution = {}", self.save_solution);
        let _ = writeln!(s, "timing = {}", self.timing);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_is_cli_over_file_over_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("exp.cfg");
        std::fs::write(&file, "# grid\nalpha = 0.01, 1\neps_bar = 1e-3\nsolvers = upn,gpbb\n").unwrap();
        let cfg = ExperimentConfig::load(Some(&file), &["eps_bar=1e-5".into()]).unwrap();
        assert_eq!(cfg.alphas, vec![0.01, 1.0]);
        assert_eq!(cfg.eps_bar, 1e-5);
        assert_eq!(cfg.solvers, vec![Algorithm::Upn, Algorithm::Gpbb]);
        assert_eq!(cfg.taus, ExperimentConfig::default().taus);
    }

    #[test]
    fn kv_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text("problem = T2-desk\ndims = 5,6,7\nnoise = 0.02\ntau = 1e-2,1e-4\ntiming = yes").unwrap();
        let mut again = ExperimentConfig::default();
        again.apply_text(&cfg.to_kv()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.problem.name(), "custom5x6x7p31d13");
    }

    #[test]
    fn rejects_bad_input() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.apply("solvers", "upn,newton").is_err());
        assert!(cfg.apply("colour", "red").is_err());
        assert!(cfg.apply("problem", "T9").is_err());
        assert!(parse_kv("no equals sign").is_err());
        cfg.solvers.clear();
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig { alphas: vec![0.0], ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
