//! High-accuracy reference solutions, cached on disk by content hash.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use tvnest::linalg::{CsrMatrix, DenseMatrix, LinearOperator};
use tvnest::objective::{BoxQuadratic, Objective, TvRegProblem};
use tvnest::solvers::{upn_solve, SolverConfig, StopReason};

use crate::error::{Error, IoContext, Result};

/// The reference tolerance is `ε̄` times this factor.
pub const REFERENCE_FACTOR: f64 = 1e-4;

const CACHE_MAGIC: &[u8; 8] = b"TVREF01\n";

/// Feeds everything that determines an objective into a hasher.
pub trait ContentHash {
    fn feed(&self, h: &mut Sha256);
}

fn feed_f64s(h: &mut Sha256, v: &[f64]) {
    h.update((v.len() as u64).to_le_bytes());
    for x in v {
        h.update(x.to_bits().to_le_bytes());
    }
}

fn feed_usizes(h: &mut Sha256, v: &[usize]) {
    h.update((v.len() as u64).to_le_bytes());
    for x in v {
        h.update((*x as u64).to_le_bytes());
    }
}

impl<T: ContentHash + ?Sized> ContentHash for &T {
    fn feed(&self, h: &mut Sha256) {
        (**self).feed(h)
    }
}

impl ContentHash for CsrMatrix {
    fn feed(&self, h: &mut Sha256) {
        h.update(b"csr");
        h.update((self.ncols() as u64).to_le_bytes());
        feed_usizes(h, self.row_ptr());
        feed_usizes(h, self.col_idx());
        feed_f64s(h, self.values());
    }
}

impl ContentHash for DenseMatrix {
    fn feed(&self, h: &mut Sha256) {
        h.update(b"dense");
        h.update((self.ncols() as u64).to_le_bytes());
        for i in 0..self.nrows() {
            feed_f64s(h, self.row(i));
        }
    }
}

impl<A: LinearOperator + ContentHash> ContentHash for TvRegProblem<A> {
    fn feed(&self, h: &mut Sha256) {
        h.update(b"tvreg");
        self.operator().feed(h);
        feed_f64s(h, self.rhs());
        feed_usizes(h, &self.dims().as_array());
        feed_f64s(h, &[self.alpha(), self.tau()]);
    }
}

impl ContentHash for BoxQuadratic {
    fn feed(&self, h: &mut Sha256) {
        h.update(b"boxquad");
        self.hessian().feed(h);
        feed_f64s(h, self.center());
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reference {
    pub x: Vec<f64>,
    pub phi_star: f64,
    pub iters: usize,
    pub stop: StopReason,
    pub from_cache: bool,
}

/// Solver settings actually used for a reference run on top of `base`.
pub fn reference_config(base: &SolverConfig) -> SolverConfig {
    SolverConfig {
        algorithm: tvnest::Algorithm::Upn,
        eps_bar: base.eps_bar * REFERENCE_FACTOR,
        record_wall_time: false,
        ..base.clone()
    }
}

/// Hex cache key over the objective, the start point and the solver settings.
pub fn reference_key<F: ContentHash + ?Sized>(f: &F, x0: &[f64], base: &SolverConfig) -> String {
    let cfg = reference_config(base);
    let mut h = Sha256::new();
    h.update(b"tvnest-reference-v1");
    f.feed(&mut h);
    feed_f64s(&mut h, x0);
    feed_f64s(
        &mut h,
        &[cfg.eps_bar, cfg.mu_init, cfg.l_init, cfg.rho_l, cfg.rho_mu],
    );
    h.update((cfg.max_iters as u64).to_le_bytes());
    hex::encode(h.finalize())
}

pub fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{key}.ref"))
}

/// Runs UPN to tolerance `base.eps_bar · 1e-4` from `x0`.
///
/// With `cache_dir`, a result stored under the same content key is returned
/// unchanged, and fresh results are stored. A run that hits
/// `base.max_iters` is reported as [`Error::ReferenceNotConverged`] with the
/// partial result attached.
pub fn compute_reference<F: Objective + ContentHash + ?Sized>(
    f: &F,
    x0: &[f64],
    base: &SolverConfig,
    cache_dir: Option<&Path>,
) -> Result<Reference> {
    let key = reference_key(f, x0, base);
    if let Some(dir) = cache_dir {
        let path = cache_path(dir, &key);
        if path.exists() {
            return read_cache(&path);
        }
    }
    let cfg = reference_config(base);
    let run = upn_solve(f, &cfg, x0)?;
    let reference = Reference {
        phi_star: f.value(&run.x)?,
        x: run.x,
        iters: run.history.last().map_or(0, |r| r.iter),
        stop: run.stop,
        from_cache: false,
    };
    if !reference.stop.converged() {
        return Err(Error::ReferenceNotConverged {
            iters: reference.iters,
            phi: reference.phi_star,
            partial: Box::new(reference),
        });
    }
    if let Some(dir) = cache_dir {
        fs::create_dir_all(dir).at(dir)?;
        write_cache(&cache_path(dir, &key), &reference)?;
    }
    Ok(reference)
}

fn stop_code(s: StopReason) -> u8 {
    match s {
        StopReason::GradMapAtX => 0,
        StopReason::GradMapAtY => 1,
        StopReason::MaxIters => 2,
    }
}

fn write_cache(path: &Path, r: &Reference) -> Result<()> {
    let mut buf = Vec::with_capacity(40 + 8 * r.x.len());
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&r.phi_star.to_bits().to_le_bytes());
    buf.extend_from_slice(&(r.iters as u64).to_le_bytes());
    buf.push(stop_code(r.stop));
    buf.extend_from_slice(&(r.x.len() as u64).to_le_bytes());
    for v in &r.x {
        buf.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    // Write then rename, so concurrent readers never see a partial file.
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    let mut file = fs::File::create(&tmp).at(&tmp)?;
    file.write_all(&buf).at(&tmp)?;
    file.sync_all().at(&tmp)?;
    fs::rename(&tmp, path).at(path)
}

fn read_cache(path: &Path) -> Result<Reference> {
    let bytes = fs::read(path).at(path)?;
    let bad = || Error::Config(format!("{}: corrupt reference cache file", path.display()));
    if bytes.len() < 33 || &bytes[..8] != CACHE_MAGIC {
        return Err(bad());
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let phi_star = f64::from_bits(word(8));
    let iters = word(16) as usize;
    let stop = match bytes[24] {
        0 => StopReason::GradMapAtX,
        1 => StopReason::GradMapAtY,
        2 => StopReason::MaxIters,
        _ => return Err(bad()),
    };
    let n = word(25) as usize;
    if bytes.len() != 33 + 8 * n {
        return Err(bad());
    }
    let x = (0..n).map(|i| f64::from_bits(word(33 + 8 * i))).collect();
    Ok(Reference {
        x,
        phi_star,
        iters,
        stop,
        from_cache: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tvnest::Algorithm;

    #[test]
    fn key_depends_on_content() {
        let f = BoxQuadratic::with_spectrum(4, 1.0, 4.0, vec![0.5; 4], 1).unwrap();
        let g = BoxQuadratic::with_spectrum(4, 1.0, 4.0, vec![0.5; 4], 2).unwrap();
        let cfg = SolverConfig::new(Algorithm::Upn, 4.0);
        let k = reference_key(&f, &[0.0; 4], &cfg);
        assert_eq!(k.len(), 64);
        assert_eq!(k, reference_key(&f, &[0.0; 4], &cfg));
        assert_ne!(k, reference_key(&g, &[0.0; 4], &cfg));
        assert_ne!(k, reference_key(&f, &[0.1; 4], &cfg));
        let tighter = SolverConfig { eps_bar: 1e-9, ..cfg.clone() };
        assert_ne!(k, reference_key(&f, &[0.0; 4], &tighter));
    }

    #[test]
    fn corrupt_cache_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.ref");
        fs::write(&p, b"TVREF01\nshort").unwrap();
        assert!(read_cache(&p).is_err());
    }
}
