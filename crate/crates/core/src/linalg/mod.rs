//! Vectors, voxel volumes, sparse matrices and the matrix-free routines the
//! solvers are built on.

mod dense;
mod sparse;
mod volume;

pub use dense::DenseMatrix;
pub use sparse::CsrMatrix;
pub use volume::{Dims, Volume};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Result};

/// A linear map with an adjoint, applied without forming a matrix.
///
/// Implementors may assume slice lengths match `ncols`/`nrows`; the provided
/// `apply`/`apply_adjoint` wrappers check them.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply_to(&self, x: &[f64], out: &mut [f64]);
    fn apply_adjoint_to(&self, y: &[f64], out: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("LinearOperator::apply", self.ncols(), x.len())?;
        let mut out = vec![0.0; self.nrows()];
        self.apply_to(x, &mut out);
        Ok(out)
    }

    fn apply_adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("LinearOperator::apply_adjoint", self.nrows(), y.len())?;
        let mut out = vec![0.0; self.ncols()];
        self.apply_adjoint_to(y, &mut out);
        Ok(out)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn nrows(&self) -> usize {
        (**self).nrows()
    }
    fn ncols(&self) -> usize {
        (**self).ncols()
    }
    fn apply_to(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply_to(x, out)
    }
    fn apply_adjoint_to(&self, y: &[f64], out: &mut [f64]) {
        (**self).apply_adjoint_to(y, out)
    }
}

/// `A x` for a sparse matrix.
pub fn spmv(a: &CsrMatrix, x: &[f64]) -> Result<Vec<f64>> {
    a.apply(x)
}

/// `Aᵀ y` for a sparse matrix.
pub fn spmv_t(a: &CsrMatrix, y: &[f64]) -> Result<Vec<f64>> {
    a.apply_adjoint(y)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `‖a − b‖²`
#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `y ← y + alpha·x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Power-iteration lower estimate of `λ_max(AᵀA)` (i.e. `‖A‖₂²`).
///
/// Returns the largest Rayleigh quotient seen, so the estimate never decreases
/// with `iters` for a fixed seed. A zero operator yields 0.
pub fn power_iter_norm_sq<A: LinearOperator + ?Sized>(op: &A, iters: usize, seed: u64) -> f64 {
    let n = op.ncols();
    if n == 0 || iters == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut av = vec![0.0; op.nrows()];
    let mut w = vec![0.0; n];
    let mut best = 0.0_f64;
    for _ in 0..iters {
        op.apply_to(&v, &mut av);
        let rq = norm_sq(&av);
        best = best.max(rq);
        op.apply_adjoint_to(&av, &mut w);
        let nw = norm(&w);
        if nw == 0.0 || !nw.is_finite() {
            break;
        }
        v.iter_mut().zip(&w).for_each(|(vi, wi)| *vi = wi / nw);
    }
    best
}

/// Number of CGLS steps used to produce the solvers' starting point.
pub const WARM_START_ITERS: usize = 5;

/// `iters` steps of CGLS on `min ‖Ax − b‖²` from the zero vector.
///
/// Runs conjugate gradients on the normal equations without forming `AᵀA`.
pub fn cgls_warm_start<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    iters: usize,
) -> Result<Vec<f64>> {
    Ok(cgls_iterates(a, b, iters)?.pop().expect("at least x0"))
}

/// All CGLS iterates `x_0 = 0, x_1, …, x_iters` (shorter if CGLS converges exactly).
pub fn cgls_iterates<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    iters: usize,
) -> Result<Vec<Vec<f64>>> {
    check_len("cgls", a.nrows(), b.len())?;
    let n = a.ncols();
    let mut x = vec![0.0; n];
    let mut out = vec![x.clone()];
    let mut r = b.to_vec();
    let mut s = vec![0.0; n];
    a.apply_adjoint_to(&r, &mut s);
    let mut p = s.clone();
    let mut gamma = norm_sq(&s);
    let mut q = vec![0.0; a.nrows()];
    for _ in 0..iters {
        if gamma == 0.0 {
            break;
        }
        a.apply_to(&p, &mut q);
        let qq = norm_sq(&q);
        if qq == 0.0 {
            break;
        }
        let step = gamma / qq;
        axpy(step, &p, &mut x);
        axpy(-step, &q, &mut r);
        a.apply_adjoint_to(&r, &mut s);
        let gamma_new = norm_sq(&s);
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        p.iter_mut().zip(&s).for_each(|(pi, si)| *pi = si + beta * *pi);
        out.push(x.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_dense(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn spmv_examples() {
        let id = CsrMatrix::identity(1);
        assert_eq!(spmv(&id, &[0.5]).unwrap(), vec![0.5]);

        let row = CsrMatrix::from_triplets(1, 3, vec![(0, 0, 1.0), (0, 1, 2.0)]).unwrap();
        assert_eq!(spmv(&row, &[1.0, 1.0, 1.0]).unwrap(), vec![3.0]);

        let diag = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 2.0), (1, 1, 3.0)]).unwrap();
        assert_eq!(spmv(&diag, &[1.0, 1.0]).unwrap(), vec![2.0, 3.0]);

        assert!(spmv(&diag, &[1.0]).is_err());
    }

    #[test]
    fn spmv_t_examples() {
        let id = CsrMatrix::identity(3);
        assert_eq!(spmv_t(&id, &[1.0, -2.0, 3.0]).unwrap(), vec![1.0, -2.0, 3.0]);

        let a = CsrMatrix::from_triplets(1, 2, vec![(0, 0, 1.0), (0, 1, 2.0)]).unwrap();
        assert_eq!(spmv_t(&a, &[3.0]).unwrap(), vec![3.0, 6.0]);
        assert!(spmv_t(&a, &[3.0, 1.0]).is_err());
    }

    #[test]
    fn power_iteration_examples() {
        let id = CsrMatrix::identity(7);
        assert!((power_iter_norm_sq(&id, 100, 1) - 1.0).abs() <= 1e-10);

        let d = CsrMatrix::from_triplets(3, 3, vec![(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0)])
            .unwrap();
        let est = power_iter_norm_sq(&d, 200, 3);
        assert!((est - 9.0).abs() <= 1e-6, "{est}");
        assert!(est <= 9.0 + 1e-9);

        assert_eq!(power_iter_norm_sq(&CsrMatrix::zeros(3, 4), 10, 0), 0.0);
    }

    #[test]
    fn power_iteration_is_monotone_in_iters() {
        let a = random_dense(8, 6, 11);
        let mut prev = 0.0;
        for it in 1..40 {
            let e = power_iter_norm_sq(&a, it, 5);
            assert!(e >= prev);
            prev = e;
        }
        assert_eq!(power_iter_norm_sq(&a, 17, 5), power_iter_norm_sq(&a, 17, 5));
    }

    #[test]
    fn cgls_examples() {
        let a = CsrMatrix::identity(4);
        let b = [1.0, -2.0, 0.5, 3.0];
        assert_eq!(cgls_warm_start(&a, &b, 0).unwrap(), vec![0.0; 4]);
        let x1 = cgls_warm_start(&a, &b, 1).unwrap();
        for (xi, bi) in x1.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-15);
        }
        assert_eq!(cgls_warm_start(&a, &[0.0; 4], 5).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn cgls_solves_small_full_rank_least_squares() {
        let a = random_dense(9, 4, 2);
        let b: Vec<f64> = (0..9).map(|i| (i as f64 * 0.7).cos()).collect();
        let x = cgls_warm_start(&a, &b, 4).unwrap();
        let r: Vec<f64> = a
            .apply(&x)
            .unwrap()
            .iter()
            .zip(&b)
            .map(|(ax, bi)| ax - bi)
            .collect();
        let g = a.apply_adjoint(&r).unwrap();
        assert!(norm(&g) < 1e-10, "normal residual {}", norm(&g));
    }
}
