//! Forward-difference gradient operator with periodic boundaries and the
//! Huber-smoothed total variation built on it.
//!
//! For voxel `j` the operator yields `D_j x ∈ R³`, the forward differences
//! along the three grid axes (unit spacing, periodic wrap). The stacked
//! operator `D` maps `R^N → R^{3N}` with the three differences of a voxel
//! stored contiguously.

use crate::error::{check_len, Error, Result};
use crate::linalg::{Dims, LinearOperator, Volume};

/// Upper bound on `‖D‖₂²` for the 3D periodic forward-difference operator.
pub const DIFF_NORM_SQ_BOUND: f64 = 12.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiffOperator {
    dims: Dims,
}

impl DiffOperator {
    pub fn new(dims: Dims) -> Self {
        Self { dims }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Linear indices of the forward neighbours of voxel `(i, j, k)` along each axis.
    #[inline]
    fn neighbours(&self, i: usize, j: usize, k: usize) -> [usize; 3] {
        let d = self.dims;
        let ip = if i + 1 == d.m { 0 } else { i + 1 };
        let jp = if j + 1 == d.n { 0 } else { j + 1 };
        let kp = if k + 1 == d.l { 0 } else { k + 1 };
        [d.index(ip, j, k), d.index(i, jp, k), d.index(i, j, kp)]
    }

    /// Calls `f(voxel, neighbours)` for every voxel in storage order.
    #[inline]
    fn for_each_voxel(&self, mut f: impl FnMut(usize, [usize; 3])) {
        let d = self.dims;
        let mut idx = 0;
        for k in 0..d.l {
            for j in 0..d.n {
                for i in 0..d.m {
                    f(idx, self.neighbours(i, j, k));
                    idx += 1;
                }
            }
        }
    }

    /// `D x` for a volume on this grid.
    pub fn apply_d(&self, x: &Volume) -> Result<Vec<f64>> {
        if x.dims() != self.dims {
            return Err(Error::InvalidParameter(format!(
                "volume dims {:?} do not match operator dims {:?}",
                x.dims(),
                self.dims
            )));
        }
        self.apply(x.as_slice())
    }

    /// `Dᵀ u` for a stacked vector of length `3N`.
    pub fn apply_d_t(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.apply_adjoint(u)
    }
}

impl LinearOperator for DiffOperator {
    fn nrows(&self) -> usize {
        3 * self.dims.len()
    }

    fn ncols(&self) -> usize {
        self.dims.len()
    }

    fn apply_to(&self, x: &[f64], out: &mut [f64]) {
        self.for_each_voxel(|v, nb| {
            let xv = x[v];
            out[3 * v] = x[nb[0]] - xv;
            out[3 * v + 1] = x[nb[1]] - xv;
            out[3 * v + 2] = x[nb[2]] - xv;
        });
    }

    fn apply_adjoint_to(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        self.for_each_voxel(|v, nb| {
            for a in 0..3 {
                let w = u[3 * v + a];
                out[nb[a]] += w;
                out[v] -= w;
            }
        });
    }
}

/// Huber function: `‖z‖ − τ/2` for `‖z‖ ≥ τ`, else `‖z‖²/(2τ)`.
pub fn huber(z: [f64; 3], tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be > 0, got {tau}")));
    }
    Ok(huber_unchecked(z, tau))
}

#[inline]
fn huber_unchecked(z: [f64; 3], tau: f64) -> f64 {
    let nsq = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
    let n = nsq.sqrt();
    if n >= tau {
        n - 0.5 * tau
    } else {
        nsq / (2.0 * tau)
    }
}

/// Smoothed TV value and gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct TvEval {
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// Evaluates `T_τ(x) = Σ_j Φ_τ(D_j x)` and `∇T_τ(x) = Σ_j D_jᵀ D_j x / max{τ, ‖D_j x‖}`
/// in one matrix-free pass.
pub fn tv_value_grad(op: &DiffOperator, x: &[f64], tau: f64) -> Result<TvEval> {
    let mut gradient = vec![0.0; op.ncols()];
    let value = tv_value_grad_into(op, x, tau, &mut gradient)?;
    Ok(TvEval { value, gradient })
}

/// As [`tv_value_grad`] but writes the gradient into `grad` (overwritten) and returns the value.
pub fn tv_value_grad_into(op: &DiffOperator, x: &[f64], tau: f64, grad: &mut [f64]) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be > 0, got {tau}")));
    }
    check_len("tv_value_grad", op.ncols(), x.len())?;
    check_len("tv_value_grad gradient", op.ncols(), grad.len())?;
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut value = 0.0;
    op.for_each_voxel(|v, nb| {
        let xv = x[v];
        let z = [x[nb[0]] - xv, x[nb[1]] - xv, x[nb[2]] - xv];
        value += huber_unchecked(z, tau);
        let n = (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt();
        let scale = 1.0 / n.max(tau);
        for a in 0..3 {
            let w = z[a] * scale;
            grad[nb[a]] += w;
            grad[v] -= w;
        }
    });
    Ok(value)
}

/// Smoothed TV value only.
pub fn tv_value(op: &DiffOperator, x: &[f64], tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be > 0, got {tau}")));
    }
    check_len("tv_value", op.ncols(), x.len())?;
    let mut value = 0.0;
    op.for_each_voxel(|v, nb| {
        let xv = x[v];
        value += huber_unchecked([x[nb[0]] - xv, x[nb[1]] - xv, x[nb[2]] - xv], tau);
    });
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dot, power_iter_norm_sq, DenseMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    /// Explicit 3N×N forward-difference matrix, built entry by entry.
    fn explicit_d(d: Dims) -> DenseMatrix {
        let n = d.len();
        let mut m = DenseMatrix::zeros(3 * n, n);
        for k in 0..d.l {
            for j in 0..d.n {
                for i in 0..d.m {
                    let v = d.index(i, j, k);
                    let nbs = [
                        d.index((i + 1) % d.m, j, k),
                        d.index(i, (j + 1) % d.n, k),
                        d.index(i, j, (k + 1) % d.l),
                    ];
                    for (a, &nb) in nbs.iter().enumerate() {
                        let r = 3 * v + a;
                        m.set(r, nb, m.get(r, nb) + 1.0);
                        m.set(r, v, m.get(r, v) - 1.0);
                    }
                }
            }
        }
        m
    }

    #[test]
    fn constant_volume_has_zero_differences() {
        let op = DiffOperator::new(Dims::new(3, 4, 2));
        let x = Volume::filled(op.dims(), 0.37);
        assert!(op.apply_d(&x).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_voxel_wraparound() {
        let (a, b) = (0.25, 1.5);
        let op = DiffOperator::new(Dims::new(2, 1, 1));
        let x = Volume::from_vec(op.dims(), vec![a, b]).unwrap();
        let dx = op.apply_d(&x).unwrap();
        assert_eq!(dx, vec![b - a, 0.0, 0.0, a - b, 0.0, 0.0]);

        // DᵀDx against the explicit 6×2 matrix.
        let dt = op.apply_d_t(&dx).unwrap();
        let e = explicit_d(op.dims());
        let expected = e.apply_adjoint(&e.apply(x.as_slice()).unwrap()).unwrap();
        assert_eq!(dt, expected);
        assert_eq!(dt, vec![2.0 * (a - b), 2.0 * (b - a)]);
    }

    #[test]
    fn single_voxel_is_zero_map() {
        let op = DiffOperator::new(Dims::cube(1));
        let x = Volume::filled(op.dims(), 5.0);
        assert_eq!(op.apply_d(&x).unwrap(), vec![0.0; 3]);
        let t = tv_value_grad(&op, x.as_slice(), 0.1).unwrap();
        assert_eq!(t.value, 0.0);
        assert_eq!(t.gradient, vec![0.0]);
    }

    #[test]
    fn dimension_errors() {
        let op = DiffOperator::new(Dims::cube(2));
        assert!(op.apply_d(&Volume::zeros(Dims::new(2, 2, 1))).is_err());
        assert!(op.apply_d_t(&[0.0; 5]).is_err());
        assert!(tv_value_grad(&op, &[0.0; 3], 1.0).is_err());
        assert!(tv_value_grad(&op, &[0.0; 8], 0.0).is_err());
    }

    #[test]
    fn adjoint_of_zero_is_zero() {
        let op = DiffOperator::new(Dims::new(3, 2, 2));
        assert_eq!(op.apply_d_t(&vec![0.0; 36]).unwrap(), vec![0.0; 12]);
    }

    #[test]
    fn matches_explicit_matrix_on_small_grids() {
        for (s, d) in [(2, 2, 2), (4, 4, 4), (3, 1, 5), (1, 1, 7), (4, 3, 5)]
            .into_iter()
            .enumerate()
        {
            let dims = Dims::new(d.0, d.1, d.2);
            let op = DiffOperator::new(dims);
            let e = explicit_d(dims);
            let x = random_vec(dims.len(), s as u64);
            let u = random_vec(3 * dims.len(), 100 + s as u64);
            let (a, b) = (op.apply(&x).unwrap(), e.apply(&x).unwrap());
            let (at, bt) = (op.apply_adjoint(&u).unwrap(), e.apply_adjoint(&u).unwrap());
            for (p, q) in a.iter().zip(&b).chain(at.iter().zip(&bt)) {
                assert!((p - q).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn adjoint_identity() {
        let op = DiffOperator::new(Dims::new(5, 4, 3));
        for seed in 0..5 {
            let x = random_vec(op.ncols(), seed);
            let u = random_vec(op.nrows(), seed + 50);
            let lhs = dot(&op.apply(&x).unwrap(), &u);
            let rhs = dot(&x, &op.apply_adjoint(&u).unwrap());
            assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn huber_examples() {
        assert_eq!(huber([0.0; 3], 1.0).unwrap(), 0.0);
        assert_eq!(huber([3.0, 4.0, 0.0], 1.0).unwrap(), 4.5);
        assert_eq!(huber([1.0, 0.0, 0.0], 2.0).unwrap(), 0.25);
        let tau = 0.75;
        let on_edge = huber([tau, 0.0, 0.0], tau).unwrap();
        assert!((on_edge - tau / 2.0).abs() < 1e-15);
        assert!((tau * tau / (2.0 * tau) - tau / 2.0).abs() < 1e-15);
        assert!(huber([1.0; 3], 0.0).is_err());
        assert!(huber([1.0; 3], -1.0).is_err());
    }

    #[test]
    fn constant_volume_tv_is_zero() {
        let op = DiffOperator::new(Dims::new(4, 3, 2));
        let t = tv_value_grad(&op, &vec![0.8; 24], 1e-3).unwrap();
        assert_eq!(t.value, 0.0);
        assert!(t.gradient.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let op = DiffOperator::new(Dims::new(4, 3, 2));
        let tau = 1e-2;
        let h = 1e-6;
        for seed in 0..3 {
            let x = random_vec(op.ncols(), seed);
            let t = tv_value_grad(&op, &x, tau).unwrap();
            let mut xp = x.clone();
            let mut max_err = 0.0_f64;
            let gmax = t.gradient.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
            for i in 0..x.len() {
                xp[i] = x[i] + h;
                let fp = tv_value(&op, &xp, tau).unwrap();
                xp[i] = x[i] - h;
                let fm = tv_value(&op, &xp, tau).unwrap();
                xp[i] = x[i];
                let fd = (fp - fm) / (2.0 * h);
                max_err = max_err.max((fd - t.gradient[i]).abs() / gmax.max(1e-12));
            }
            assert!(max_err <= 1e-6, "relative fd error {max_err}");
        }
    }

    #[test]
    fn diff_norm_bound() {
        for dims in [Dims::cube(2), Dims::cube(5), Dims::new(8, 5, 3)] {
            let est = power_iter_norm_sq(&DiffOperator::new(dims), 300, 7);
            assert!(est <= DIFF_NORM_SQ_BOUND + 1e-9, "{dims:?}: {est}");
        }
    }

    #[test]
    fn translation_invariance_is_exact() {
        // Dyadic values keep `x + c` exact, so differences are bit-identical.
        let op = DiffOperator::new(Dims::new(3, 3, 2));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..18).map(|_| rng.gen_range(0..1024) as f64 / 1024.0).collect();
        let shifted: Vec<f64> = x.iter().map(|v| v + 3.0).collect();
        assert_eq!(
            tv_value_grad(&op, &x, 0.05).unwrap(),
            tv_value_grad(&op, &shifted, 0.05).unwrap()
        );
    }
}
