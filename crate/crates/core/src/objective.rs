//! The TV-regularized least-squares objective over the unit box, plus the
//! box projection, gradient map and strong-convexity estimator shared by all
//! solvers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};
use crate::linalg::{dist_sq, dot, CsrMatrix, DenseMatrix, Dims, LinearOperator};
use crate::tv::{tv_value, tv_value_grad_into, DiffOperator, DIFF_NORM_SQ_BOUND};

/// A smooth convex function minimized over a closed convex set (by default
/// the unit box `[0,1]^N`).
pub trait Objective {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<f64>;

    /// Returns `f(x)` and writes `∇f(x)` into `grad`.
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64>;

    /// Euclidean projection onto the feasible set, in place.
    fn project(&self, x: &mut [f64]) {
        project_box_in_place(x);
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        (**self).value(x)
    }
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        (**self).value_grad(x, grad)
    }
    fn project(&self, x: &mut [f64]) {
        (**self).project(x)
    }
}

/// Clamps every entry to `[0, 1]`.
pub fn project_box(x: &[f64]) -> Vec<f64> {
    let mut out = x.to_vec();
    project_box_in_place(&mut out);
    out
}

pub fn project_box_in_place(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
}

/// Value, gradient and squared residual of `φ` at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub residual_norm_sq: f64,
}

/// `φ(x) = ½‖Ax − b‖² + α·T_τ(x)` over `[0,1]^N`.
#[derive(Clone, Debug)]
pub struct TvRegProblem<A = CsrMatrix> {
    a: A,
    b: Vec<f64>,
    alpha: f64,
    tau: f64,
    diff: DiffOperator,
}

impl<A: LinearOperator> TvRegProblem<A> {
    /// `alpha = 0` is accepted and yields plain bound-constrained least squares.
    pub fn new(a: A, b: Vec<f64>, dims: Dims, alpha: f64, tau: f64) -> Result<Self> {
        check_len("TvRegProblem columns", dims.len(), a.ncols())?;
        check_len("TvRegProblem rhs", a.nrows(), b.len())?;
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {alpha}")));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidParameter(format!("tau must be > 0, got {tau}")));
        }
        Ok(Self {
            a,
            b,
            alpha,
            tau,
            diff: DiffOperator::new(dims),
        })
    }

    pub fn operator(&self) -> &A {
        &self.a
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dims(&self) -> Dims {
        self.diff.dims()
    }

    pub fn diff(&self) -> &DiffOperator {
        &self.diff
    }

    /// Same data with different regularization parameters.
    pub fn with_params(&self, alpha: f64, tau: f64) -> Result<Self>
    where
        A: Clone,
    {
        Self::new(self.a.clone(), self.b.clone(), self.dims(), alpha, tau)
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.a.nrows()];
        self.a.apply_to(x, &mut r);
        r.iter_mut().zip(&self.b).for_each(|(ri, bi)| *ri -= bi);
        r
    }

    /// `φ(x)` and `∇φ(x) = Aᵀ(Ax − b) + α∇T_τ(x)`.
    pub fn phi_value_grad(&self, x: &[f64]) -> Result<ObjEval> {
        let mut gradient = vec![0.0; self.dim()];
        let (value, residual_norm_sq) = self.eval_into(x, &mut gradient)?;
        Ok(ObjEval {
            value,
            gradient,
            residual_norm_sq,
        })
    }

    fn eval_into(&self, x: &[f64], grad: &mut [f64]) -> Result<(f64, f64)> {
        check_len("phi_value_grad", self.dim(), x.len())?;
        check_len("phi_value_grad gradient", self.dim(), grad.len())?;
        let r = self.residual(x);
        let rsq = dot(&r, &r);
        let tv = tv_value_grad_into(&self.diff, x, self.tau, grad)?;
        let mut atr = vec![0.0; self.dim()];
        self.a.apply_adjoint_to(&r, &mut atr);
        grad.iter_mut()
            .zip(&atr)
            .for_each(|(g, a)| *g = a + self.alpha * *g);
        Ok((0.5 * rsq + self.alpha * tv, rsq))
    }
}

impl<A: LinearOperator> Objective for TvRegProblem<A> {
    fn dim(&self) -> usize {
        self.diff.dims().len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_len("phi_value", self.dim(), x.len())?;
        let r = self.residual(x);
        let tv = if self.alpha == 0.0 {
            0.0
        } else {
            tv_value(&self.diff, x, self.tau)?
        };
        Ok(0.5 * dot(&r, &r) + self.alpha * tv)
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        Ok(self.eval_into(x, grad)?.0)
    }
}

/// `f(x) = ½ (x − c)ᵀ H (x − c)` with dense symmetric positive semidefinite `H`.
///
/// With the minimizer `c` inside the box, `f* = 0` and `x* = c`.
#[derive(Clone, Debug)]
pub struct BoxQuadratic {
    h: DenseMatrix,
    center: Vec<f64>,
}

impl BoxQuadratic {
    pub fn new(h: DenseMatrix, center: Vec<f64>) -> Result<Self> {
        check_len("BoxQuadratic rows", h.ncols(), h.nrows())?;
        check_len("BoxQuadratic center", h.ncols(), center.len())?;
        Ok(Self { h, center })
    }

    /// Random rotation of a spectrum log-spaced from `eig_min` to `eig_max`
    /// (both attained).
    pub fn with_spectrum(n: usize, eig_min: f64, eig_max: f64, center: Vec<f64>, seed: u64) -> Result<Self> {
        let eigs: Vec<f64> = (0..n)
            .map(|i| {
                if n == 1 {
                    eig_max
                } else {
                    let t = i as f64 / (n - 1) as f64;
                    eig_min * (eig_max / eig_min).powf(t)
                }
            })
            .collect();
        Self::with_eigenvalues(&eigs, center, seed)
    }

    pub fn with_eigenvalues(eigs: &[f64], center: Vec<f64>, seed: u64) -> Result<Self> {
        let q = random_orthogonal(eigs.len(), seed);
        let h = q.matmul(&DenseMatrix::diag(eigs)).matmul(&q.transpose());
        // Symmetrize away rounding asymmetry.
        let n = eigs.len();
        let h = DenseMatrix::from_fn(n, n, |i, j| 0.5 * (h.get(i, j) + h.get(j, i)));
        Self::new(h, center)
    }

    pub fn hessian(&self) -> &DenseMatrix {
        &self.h
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }
}

impl Objective for BoxQuadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let mut g = vec![0.0; self.dim()];
        self.value_grad(x, &mut g)
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_len("BoxQuadratic", self.dim(), x.len())?;
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        self.h.apply_to(&d, grad);
        Ok(0.5 * dot(&d, grad))
    }
}

/// Orthogonal matrix from modified Gram–Schmidt on a Gaussian matrix.
pub fn random_orthogonal(n: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        for _ in 0..2 {
            for c in &cols {
                let p = dot(c, &v);
                v.iter_mut().zip(c).for_each(|(vi, ci)| *vi -= p * ci);
            }
        }
        let nv = dot(&v, &v).sqrt();
        if nv > 1e-8 {
            v.iter_mut().for_each(|vi| *vi /= nv);
            cols.push(v);
        }
    }
    DenseMatrix::from_fn(n, n, |i, j| cols[j][i])
}

/// `G_ν(x) = ν (x − P_Q(x − ∇f(x)/ν))`. A precomputed gradient is used when supplied.
pub fn gradient_map<F: Objective + ?Sized>(
    f: &F,
    x: &[f64],
    nu: f64,
    grad: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::InvalidParameter(format!("nu must be > 0, got {nu}")));
    }
    check_len("gradient_map", f.dim(), x.len())?;
    let owned;
    let g = match grad {
        Some(g) => {
            check_len("gradient_map gradient", f.dim(), g.len())?;
            g
        }
        None => {
            let mut buf = vec![0.0; f.dim()];
            f.value_grad(x, &mut buf)?;
            owned = buf;
            &owned
        }
    };
    let mut step: Vec<f64> = x.iter().zip(g).map(|(xi, gi)| xi - gi / nu).collect();
    f.project(&mut step);
    Ok(x.iter().zip(&step).map(|(xi, si)| nu * (xi - si)).collect())
}

/// Local strong-convexity estimate
/// `M(x, y) = (f(x) − f(y) − ∇f(y)ᵀ(x − y)) / (½‖x − y‖²)`, or `+∞` when `x = y`.
///
/// Raw formula: may be negative under cancellation. Callers clamp.
pub fn local_mu(f_x: f64, f_y: f64, grad_y: &[f64], x: &[f64], y: &[f64]) -> f64 {
    let dsq = dist_sq(x, y);
    if dsq == 0.0 {
        return f64::INFINITY;
    }
    let lin: f64 = grad_y
        .iter()
        .zip(x.iter().zip(y))
        .map(|(g, (xi, yi))| g * (xi - yi))
        .sum();
    (f_x - f_y - lin) / (0.5 * dsq)
}

/// Global strong-convexity / Lipschitz parameters of `φ` from the spectrum of `AᵀA`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryParams {
    pub mu: f64,
    pub lipschitz: f64,
    /// `L/μ`, undefined when `μ = 0`.
    pub modulus: Option<f64>,
}

/// `μ = σ_min(A)²`, `L = ‖A‖² + 12α/τ`, `Q = L/μ` when `μ > 0`.
pub fn theory_params(norm_a_sq: f64, sigma_min_sq: f64, alpha: f64, tau: f64) -> TheoryParams {
    let mu = sigma_min_sq.max(0.0);
    let lipschitz = norm_a_sq + alpha * DIFF_NORM_SQ_BOUND / tau;
    TheoryParams {
        mu,
        lipschitz,
        modulus: (mu > 0.0).then(|| lipschitz / mu),
    }
}
