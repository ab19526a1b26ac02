//! Bound-constrained, Huber-smoothed total-variation reconstruction with
//! accelerated first-order solvers that estimate the Lipschitz and
//! strong-convexity constants on the fly.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: vectors, sparse/dense operators, CGLS warm start.
//! * [`tv`]: the periodic forward-difference operator and the smoothed TV term.
//! * [`objective`]: `φ(x) = ½‖Ax − b‖² + α T_τ(x)` over the unit box, and
//!   related quantities (gradient map, local strong-convexity estimate).
//! * [`solvers`]: GP, GPBB, Nesterov, UPN and UPN₀.
//! * [`tomo`]: a 3D parallel-beam test problem generator.

pub mod error;
pub mod linalg;
pub mod objective;
pub mod solvers;
pub mod tomo;
pub mod tv;

pub use error::{Error, Result};
pub use linalg::{CsrMatrix, DenseMatrix, Dims, LinearOperator, Volume};
pub use objective::{Objective, TvRegProblem};
pub use solvers::{solve, Algorithm, ConvergenceHistory, SolveResult, SolverConfig, StopReason};
