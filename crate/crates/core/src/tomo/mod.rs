//! 3D parallel-beam tomography test problems.
//!
//! Voxel `(i, j, k)` of an `m × n × l` grid covers
//! `[i/m, (i+1)/m) × [j/n, (j+1)/n) × [k/l, (k+1)/l)` of the unit cube, and
//! `a_ij` is the length of ray `i` inside voxel `j`.

mod geometry;
mod lebedev;
mod phantom;

pub use geometry::{
    chord_length, cube_interval, trace_ray, trace_ray_into, ProjectionGeometry, Ray, DETECTOR_EXTENT,
};
pub use lebedev::{is_canonical, lebedev_directions, lebedev_points, SUPPORTED_PROJECTIONS};
pub use phantom::{phantom, shepp_logan_3d, shepp_logan_ellipsoids, Ellipsoid, SHEPP_LOGAN_TABLE};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{cgls_warm_start, norm, CsrMatrix, Dims, LinearOperator, Volume, WARM_START_ITERS};
use crate::objective::TvRegProblem;

/// System matrix after dropping rays that miss every voxel, together with
/// the geometry index of every kept row.
#[derive(Clone, Debug)]
pub struct SystemMatrix {
    pub matrix: CsrMatrix,
    pub ray_index: Vec<usize>,
}

/// One row per ray of `geometry` with nonzero intersection; empty rows are
/// purged. Row order follows the geometry's ray numbering.
pub fn build_system_matrix(geometry: &ProjectionGeometry, dims: Dims) -> Result<SystemMatrix> {
    if dims.is_empty() {
        return Err(Error::InvalidParameter("empty voxel grid".into()));
    }
    let rows: Vec<Vec<(usize, f64)>> = (0..geometry.num_rays())
        .into_par_iter()
        .map_init(Vec::new, |buf, r| {
            let ray = geometry.ray(r);
            trace_ray_into(dims, ray.origin, ray.direction, buf);
            buf.clone()
        })
        .collect();
    let full = CsrMatrix::from_rows(dims.len(), rows)?;
    let (matrix, ray_index) = full.purge_zero_rows();
    Ok(SystemMatrix { matrix, ray_index })
}

/// `b + e` with Gaussian `e` rescaled so that `‖e‖/‖b‖ = rel_level`.
pub fn add_noise(b: &[f64], rel_level: f64, seed: u64) -> Result<Vec<f64>> {
    if !(rel_level >= 0.0) || !rel_level.is_finite() {
        return Err(Error::InvalidParameter(format!("noise level must be >= 0, got {rel_level}")));
    }
    if rel_level == 0.0 {
        return Ok(b.to_vec());
    }
    let nb = norm(b);
    if nb == 0.0 {
        return Err(Error::InvalidParameter("relative noise on a zero right-hand side".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e: Vec<f64> = (0..b.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let scale = rel_level * nb / norm(&e);
    Ok(b.iter().zip(&e).map(|(bi, ei)| bi + scale * ei).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestProblemSpec {
    pub dims: Dims,
    pub pixels: usize,
    pub n_proj: usize,
    pub alpha: f64,
    pub tau: f64,
    pub noise: f64,
    pub seed: u64,
}

impl TestProblemSpec {
    /// Voxels per unit length along the longest grid axis.
    pub fn voxels_per_unit(&self) -> f64 {
        let [m, n, l] = self.dims.as_array();
        m.max(n).max(l) as f64
    }

    /// Detector side length with pixel pitch equal to voxel pitch.
    pub fn detector_extent(&self) -> f64 {
        self.pixels as f64 / self.voxels_per_unit()
    }

    /// Geometry used by [`make_test_problem`].
    pub fn geometry(&self) -> Result<ProjectionGeometry> {
        ProjectionGeometry::lebedev(self.n_proj, self.pixels)?.with_extent(self.detector_extent())
    }

    pub const PRESETS: [&'static str; 4] = ["T1", "T2", "T1-desk", "T2-desk"];

    /// `T1`/`T2`: 43³ grid, 63×63 detector, 37/13 projections.
    /// `T1-desk`/`T2-desk`: 21³ grid, 31×31 detector.
    /// All use `α = 1`, `τ = 1e-4`, 1% noise and seed 0.
    pub fn preset(name: &str) -> Result<Self> {
        let (n, p, proj) = match name.to_ascii_uppercase().as_str() {
            "T1" => (43, 63, 37),
            "T2" => (43, 63, 13),
            "T1-DESK" => (21, 31, 37),
            "T2-DESK" => (21, 31, 13),
            _ => {
                return Err(Error::Parse(format!(
                    "unknown preset {name:?}; expected one of {:?}",
                    Self::PRESETS
                )))
            }
        };
        Ok(Self {
            dims: Dims::cube(n),
            pixels: p,
            n_proj: proj,
            alpha: 1.0,
            tau: 1e-4,
            noise: 0.01,
            seed: 0,
        })
    }
}

/// Phantom, geometry, system matrix, noisy data and warm start.
#[derive(Clone, Debug)]
pub struct TestProblem {
    pub spec: TestProblemSpec,
    pub problem: TvRegProblem<CsrMatrix>,
    pub x_exact: Volume,
    /// `b` before noise.
    pub b_exact: Vec<f64>,
    /// CGLS warm start (unprojected).
    pub x0: Vec<f64>,
    pub geometry: ProjectionGeometry,
    pub ray_index: Vec<usize>,
}

impl TestProblem {
    pub fn matrix(&self) -> &CsrMatrix {
        self.problem.operator()
    }

    pub fn rhs(&self) -> &[f64] {
        self.problem.rhs()
    }
}

/// Builds the full test problem.
///
/// The detector pixel pitch equals the voxel pitch (`extent = p / max(m, n, l)`),
/// so a `p × p` detector sees a centered `p`-voxel-wide window. With the
/// `T1`/`T2` presets this purges down to 99361 and 33937 rows.
///
/// Path lengths are measured in voxel units: the unit-cube matrix from
/// [`build_system_matrix`] is multiplied by [`TestProblemSpec::voxels_per_unit`].
/// For `T1` this gives `‖A‖² ≈ 1.52e3`.
pub fn make_test_problem(spec: &TestProblemSpec) -> Result<TestProblem> {
    let [m, n, l] = spec.dims.as_array();
    let x_exact = shepp_logan_3d(m, n, l);
    let geometry = spec.geometry()?;
    let mut sys = build_system_matrix(&geometry, spec.dims)?;
    sys.matrix.scale(spec.voxels_per_unit());
    let b_exact = sys.matrix.apply(x_exact.as_slice())?;
    let b = add_noise(&b_exact, spec.noise, spec.seed)?;
    let x0 = cgls_warm_start(&sys.matrix, &b, WARM_START_ITERS)?;
    let problem = TvRegProblem::new(sys.matrix, b, spec.dims, spec.alpha, spec.tau)?;
    Ok(TestProblem {
        spec: spec.clone(),
        problem,
        x_exact,
        b_exact,
        x0,
        geometry,
        ray_index: sys.ray_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_level_is_exact() {
        let b: Vec<f64> = (0..500).map(|i| (i as f64 * 0.37).sin() + 2.0).collect();
        let nb = add_noise(&b, 0.01, 3).unwrap();
        let e: Vec<f64> = nb.iter().zip(&b).map(|(x, y)| x - y).collect();
        assert!((norm(&e) / norm(&b) - 0.01).abs() < 1e-12);
        assert_eq!(add_noise(&b, 0.0, 3).unwrap(), b);
        assert_eq!(nb, add_noise(&b, 0.01, 3).unwrap());
        assert!(add_noise(&[0.0; 4], 0.01, 1).is_err());
    }

    #[test]
    fn small_matrix_rows_are_chords() {
        let g = ProjectionGeometry::lebedev(13, 9).unwrap();
        let dims = Dims::new(6, 5, 4);
        let sys = build_system_matrix(&g, dims).unwrap();
        assert_eq!(sys.matrix.nrows(), sys.ray_index.len());
        for (row, &r) in sys.ray_index.iter().enumerate() {
            let ray = g.ray(r);
            let s: f64 = sys.matrix.row(row).1.iter().sum();
            assert!((s - chord_length(ray.origin, ray.direction)).abs() < 1e-12);
            assert!(s <= 3f64.sqrt() + 1e-12);
        }
        assert!(sys.matrix.values().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn preset_names() {
        assert_eq!(TestProblemSpec::preset("t2-desk").unwrap().n_proj, 13);
        assert!(TestProblemSpec::preset("T3").is_err());
    }
}
