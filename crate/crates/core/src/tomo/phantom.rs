use crate::linalg::{Dims, Volume};

/// An ellipsoid in domain coordinates `[0,1]³`.
///
/// A point `p` lies inside when `R(p − ½) + ½ − center`, scaled per axis by
/// `semi_axes`, has norm at most 1. `R` is the Euler rotation built from
/// `angles = (φ, θ, ψ)` in radians; it acts on coordinates before the center
/// is subtracted, following the usual 3D Shepp-Logan convention.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ellipsoid {
    pub intensity: f64,
    pub center: [f64; 3],
    pub semi_axes: [f64; 3],
    pub angles: [f64; 3],
}

impl Ellipsoid {
    /// From the classical table layout on `[-1,1]³`, angles in degrees.
    pub fn from_unit_table(row: [f64; 10]) -> Self {
        let [a, ax, ay, az, x0, y0, z0, phi, theta, psi] = row;
        Self {
            intensity: a,
            center: [(x0 + 1.0) / 2.0, (y0 + 1.0) / 2.0, (z0 + 1.0) / 2.0],
            semi_axes: [ax / 2.0, ay / 2.0, az / 2.0],
            angles: [phi.to_radians(), theta.to_radians(), psi.to_radians()],
        }
    }

    fn rotation(&self) -> [[f64; 3]; 3] {
        let (sphi, cphi) = self.angles[0].sin_cos();
        let (stheta, ctheta) = self.angles[1].sin_cos();
        let (spsi, cpsi) = self.angles[2].sin_cos();
        [
            [
                cpsi * cphi - ctheta * sphi * spsi,
                cpsi * sphi + ctheta * cphi * spsi,
                spsi * stheta,
            ],
            [
                -spsi * cphi - ctheta * sphi * cpsi,
                -spsi * sphi + ctheta * cphi * cpsi,
                cpsi * stheta,
            ],
            [stheta * sphi, -stheta * cphi, ctheta],
        ]
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        let r = self.rotation();
        let q = [2.0 * p[0] - 1.0, 2.0 * p[1] - 1.0, 2.0 * p[2] - 1.0];
        let mut s = 0.0;
        for i in 0..3 {
            let rot = r[i][0] * q[0] + r[i][1] * q[1] + r[i][2] * q[2];
            let d = (rot - (2.0 * self.center[i] - 1.0)) / (2.0 * self.semi_axes[i]);
            s += d * d;
        }
        s <= 1.0
    }
}

/// Ten-ellipsoid 3D Shepp-Logan table with the high-contrast ("modified")
/// intensities, on `[-1,1]³`:
/// `intensity, a, b, c, x0, y0, z0, φ°, θ°, ψ°`.
pub const SHEPP_LOGAN_TABLE: [[f64; 10]; 10] = [
    [1.0, 0.6900, 0.920, 0.810, 0.00, 0.0000, 0.00, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.874, 0.780, 0.00, -0.0184, 0.00, 0.0, 0.0, 0.0],
    [-0.2, 0.1100, 0.310, 0.220, 0.22, 0.0000, 0.00, -18.0, 0.0, 10.0],
    [-0.2, 0.1600, 0.410, 0.280, -0.22, 0.0000, 0.00, 18.0, 0.0, 10.0],
    [0.1, 0.2100, 0.250, 0.410, 0.00, 0.3500, -0.15, 0.0, 0.0, 0.0],
    [0.1, 0.0460, 0.046, 0.050, 0.00, 0.1000, 0.25, 0.0, 0.0, 0.0],
    [0.1, 0.0460, 0.046, 0.050, 0.00, -0.1000, 0.25, 0.0, 0.0, 0.0],
    [0.1, 0.0460, 0.023, 0.050, -0.08, -0.6050, 0.00, 0.0, 0.0, 0.0],
    [0.1, 0.0230, 0.023, 0.020, 0.00, -0.6060, 0.00, 0.0, 0.0, 0.0],
    [0.1, 0.0230, 0.046, 0.020, 0.06, -0.6050, 0.00, 0.0, 0.0, 0.0],
];

pub fn shepp_logan_ellipsoids() -> Vec<Ellipsoid> {
    SHEPP_LOGAN_TABLE.iter().map(|&r| Ellipsoid::from_unit_table(r)).collect()
}

/// Sum of the intensities of the ellipsoids containing each voxel center
/// `((i+½)/m, (j+½)/n, (k+½)/l)`.
///
/// Sums are rounded to 12 decimals, so overlapping `1 − 0.8` gives exactly `0.2`.
pub fn phantom(dims: Dims, ellipsoids: &[Ellipsoid]) -> Volume {
    let [m, n, l] = dims.as_array();
    let mut vol = Volume::zeros(dims);
    for k in 0..l {
        let z = (k as f64 + 0.5) / l as f64;
        for j in 0..n {
            let y = (j as f64 + 0.5) / n as f64;
            for i in 0..m {
                let x = (i as f64 + 0.5) / m as f64;
                let s: f64 = ellipsoids
                    .iter()
                    .filter(|e| e.contains([x, y, z]))
                    .map(|e| e.intensity)
                    .sum();
                // `+ 0.0` turns a rounded `-0.0` into `0.0`.
                vol.set(i, j, k, (s * 1e12).round() / 1e12 + 0.0);
            }
        }
    }
    vol
}

pub fn shepp_logan_3d(m: usize, n: usize, l: usize) -> Volume {
    phantom(Dims::new(m, n, l), &shepp_logan_ellipsoids())
}
