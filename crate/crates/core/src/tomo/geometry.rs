use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::Dims;

use super::lebedev::lebedev_directions;

/// Default side length of the square detector: the diameter of the unit
/// cube, so every projection of the cube fits.
pub const DETECTOR_EXTENT: f64 = 1.732_050_807_568_877_2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: [f64; 3],
    pub direction: [f64; 3],
}

/// Parallel-beam geometry: for each direction `d`, a `p × p` detector on the
/// plane through the cube center orthogonal to `d`, one ray per pixel center.
///
/// Rays are numbered direction-major, then detector row (`v`), then column
/// (`u`) fastest: ray `(dir, r, c)` has index `dir·p² + r·p + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionGeometry {
    directions: Vec<[f64; 3]>,
    pixels: usize,
    extent: f64,
}

impl ProjectionGeometry {
    pub fn new(directions: Vec<[f64; 3]>, pixels: usize) -> Result<Self> {
        if pixels == 0 {
            return Err(Error::InvalidParameter("detector needs at least one pixel".into()));
        }
        for d in &directions {
            let n = norm3(*d);
            if (n - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("direction {d:?} has norm {n}")));
            }
        }
        Ok(Self {
            directions,
            pixels,
            extent: DETECTOR_EXTENT,
        })
    }

    /// Same rays with a detector of side `extent` instead of [`DETECTOR_EXTENT`].
    pub fn with_extent(mut self, extent: f64) -> Result<Self> {
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(Error::InvalidParameter(format!("detector extent must be > 0, got {extent}")));
        }
        self.extent = extent;
        Ok(self)
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    /// Antipodally unique Lebedev directions with a `p × p` detector.
    pub fn lebedev(n_proj: usize, pixels: usize) -> Result<Self> {
        Self::new(lebedev_directions(n_proj)?, pixels)
    }

    pub fn directions(&self) -> &[[f64; 3]] {
        &self.directions
    }

    pub fn pixels(&self) -> usize {
        self.pixels
    }

    pub fn num_rays(&self) -> usize {
        self.directions.len() * self.pixels * self.pixels
    }

    /// Orthonormal detector axes `(u, v)` for direction `d`.
    ///
    /// `u = e_z × d / ‖e_z × d‖` is horizontal (`u = e_x` when `d = ±e_z`) and
    /// `v = d × u`.
    pub fn detector_basis(d: [f64; 3]) -> ([f64; 3], [f64; 3]) {
        let c = [-d[1], d[0], 0.0];
        let nc = norm3(c);
        let u = if nc == 0.0 { [1.0, 0.0, 0.0] } else { c.map(|x| x / nc) };
        let v = [
            d[1] * u[2] - d[2] * u[1],
            d[2] * u[0] - d[0] * u[2],
            d[0] * u[1] - d[1] * u[0],
        ];
        (u, v)
    }

    /// Offset of pixel `i` from the detector center along its axis.
    pub fn pixel_offset(&self, i: usize) -> f64 {
        ((i as f64 + 0.5) / self.pixels as f64 - 0.5) * self.extent
    }

    pub fn ray(&self, index: usize) -> Ray {
        let pp = self.pixels * self.pixels;
        let d = self.directions[index / pp];
        let r = (index % pp) / self.pixels;
        let c = index % self.pixels;
        let (u, v) = Self::detector_basis(d);
        let (su, sv) = (self.pixel_offset(c), self.pixel_offset(r));
        let origin = [0, 1, 2].map(|k| 0.5 + su * u[k] + sv * v[k]);
        Ray { origin, direction: d }
    }

    /// Text manifest: a header line, then one direction per line.
    pub fn write_manifest<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# directions={} pixels={} extent={:.16e}",
            self.directions.len(),
            self.pixels,
            self.extent
        )?;
        for d in &self.directions {
            writeln!(w, "{:.16e} {:.16e} {:.16e}", d[0], d[1], d[2])?;
        }
        Ok(())
    }
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Parameter interval `[t0, t1]` where the line `origin + t·direction` is
/// inside the closed unit cube, or `None` if it misses.
pub fn cube_interval(origin: [f64; 3], direction: [f64; 3]) -> Option<(f64, f64)> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for c in 0..3 {
        let (o, d) = (origin[c], direction[c]);
        if d == 0.0 {
            if !(0.0..=1.0).contains(&o) {
                return None;
            }
        } else {
            let a = (0.0 - o) / d;
            let b = (1.0 - o) / d;
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
    }
    (t1 > t0).then_some((t0, t1))
}

/// Length of the line's intersection with the unit cube.
pub fn chord_length(origin: [f64; 3], direction: [f64; 3]) -> f64 {
    let n = norm3(direction);
    cube_interval(origin, direction).map_or(0.0, |(t0, t1)| (t1 - t0) * n)
}

/// Voxel traversal of the full line `origin + t·direction` through the
/// unit cube divided into `dims` cells.
///
/// Returns `(voxel index, path length)` pairs in traversal order; the
/// lengths sum to the chord length. Voxels are half-open in the direction
/// of travel. A line running exactly along a voxel face is assigned to the
/// lower-index voxel.
pub fn trace_ray(dims: Dims, origin: [f64; 3], direction: [f64; 3]) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    trace_ray_into(dims, origin, direction, &mut out);
    out
}

pub fn trace_ray_into(dims: Dims, origin: [f64; 3], direction: [f64; 3], out: &mut Vec<(usize, f64)>) {
    out.clear();
    let Some((t_in, t_out)) = cube_interval(origin, direction) else {
        return;
    };
    let speed = norm3(direction);
    let n = dims.as_array();
    let mut idx = [0usize; 3];
    let mut step = [0isize; 3];
    let mut t_next = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for c in 0..3 {
        let nc = n[c] as f64;
        let d = direction[c];
        let pos = (origin[c] + t_in * d) * nc;
        let cell = if d > 0.0 {
            pos.floor()
        } else {
            // Moving down or grazing: a point on a face belongs to the lower cell.
            pos.ceil() - 1.0
        };
        let i = cell.clamp(0.0, nc - 1.0) as usize;
        idx[c] = i;
        if d > 0.0 {
            step[c] = 1;
            t_next[c] = ((i + 1) as f64 / nc - origin[c]) / d;
            t_delta[c] = 1.0 / (nc * d);
        } else if d < 0.0 {
            step[c] = -1;
            t_next[c] = (i as f64 / nc - origin[c]) / d;
            t_delta[c] = -1.0 / (nc * d);
        }
    }

    let mut t = t_in;
    loop {
        let axis = if t_next[0] <= t_next[1] && t_next[0] <= t_next[2] {
            0
        } else if t_next[1] <= t_next[2] {
            1
        } else {
            2
        };
        let t_end = t_next[axis].min(t_out);
        if t_end > t {
            out.push((dims.index(idx[0], idx[1], idx[2]), (t_end - t) * speed));
            t = t_end;
        }
        if t >= t_out {
            break;
        }
        let next = idx[axis] as isize + step[axis];
        if next < 0 || next >= n[axis] as isize {
            break;
        }
        idx[axis] = next as usize;
        t_next[axis] += t_delta[axis];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_ray_through_center() {
        for n in [1, 2, 5, 8] {
            let segs = trace_ray(Dims::cube(n), [0.5, 0.5, -3.0], [0.0, 0.0, 1.0]);
            assert_eq!(segs.len(), n);
            for &(_, len) in &segs {
                assert!((len - 1.0 / n as f64).abs() < 1e-14);
            }
            let total: f64 = segs.iter().map(|s| s.1).sum();
            assert!((total - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn grazing_goes_to_lower_index() {
        let dims = Dims::cube(2);
        let segs = trace_ray(dims, [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]);
        let cells: Vec<_> = segs.iter().map(|s| dims.unravel(s.0)).collect();
        assert_eq!(cells, vec![(0, 0, 0), (0, 0, 1)]);
        let back = trace_ray(dims, [0.5, 0.5, 1.0], [0.0, 0.0, -1.0]);
        let cells: Vec<_> = back.iter().map(|s| dims.unravel(s.0)).collect();
        assert_eq!(cells, vec![(0, 0, 1), (0, 0, 0)]);
    }

    #[test]
    fn miss_is_empty() {
        assert!(trace_ray(Dims::cube(4), [2.0, 2.0, 0.0], [0.0, 0.0, 1.0]).is_empty());
        assert!(trace_ray(Dims::cube(4), [1.5, 0.0, 0.5], [0.6, 0.8, 0.0]).is_empty());
    }

    #[test]
    fn main_diagonal() {
        let d = [1.0 / 3f64.sqrt(); 3];
        for n in [1, 3, 7] {
            let segs = trace_ray(Dims::cube(n), [0.5; 3], d);
            let total: f64 = segs.iter().map(|s| s.1).sum();
            assert!((total - 3f64.sqrt()).abs() < 1e-12);
            assert!(segs.len() >= n);
        }
    }

    #[test]
    fn detector_basis_is_orthonormal() {
        for d in lebedev_directions(37).unwrap() {
            let (u, v) = ProjectionGeometry::detector_basis(d);
            let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
            assert!((dot(u, u) - 1.0).abs() < 1e-14);
            assert!((dot(v, v) - 1.0).abs() < 1e-14);
            assert!(dot(u, v).abs() < 1e-14);
            assert!(dot(u, d).abs() < 1e-14);
            assert!(dot(v, d).abs() < 1e-14);
        }
    }

    #[test]
    fn ray_numbering() {
        let g = ProjectionGeometry::lebedev(13, 3).unwrap();
        assert_eq!(g.num_rays(), 13 * 9);
        // Center pixel of every direction passes through the cube center.
        for dir in 0..13 {
            let r = g.ray(dir * 9 + 4);
            assert!(r.origin.iter().all(|&o| (o - 0.5).abs() < 1e-15));
            assert_eq!(r.direction, g.directions()[dir]);
        }
    }
}
