use crate::error::{Error, Result};

/// Projection counts with an embedded rule (antipodal halves of the 26- and
/// 74-point Lebedev rules).
pub const SUPPORTED_PROJECTIONS: [usize; 2] = [13, 37];

/// Octahedral orbit generators of the Lebedev rules.
#[derive(Clone, Copy, Debug)]
enum Orbit {
    /// `(±1, 0, 0)`: 6 points.
    Axes,
    /// `(0, ±a, ±a)`, `a = 1/√2`: 12 points.
    Edges,
    /// `(±a, ±a, ±a)`, `a = 1/√3`: 8 points.
    Corners,
    /// `(±a, ±a, ±b)`, `b = √(1 − 2a²)`: 24 points.
    Aab(f64),
    /// `(±a, ±b, 0)`, `b = √(1 − a²)`: 24 points.
    Ab0(f64),
}

impl Orbit {
    fn points(self) -> Vec<[f64; 3]> {
        let patterns: Vec<[f64; 3]> = match self {
            Orbit::Axes => vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            Orbit::Edges => {
                let a = 0.5f64.sqrt();
                vec![[0.0, a, a], [a, 0.0, a], [a, a, 0.0]]
            }
            Orbit::Corners => {
                let a = (1.0f64 / 3.0).sqrt();
                vec![[a, a, a]]
            }
            Orbit::Aab(a) => {
                let b = (1.0 - 2.0 * a * a).sqrt();
                vec![[a, a, b], [a, b, a], [b, a, a]]
            }
            Orbit::Ab0(a) => {
                let b = (1.0 - a * a).sqrt();
                vec![
                    [a, b, 0.0],
                    [b, a, 0.0],
                    [a, 0.0, b],
                    [b, 0.0, a],
                    [0.0, a, b],
                    [0.0, b, a],
                ]
            }
        };
        let mut out = Vec::new();
        for p in patterns {
            for signs in 0..8u8 {
                let q = [0, 1, 2].map(|c| if signs >> c & 1 == 1 { -p[c] } else { p[c] });
                // Skip sign flips of zero entries, which would duplicate points.
                let flips_zero = (0..3).any(|c| signs >> c & 1 == 1 && p[c] == 0.0);
                if !flips_zero {
                    out.push(q);
                }
            }
        }
        out
    }
}

fn rule(points: usize) -> Option<Vec<Orbit>> {
    match points {
        26 => Some(vec![Orbit::Axes, Orbit::Edges, Orbit::Corners]),
        74 => Some(vec![
            Orbit::Axes,
            Orbit::Edges,
            Orbit::Corners,
            Orbit::Aab(0.480_384_461_415_261_4),
            Orbit::Ab0(0.320_772_648_980_776_4),
        ]),
        _ => None,
    }
}

/// Full Lebedev point set with `points` nodes (26 or 74).
pub fn lebedev_points(points: usize) -> Result<Vec<[f64; 3]>> {
    let orbits = rule(points).ok_or(Error::UnsupportedProjections {
        got: points / 2,
        supported: SUPPORTED_PROJECTIONS.to_vec(),
    })?;
    Ok(orbits.into_iter().flat_map(Orbit::points).collect())
}

/// `true` if the first nonzero component is positive.
pub fn is_canonical(d: [f64; 3]) -> bool {
    d.iter().find(|&&c| c != 0.0).is_some_and(|&c| c > 0.0)
}

/// One direction per antipodal pair of the Lebedev rule with `2·n_proj`
/// points, keeping the member whose first nonzero component is positive.
/// Order follows the rule's orbit generation order.
pub fn lebedev_directions(n_proj: usize) -> Result<Vec<[f64; 3]>> {
    if !SUPPORTED_PROJECTIONS.contains(&n_proj) {
        return Err(Error::UnsupportedProjections {
            got: n_proj,
            supported: SUPPORTED_PROJECTIONS.to_vec(),
        });
    }
    let dirs: Vec<[f64; 3]> = lebedev_points(2 * n_proj)?
        .into_iter()
        .filter(|&d| is_canonical(d))
        .collect();
    debug_assert_eq!(dirs.len(), n_proj);
    Ok(dirs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_sizes() {
        assert_eq!(lebedev_points(26).unwrap().len(), 26);
        assert_eq!(lebedev_points(74).unwrap().len(), 74);
        assert!(lebedev_points(50).is_err());
    }

    #[test]
    fn antipodal_pairing() {
        for pts in [26, 74] {
            let all = lebedev_points(pts).unwrap();
            for p in &all {
                let neg = p.map(|c| -c);
                let hits = all
                    .iter()
                    .filter(|q| (0..3).all(|c| (q[c] - neg[c]).abs() < 1e-14))
                    .count();
                assert_eq!(hits, 1);
            }
            assert_eq!(lebedev_directions(pts / 2).unwrap().len(), pts / 2);
        }
    }

    #[test]
    fn unsupported_count_lists_supported() {
        match lebedev_directions(12) {
            Err(Error::UnsupportedProjections { got, supported }) => {
                assert_eq!(got, 12);
                assert_eq!(supported, vec![13, 37]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
