use std::io::{BufRead, Write};

use rayon::prelude::*;

use super::LinearOperator;
use crate::error::{Error, Result};

/// Compressed-sparse-row matrix.
///
/// Column indices are strictly increasing inside each row and no explicit
/// zeros are stored.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Assembles from `(row, col, value)` triplets. Duplicates are summed and
    /// resulting zeros dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        for &(r, c, v) in &triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::InvalidParameter(format!(
                    "entry ({r}, {c}) outside a {nrows}x{ncols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("CsrMatrix::from_triplets"));
            }
        }
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for (r, c, v) in triplets {
            match rows[r].last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => rows[r].push((c, v)),
            }
        }
        Self::from_rows(ncols, rows)
    }

    /// Builds from per-row `(col, value)` lists. Each row is sorted and
    /// deduplicated (summing), and zeros are removed.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (c, v) in row {
                if c >= ncols {
                    return Err(Error::InvalidParameter(format!(
                        "column {c} outside a matrix with {ncols} columns"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::NonFinite("CsrMatrix::from_rows"));
                }
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            for (c, v) in merged {
                if v != 0.0 {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.values[s..e])
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Removes rows without stored entries. Returns the purged matrix and the
    /// original index of every kept row.
    pub fn purge_zero_rows(&self) -> (Self, Vec<usize>) {
        let kept: Vec<usize> = (0..self.nrows)
            .filter(|&i| self.row_ptr[i + 1] > self.row_ptr[i])
            .collect();
        let mut row_ptr = Vec::with_capacity(kept.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        for &i in &kept {
            let (c, v) = self.row(i);
            col_idx.extend_from_slice(c);
            values.extend_from_slice(v);
            row_ptr.push(col_idx.len());
        }
        (
            Self {
                nrows: kept.len(),
                ncols: self.ncols,
                row_ptr,
                col_idx,
                values,
            },
            kept,
        )
    }

    /// Multiplies every stored entry by `s`.
    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    /// Sum of the stored entries of each row.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                writeln!(w, "{} {} {:.16e}", i + 1, c + 1, v)?;
            }
        }
        Ok(())
    }

    pub fn read_matrix_market<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let banner = lines
            .next()
            .ok_or_else(|| Error::Parse("empty Matrix Market file".into()))??;
        let lower = banner.to_ascii_lowercase();
        if !lower.starts_with("%%matrixmarket matrix coordinate real") {
            return Err(Error::Parse(format!("unsupported banner {banner:?}")));
        }
        let symmetric = lower.contains("symmetric");
        let mut size: Option<(usize, usize, usize)> = None;
        let mut triplets = Vec::new();
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            let f: Vec<&str> = t.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("malformed line {t:?}")));
            }
            let p = |s: &str| {
                s.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("bad index {s:?}: {e}")))
            };
            match size {
                None => size = Some((p(f[0])?, p(f[1])?, p(f[2])?)),
                Some(_) => {
                    let (i, j) = (p(f[0])?, p(f[1])?);
                    if i == 0 || j == 0 {
                        return Err(Error::Parse("Matrix Market indices are 1-based".into()));
                    }
                    let v = f[2]
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad value {:?}: {e}", f[2])))?;
                    triplets.push((i - 1, j - 1, v));
                    if symmetric && i != j {
                        triplets.push((j - 1, i - 1, v));
                    }
                }
            }
        }
        let (nrows, ncols, nnz) = size.ok_or_else(|| Error::Parse("missing size line".into()))?;
        let expected = if symmetric { triplets.len() } else { nnz };
        if !symmetric && triplets.len() != expected {
            return Err(Error::Parse(format!(
                "expected {nnz} entries, found {}",
                triplets.len()
            )));
        }
        Self::from_triplets(nrows, ncols, triplets)
    }
}

const PAR_ROWS: usize = 4096;

impl LinearOperator for CsrMatrix {
    fn nrows(&self) -> usize {
        self.nrows
    }

    fn ncols(&self) -> usize {
        self.ncols
    }

    fn apply_to(&self, x: &[f64], out: &mut [f64]) {
        let row_dot = |i: usize| -> f64 {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
        };
        if self.nrows >= PAR_ROWS {
            out.par_iter_mut()
                .with_min_len(1024)
                .enumerate()
                .for_each(|(i, o)| *o = row_dot(i));
        } else {
            for (i, o) in out.iter_mut().enumerate() {
                *o = row_dot(i);
            }
        }
    }

    fn apply_adjoint_to(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                out[c] += v * yi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_are_sorted_merged_and_cleaned() {
        let a = CsrMatrix::from_triplets(
            2,
            3,
            vec![(1, 2, 1.0), (0, 1, 2.0), (1, 0, 3.0), (0, 1, -2.0), (1, 2, 4.0)],
        )
        .unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.row(0).0, &[] as &[usize]);
        assert_eq!(a.row(1), (&[0usize, 2][..], &[3.0, 5.0][..]));
    }

    #[test]
    fn out_of_range_and_nan_rejected() {
        assert!(CsrMatrix::from_triplets(1, 1, vec![(0, 1, 1.0)]).is_err());
        assert!(CsrMatrix::from_triplets(1, 1, vec![(0, 0, f64::NAN)]).is_err());
    }

    #[test]
    fn purge_keeps_nonempty_rows_in_order() {
        let a = CsrMatrix::from_triplets(4, 2, vec![(1, 0, 1.0), (3, 1, 2.0)]).unwrap();
        let (p, kept) = a.purge_zero_rows();
        assert_eq!(kept, vec![1, 3]);
        assert_eq!(p.nrows(), 2);
        assert_eq!(p.row(1), (&[1usize][..], &[2.0][..]));
    }

    #[test]
    fn matrix_market_roundtrip() {
        let a = CsrMatrix::from_triplets(
            3,
            4,
            vec![(0, 0, 0.1), (0, 3, 1.0 / 3.0), (2, 1, -7.25), (1, 2, 1e-17)],
        )
        .unwrap();
        let mut buf = Vec::new();
        a.write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().nth(2).unwrap().starts_with("1 1 "));
        let b = CsrMatrix::read_matrix_market(&buf[..]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn matrix_market_rejects_zero_index() {
        let text = "%%MatrixMarket matrix coordinate real general\n1 1 1\n0 1 1.0\n";
        assert!(CsrMatrix::read_matrix_market(text.as_bytes()).is_err());
    }
}
