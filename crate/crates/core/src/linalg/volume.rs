use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};

/// Grid dimensions `(m, n, l)` of a voxel volume.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dims {
    pub m: usize,
    pub n: usize,
    pub l: usize,
}

impl Dims {
    pub fn new(m: usize, n: usize, l: usize) -> Self {
        Self { m, n, l }
    }

    pub fn cube(n: usize) -> Self {
        Self { m: n, n, l: n }
    }

    pub fn len(&self) -> usize {
        self.m * self.n * self.l
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.m, self.n, self.l]
    }

    /// Linear index of voxel `(i, j, k)`. The first axis varies fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.m * (j + self.n * k)
    }

    /// Inverse of [`Dims::index`].
    #[inline]
    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % self.m;
        let rest = idx / self.m;
        (i, rest % self.n, rest / self.n)
    }
}

/// A 3D voxel array flattened with the first axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    dims: Dims,
    data: Vec<f64>,
}

impl Volume {
    pub fn zeros(dims: Dims) -> Self {
        Self {
            dims,
            data: vec![0.0; dims.len()],
        }
    }

    pub fn filled(dims: Dims, value: f64) -> Self {
        Self {
            dims,
            data: vec![value; dims.len()],
        }
    }

    pub fn from_vec(dims: Dims, data: Vec<f64>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "volume dimensions must be positive, got {dims:?}"
            )));
        }
        crate::error::check_len("Volume::from_vec", dims.len(), data.len())?;
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.dims.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.dims.index(i, j, k);
        self.data[idx] = v;
    }

    /// Writes the text format: a header line `m n l` followed by one value per line.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.dims.m, self.dims.n, self.dims.l)?;
        for v in &self.data {
            writeln!(w, "{v:.16e}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut tokens = Vec::new();
        for line in r.lines() {
            let line = line?;
            tokens.extend(line.split_whitespace().map(str::to_owned));
        }
        if tokens.len() < 3 {
            return Err(Error::Parse("volume header must hold three dims".into()));
        }
        let dim = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::Parse(format!("bad dimension {s:?}: {e}")))
        };
        let dims = Dims::new(dim(&tokens[0])?, dim(&tokens[1])?, dim(&tokens[2])?);
        let data = tokens[3..]
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad value {s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_vec(dims, data)
    }

    /// Binary format: three little-endian `u64` dims (24 bytes) then `f64` values, little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        for d in self.dims.as_array() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 24];
        r.read_exact(&mut header)?;
        let dim = |k: usize| {
            let mut b = [0u8; 8];
            b.copy_from_slice(&header[8 * k..8 * k + 8]);
            u64::from_le_bytes(b) as usize
        };
        let dims = Dims::new(dim(0), dim(1), dim(2));
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != 8 * dims.len() {
            return Err(Error::Parse(format!(
                "binary volume payload has {} bytes, expected {}",
                bytes.len(),
                8 * dims.len()
            )));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Self::from_vec(dims, data)
    }
}
