//! Row-compressed real matrix used for node features.

use rand::Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triples. Duplicate coordinates are summed
    /// and explicit zeros are dropped.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted = triplets.to_vec();
        for &(r, c, _) in &sorted {
            if r >= rows {
                return Err(Error::IndexOutOfRange { what: "feature row", index: r, len: rows });
            }
            if c >= cols {
                return Err(Error::IndexOutOfRange { what: "feature column", index: c, len: cols });
            }
        }
        sorted.sort_by_key(|&(r, c, _)| (r, c));

        let mut offsets = vec![0; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            indices.push(c);
            values.push(v);
            offsets[r + 1] += 1;
        }
        for r in 0..rows {
            offsets[r + 1] += offsets[r];
        }
        let mut m = CsrMatrix { rows, cols, offsets, indices, values };
        m.drop_zeros();
        Ok(m)
    }

    pub fn from_dense(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape("from_dense", (rows, cols), (data.len(), 1)));
        }
        let mut offsets = Vec::with_capacity(rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        offsets.push(0);
        for r in 0..rows {
            for (c, &v) in data[r * cols..(r + 1) * cols].iter().enumerate() {
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            offsets.push(indices.len());
        }
        Ok(CsrMatrix { rows, cols, offsets, indices, values })
    }

    fn drop_zeros(&mut self) {
        if self.values.iter().all(|&v| v != 0.0) {
            return;
        }
        let mut offsets = Vec::with_capacity(self.rows + 1);
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        offsets.push(0);
        for r in 0..self.rows {
            for k in self.offsets[r]..self.offsets[r + 1] {
                if self.values[k] != 0.0 {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            offsets.push(indices.len());
        }
        self.offsets = offsets;
        self.indices = indices;
        self.values = values;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.offsets[r]..self.offsets[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        for (r, c, v) in self.triplets() {
            out[r * self.cols + c] = v;
        }
        out
    }

    /// Scales each row to unit L1 norm; all-zero rows are left unchanged.
    pub fn l1_normalize_rows(&self) -> CsrMatrix {
        let mut out = self.clone();
        for r in 0..self.rows {
            let span = self.offsets[r]..self.offsets[r + 1];
            let norm: f64 = self.values[span.clone()].iter().map(|v| v.abs()).sum();
            if norm > 0.0 {
                for v in &mut out.values[span] {
                    *v /= norm;
                }
            }
        }
        out
    }

    /// Inverted dropout on the stored entries. Zeros stay zero, so this has the
    /// same distribution as dense dropout.
    pub fn dropout<R: Rng + ?Sized>(&self, p_drop: f64, rng: &mut R) -> CsrMatrix {
        if p_drop == 0.0 {
            return self.clone();
        }
        let keep = 1.0 / (1.0 - p_drop);
        let mut out = self.clone();
        for v in &mut out.values {
            *v = if rng.random::<f64>() < p_drop { 0.0 } else { *v * keep };
        }
        out
    }
}
