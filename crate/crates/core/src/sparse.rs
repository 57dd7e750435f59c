//! Row-compressed sparse matrix used for the assembled operators.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsrMatrix {
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(ncols: usize) -> Self {
        CsrMatrix {
            ncols,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Appends a row; explicit zeros are dropped.
    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        for (c, v) in entries {
            assert!(c < self.ncols, "column {c} out of range {}", self.ncols);
            if v != 0.0 {
                self.indices.push(c);
                self.values.push(v);
            }
        }
        self.indptr.push(self.indices.len());
    }

    /// Appends a dense local row placed at column `offset`.
    pub fn push_block_row(&mut self, offset: usize, local: &[f64]) {
        self.push_row(local.iter().enumerate().map(|(i, &v)| (offset + i, v)));
    }

    pub fn from_dense(rows: &[Vec<f64>], ncols: usize) -> Self {
        let mut m = CsrMatrix::new(ncols);
        for r in rows {
            m.push_block_row(0, r);
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (idx, val) = self.row(i);
        idx.iter().zip(val).map(|(&c, &v)| v * x[c]).sum()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows()).map(|i| self.row_dot(i, x)).collect()
    }

    pub fn transpose_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows());
        let mut out = vec![0.0; self.ncols];
        for (i, &yi) in y.iter().enumerate() {
            let (idx, val) = self.row(i);
            for (&c, &v) in idx.iter().zip(val) {
                out[c] += v * yi;
            }
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.nrows())
            .map(|i| {
                let mut r = vec![0.0; self.ncols];
                let (idx, val) = self.row(i);
                for (&c, &v) in idx.iter().zip(val) {
                    r[c] += v;
                }
                r
            })
            .collect()
    }

    /// Rows stacked under `self`.
    pub fn vstack(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.ncols, other.ncols);
        let mut m = self.clone();
        for i in 0..other.nrows() {
            let (idx, val) = other.row(i);
            m.push_row(idx.iter().copied().zip(val.iter().copied()));
        }
        m
    }

    /// Matrix Market coordinate dump (1-based).
    pub fn to_matrix_market(&self) -> String {
        let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.nrows(), self.ncols, self.nnz());
        for i in 0..self.nrows() {
            let (idx, val) = self.row(i);
            for (&c, &v) in idx.iter().zip(val) {
                let _ = writeln!(s, "{} {} {:.17e}", i + 1, c + 1, v);
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products() {
        let m = CsrMatrix::from_dense(&[vec![1.0, 0.0, 2.0], vec![0.0, 3.0, 0.0]], 3);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 1.0]), vec![3.0, 3.0]);
        assert_eq!(m.transpose_mul_vec(&[1.0, 2.0]), vec![1.0, 6.0, 2.0]);
        let mm = m.to_matrix_market();
        assert!(mm.lines().nth(1).unwrap() == "2 3 3");
    }
}
