use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::Matrix;
use crate::{Error, Result};

/// Compressed sparse row matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            indptr: vec![0; n_rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut counts = vec![0usize; n_rows + 1];
        for &(i, j, v) in triplets {
            if i >= n_rows || j >= n_cols {
                return Err(Error::DimensionMismatch(format!(
                    "entry ({i}, {j}) outside {n_rows}x{n_cols}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("sparse matrix entry"));
            }
            counts[i + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            cols[next[i]] = j;
            vals[next[i]] = v;
            next[i] += 1;
        }

        let mut indptr = Vec::with_capacity(n_rows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        indptr.push(0);
        let mut row_buf: Vec<(usize, f64)> = Vec::new();
        for i in 0..n_rows {
            row_buf.clear();
            row_buf.extend((counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])));
            row_buf.sort_by_key(|&(j, _)| j);
            for &(j, v) in &row_buf {
                if indices.len() > indptr[i] && *indices.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn from_dense(m: &Matrix) -> Self {
        let mut triplets = Vec::new();
        for i in 0..m.rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.rows(), m.cols(), &triplets).expect("dense matrix is in range")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[range.clone()], &self.values[range])
    }

    pub fn row_mut_values(&mut self, i: usize) -> &mut [f64] {
        let range = self.indptr[i]..self.indptr[i + 1];
        &mut self.values[range]
    }

    /// All stored entries as `(row, col, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // Rows are visited in increasing order, so each output row ends up sorted.
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                indices[next[j]] = i;
                values[next[j]] = v;
                next[j] += 1;
            }
        }
        Self {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            indptr: counts,
            indices,
            values,
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.iter() {
            m[(i, j)] += v;
        }
        m
    }

    /// `self · x` for a dense right-hand side.
    pub fn spmm(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(self.n_rows, x.cols());
        self.spmm_acc(1.0, x, &mut out)?;
        Ok(out)
    }

    /// `out += alpha · self · x`.
    pub fn spmm_acc(&self, alpha: f64, x: &Matrix, out: &mut Matrix) -> Result<()> {
        if x.rows() != self.n_cols || out.rows() != self.n_rows || out.cols() != x.cols() {
            return Err(Error::DimensionMismatch(format!(
                "spmm {}x{} by {}x{} into {}x{}",
                self.n_rows,
                self.n_cols,
                x.rows(),
                x.cols(),
                out.rows(),
                out.cols()
            )));
        }
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            let out_row = out.row_mut(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let a = alpha * v;
                for (o, &b) in out_row.iter_mut().zip(x.row(j)) {
                    *o += a * b;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed_and_columns_sorted() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (0, 0, 2.0), (0, 2, 0.5)]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.row(0), (&[0usize, 2][..], &[2.0, 1.5][..]));
    }

    #[test]
    fn out_of_range_triplet_is_rejected() {
        assert!(CsrMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn spmm_matches_dense() {
        let m = CsrMatrix::from_triplets(3, 3, &[(0, 1, 2.0), (2, 0, -1.0), (2, 2, 0.5)]).unwrap();
        let x = Matrix::from_fn(3, 2, |i, j| (i + 2 * j) as f64);
        assert_eq!(m.spmm(&x).unwrap(), m.to_dense().matmul(&x).unwrap());
        assert_eq!(m.transpose().to_dense(), m.to_dense().transpose());
    }
}
