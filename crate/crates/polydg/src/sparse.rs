//! Compressed sparse storage for the assembled symmetric operators and the
//! rectangular fine/coarse coupling blocks.

use crate::{Error, Result};
use nalgebra::DMatrix;
use std::io::Write;
use std::path::Path;

/// Structurally symmetric matrix in CSR form with a cell-block dof map.
#[derive(Debug, Clone)]
pub struct SparseSymMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
    /// Dof offset of each cell block; last entry equals `n`.
    pub block_offsets: Vec<usize>,
}

impl SparseSymMatrix {
    /// Accumulate (i, j, v) triplets into CSR, summing duplicates.
    pub fn from_triplets(
        n: usize,
        mut triplets: Vec<(usize, usize, f64)>,
        block_offsets: Vec<usize>,
    ) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_counts = vec![0usize; n];
        let mut col_idx = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        let mut prev: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if prev == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                vals.push(v);
                row_counts[i] += 1;
                prev = Some((i, j));
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for i in 0..n {
            row_ptr[i + 1] = row_ptr[i] + row_counts[i];
        }
        SparseSymMatrix {
            n,
            row_ptr,
            col_idx,
            vals,
            block_offsets,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[idx] * x[self.col_idx[idx]];
            }
            y[i] = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.apply(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// max |A - A^T| over all entries.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[idx];
                let vt = self.get(j, i);
                worst = worst.max((self.vals[idx] - vt).abs());
            }
        }
        worst
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.col_idx[lo..hi].binary_search(&j) {
            Ok(k) => self.vals[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col_idx[idx])] = self.vals[idx];
            }
        }
        m
    }

    /// Dense principal submatrix on the given dof set.
    pub fn principal_submatrix(&self, dofs: &[usize]) -> DMatrix<f64> {
        let pos: std::collections::HashMap<usize, usize> =
            dofs.iter().enumerate().map(|(a, &d)| (d, a)).collect();
        let mut m = DMatrix::zeros(dofs.len(), dofs.len());
        for (a, &i) in dofs.iter().enumerate() {
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                if let Some(&b) = pos.get(&self.col_idx[idx]) {
                    m[(a, b)] = self.vals[idx];
                }
            }
        }
        m
    }

    /// MatrixMarket coordinate output (symmetric, lower triangle, 1-based).
    pub fn write_matrix_market(&self, path: &Path) -> Result<()> {
        let mut nnz_lower = 0usize;
        for i in 0..self.n {
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[idx] <= i {
                    nnz_lower += 1;
                }
            }
        }
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
        writeln!(w, "{} {} {}", self.n, self.n, nnz_lower)?;
        for i in 0..self.n {
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[idx];
                if j <= i {
                    writeln!(w, "{} {} {:.16e}", i + 1, j + 1, self.vals[idx])?;
                }
            }
        }
        Ok(())
    }
}

/// Rectangular matrix stored by sparse columns (used for the mixed fine/coarse
/// mass matrix and the prolongation).
#[derive(Debug, Clone)]
pub struct RectSparse {
    pub nrows: usize,
    pub ncols: usize,
    /// Per column: (row, value) pairs sorted by row.
    pub cols: Vec<Vec<(usize, f64)>>,
}

impl RectSparse {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        RectSparse {
            nrows,
            ncols,
            cols: vec![Vec::new(); ncols],
        }
    }

    /// y = Q c (column combination).
    pub fn apply(&self, c: &[f64]) -> Vec<f64> {
        debug_assert_eq!(c.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for (j, col) in self.cols.iter().enumerate() {
            let cj = c[j];
            if cj != 0.0 {
                for &(i, v) in col {
                    y[i] += v * cj;
                }
            }
        }
        y
    }

    /// z = Q^T r.
    pub fn apply_transpose(&self, r: &[f64]) -> Vec<f64> {
        debug_assert_eq!(r.len(), self.nrows);
        let mut z = vec![0.0; self.ncols];
        for (j, col) in self.cols.iter().enumerate() {
            let mut acc = 0.0;
            for &(i, v) in col {
                acc += v * r[i];
            }
            z[j] = acc;
        }
        z
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, v) in col {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Identity check error: rank-deficient columns.
    pub fn check_no_empty_columns(&self) -> Result<()> {
        for (j, col) in self.cols.iter().enumerate() {
            if col.iter().all(|&(_, v)| v == 0.0) {
                return Err(Error::Schwarz(format!(
                    "prolongation column {j} is zero (broken overlap data)"
                )));
            }
        }
        Ok(())
    }
}
