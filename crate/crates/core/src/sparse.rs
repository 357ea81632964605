//! Compressed sparse row storage for the banded wavelet operators.
//!
//! Only exact nonzeros are stored: assembly drops entries that sum to `0.0`,
//! so `nnz` reports the structural count used by the sparsity studies.

use std::io::Write;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{check_shape, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// and entries that end up exactly zero are dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for (i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            rows[i].push((j, v));
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            let mut k = 0;
            while k < row.len() {
                let col = row[k].0;
                let mut sum = 0.0;
                while k < row.len() && row[k].0 == col {
                    sum += row[k].1;
                    k += 1;
                }
                if sum != 0.0 {
                    indices.push(col);
                    data.push(sum);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)))
    }

    pub fn from_dense(m: ArrayView2<f64>) -> Self {
        let (r, c) = m.dim();
        Self::from_triplets(
            r,
            c,
            m.indexed_iter()
                .filter(|(_, &v)| v != 0.0)
                .map(|((i, j), &v)| (i, j, v)),
        )
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[i]..self.indptr[i + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.data[range].iter().copied())
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.indptr[i + 1] - self.indptr[i]
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.indptr[i]..self.indptr[i + 1];
        match self.indices[range.clone()].binary_search(&j) {
            Ok(k) => self.data[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// Number of stored diagonal entries.
    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows())
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn diagonal_nnz(&self) -> usize {
        (0..self.nrows.min(self.ncols))
            .filter(|&i| self.get(i, i) != 0.0)
            .count()
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.triplets()
            .map(|(i, j, _)| i.abs_diff(j))
            .max()
            .unwrap_or(0)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.nrows, self.ncols));
        for (i, j, v) in self.triplets() {
            out[[i, j]] = v;
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.triplets().map(|(i, j, v)| (j, i, v)),
        )
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_triplets(
            self.nrows,
            self.ncols,
            self.triplets().map(|(i, j, v)| (i, j, factor * v)),
        )
    }

    /// `alpha * self + beta * other`.
    pub fn linear_combination(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        check_shape("sparse sum", self.shape(), other.shape())?;
        Ok(Self::from_triplets(
            self.nrows,
            self.ncols,
            self.triplets()
                .map(|(i, j, v)| (i, j, alpha * v))
                .chain(other.triplets().map(|(i, j, v)| (i, j, beta * v))),
        ))
    }

    /// Sparse-sparse product.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(Error::ShapeMismatch {
                context: "sparse product",
                expected: (self.ncols, other.ncols),
                got: other.shape(),
            });
        }
        let mut triplets = Vec::new();
        for i in 0..self.nrows {
            for (k, a) in self.row(i) {
                triplets.extend(other.row(k).map(|(j, b)| (i, j, a * b)));
            }
        }
        Ok(Self::from_triplets(self.nrows, other.ncols, triplets))
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (p, q) = other.shape();
        let mut triplets = Vec::with_capacity(self.nnz() * other.nnz());
        for (i, j, a) in self.triplets() {
            triplets.extend(other.triplets().map(|(k, l, b)| (i * p + k, j * q + l, a * b)));
        }
        Self::from_triplets(self.nrows * p, self.ncols * q, triplets)
    }

    /// Rows `rows` and columns `cols` of the matrix, re-indexed from zero.
    pub fn submatrix(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Self {
        let (r0, c0) = (rows.start, cols.start);
        let triplets: Vec<_> = rows
            .clone()
            .flat_map(|i| {
                let cols = cols.clone();
                self.row(i)
                    .filter(move |(j, _)| cols.contains(j))
                    .map(move |(j, v)| (i - r0, j - c0, v))
            })
            .collect();
        Self::from_triplets(rows.len(), cols.len(), triplets)
    }

    pub fn mul_vec(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.ncols {
            return Err(Error::ShapeMismatch {
                context: "sparse matvec",
                expected: (self.ncols, 1),
                got: (x.len(), 1),
            });
        }
        let mut y = Array1::zeros(self.nrows);
        self.mul_vec_into(x, &mut y);
        Ok(y)
    }

    pub(crate) fn mul_vec_into(&self, x: ArrayView1<f64>, y: &mut Array1<f64>) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `out += self · x` for a dense `x` with `ncols` rows.
    pub(crate) fn left_mul_acc(&self, x: ArrayView2<f64>, out: &mut Array2<f64>) {
        for (i, mut out_row) in out.axis_iter_mut(Axis(0)).enumerate() {
            for (k, a) in self.row(i) {
                out_row.scaled_add(a, &x.row(k));
            }
        }
    }

    /// `out += x · self` for a dense `x` with `nrows` columns.
    pub(crate) fn right_mul_acc(&self, x: ArrayView2<f64>, out: &mut Array2<f64>) {
        for (x_row, mut out_row) in x.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
            let x_row = x_row.as_slice().expect("row-major dense operand");
            let out_row = out_row.as_slice_mut().expect("row-major dense output");
            for (k, &xk) in x_row.iter().enumerate() {
                if xk == 0.0 {
                    continue;
                }
                for (j, b) in self.row(k) {
                    out_row[j] += xk * b;
                }
            }
        }
    }

    /// Dense product `self · x`.
    pub fn mul_dense(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.nrows() != self.ncols {
            return Err(Error::ShapeMismatch {
                context: "sparse-dense product",
                expected: (self.ncols, x.ncols()),
                got: x.dim(),
            });
        }
        let mut out = Array2::zeros((self.nrows, x.ncols()));
        self.left_mul_acc(x, &mut out);
        Ok(out)
    }

    /// Dense product `x · self`.
    pub fn dense_mul(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.nrows {
            return Err(Error::ShapeMismatch {
                context: "dense-sparse product",
                expected: (x.nrows(), self.nrows),
                got: x.dim(),
            });
        }
        let x = x.as_standard_layout();
        let mut out = Array2::zeros((x.nrows(), self.ncols));
        self.right_mul_acc(x.view(), &mut out);
        Ok(out)
    }

    /// Writes the matrix in Matrix Market coordinate format (1-based indices).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
        }
        Ok(())
    }
}
