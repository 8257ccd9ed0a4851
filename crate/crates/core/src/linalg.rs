//! Dense least-squares machinery.
//!
//! All solves go through a truncated SVD, so rank-deficient designs return the
//! minimum-norm minimizer instead of failing.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let k = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(n * k);
        for r in rows {
            if r.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        DenseMatrix::new(n, k, data)
    }

    /// Builds a matrix from column vectors of equal length.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let k = columns.len();
        let n = columns.first().map_or(0, |c| c.len());
        let mut data = vec![0.0; n * k];
        for (c, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: col.len(),
                });
            }
            for (i, v) in col.iter().enumerate() {
                data[i * k + c] = *v;
            }
        }
        DenseMatrix::new(n, k, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// New matrix made of the given rows (repeats allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &i in rows {
            if i >= self.rows {
                return Err(Error::DimensionMismatch {
                    expected: self.rows,
                    got: i + 1,
                });
            }
            data.extend_from_slice(self.row(i));
        }
        DenseMatrix::new(rows.len(), self.cols, data)
    }

    /// New matrix made of the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.cols) {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: bad + 1,
            });
        }
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for i in 0..self.rows {
            let r = self.row(i);
            data.extend(cols.iter().map(|&c| r[c]));
        }
        DenseMatrix::new(self.rows, cols.len(), data)
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

/// Leaf weights, one per region, in the units of the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Singular-value cutoff `eps * max(n, k) * sigma_max`.
pub fn default_rank_tolerance(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    f64::EPSILON * rows.max(cols) as f64 * sigma_max
}

/// Minimum-norm least-squares solution of `P gamma ~= y`.
pub fn solve_least_squares(p: &DenseMatrix, y: &[f64]) -> Result<WeightVector> {
    if y.len() != p.rows() {
        return Err(Error::DimensionMismatch {
            expected: p.rows(),
            got: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("target vector"));
    }
    let svd = p.to_nalgebra().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let tol = default_rank_tolerance(p.rows(), p.cols(), smax);
    let b = DVector::from_column_slice(y);
    let sol = svd
        .solve(&b, tol)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(WeightVector(sol.iter().copied().collect()))
}

/// Number of singular values above `tol` (or the default cutoff when `None`).
pub fn numerical_rank(p: &DenseMatrix, tol: Option<f64>) -> Result<usize> {
    if let Some(t) = tol {
        if t.is_nan() || t < 0.0 {
            return Err(Error::InvalidArgument(format!("negative tolerance {t}")));
        }
    }
    let sv = p.to_nalgebra().singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let tol = tol.unwrap_or_else(|| default_rank_tolerance(p.rows(), p.cols(), smax));
    Ok(sv.iter().filter(|&&s| s > tol).count())
}

/// Sum of squared residuals `sum_i (y_i - sum_k gamma_k P_ik)^2`.
pub fn sse(p: &DenseMatrix, gamma: &WeightVector, y: &[f64]) -> Result<f64> {
    if gamma.len() != p.cols() {
        return Err(Error::DimensionMismatch {
            expected: p.cols(),
            got: gamma.len(),
        });
    }
    if y.len() != p.rows() {
        return Err(Error::DimensionMismatch {
            expected: p.rows(),
            got: y.len(),
        });
    }
    Ok((0..p.rows())
        .map(|i| {
            let fit: f64 = p.row(i).iter().zip(&gamma.0).map(|(a, g)| a * g).sum();
            let r = y[i] - fit;
            r * r
        })
        .sum())
}

/// Orthonormal basis (as column vectors) of the column space of `p`,
/// truncated at the default rank tolerance, and the largest singular value.
pub(crate) fn column_space_basis(p: &DenseMatrix) -> (Vec<Vec<f64>>, f64) {
    let svd = p.to_nalgebra().svd(true, false);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let tol = default_rank_tolerance(p.rows(), p.cols(), smax);
    let u = svd.u.expect("left singular vectors requested");
    let basis = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > tol)
        .map(|(c, _)| u.column(c).iter().copied().collect())
        .collect();
    (basis, smax)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Removes from `v` its component in the span of the orthonormal `basis`.
/// Two classical Gram-Schmidt passes.
pub(crate) fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, v);
            if c != 0.0 {
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= c * bi;
                }
            }
        }
    }
}
