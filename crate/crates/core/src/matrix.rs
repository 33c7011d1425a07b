//! Dense real matrices and the handful of kernels the solvers and bounds need.
//!
//! Storage is row-major. Vectors are plain `Vec<f64>` / `&[f64]`; the helpers
//! at the bottom of this module cover the few BLAS-1 operations used
//! throughout the crate.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Row,
    Col,
}

impl Axis {
    pub(crate) fn name(self) -> &'static str {
        match self {
            Axis::Row => "row",
            Axis::Col => "column",
        }
    }
}

/// A finite, non-empty, row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!(
                "matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(m * n);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {n}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(m, n, data)
    }

    /// Builds a matrix from column-major values (Matrix Market array order).
    pub fn from_col_major(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        let mut data = vec![0.0; rows * cols];
        for j in 0..cols {
            for i in 0..rows {
                data[i * cols + j] = values[j * rows + i];
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n, n)?;
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        Ok(m)
    }

    pub fn diag(values: &[f64]) -> Result<Self> {
        let n = values.len();
        let mut m = Self::zeros(n, n)?;
        for (i, &v) in values.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(0));
        }
        Ok(m)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Column-major copy of the entries.
    pub fn to_col_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.push(self.get(i, j));
            }
        }
        out
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.get(i, j);
            }
        }
        DenseMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Dimension(format!(
                "matvec: matrix has {} columns, vector has {} entries",
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `Aᵀ y`.
    pub fn matvec_t(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows {
            return Err(Error::Dimension(format!(
                "matvec_t: matrix has {} rows, vector has {} entries",
                self.rows,
                y.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            axpy(yi, self.row(i), &mut out);
        }
        Ok(out)
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "matmul: {}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut data = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            let out = &mut data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a != 0.0 {
                    axpy(a, other.row(k), out);
                }
            }
        }
        Ok(DenseMatrix {
            rows: self.rows,
            cols: other.cols,
            data,
        })
    }

    /// `AᵀA`, symmetric `cols x cols`.
    pub fn gram(&self) -> DenseMatrix {
        let n = self.cols;
        let mut data = vec![0.0; n * n];
        for i in 0..self.rows {
            let r = self.row(i);
            for (p, &rp) in r.iter().enumerate() {
                if rp == 0.0 {
                    continue;
                }
                axpy(rp, r, &mut data[p * n..(p + 1) * n]);
            }
        }
        DenseMatrix {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        norm_sq(&self.data)
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Rows permuted so that row `i` of the result is row `perm[i]` of `self`.
    pub fn permute_rows(&self, perm: &[usize]) -> Result<DenseMatrix> {
        if perm.len() != self.rows {
            return Err(Error::Dimension("permutation length".into()));
        }
        let mut data = Vec::with_capacity(self.data.len());
        for &p in perm {
            if p >= self.rows {
                return Err(Error::invalid(format!("row index {p} out of range")));
            }
            data.extend_from_slice(self.row(p));
        }
        Self::new(self.rows, self.cols, data)
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

/// Euclidean norms of every row or column.
pub fn axis_norms(a: &DenseMatrix, axis: Axis) -> Vec<f64> {
    match axis {
        Axis::Row => (0..a.rows()).map(|i| norm(a.row(i))).collect(),
        Axis::Col => {
            let mut sq = vec![0.0; a.cols()];
            for i in 0..a.rows() {
                for (s, v) in sq.iter_mut().zip(a.row(i)) {
                    *s += v * v;
                }
            }
            sq.into_iter().map(f64::sqrt).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    /// `min_{‖x‖=1} ‖Ax‖`; zero whenever `rows < cols`.
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub fro_norm_sq: f64,
    /// `sigma_max / sigma_min`, `+inf` when `sigma_min == 0`.
    pub condition_number: f64,
    pub full_column_rank: bool,
    /// All `min(rows, cols)` singular values, descending.
    pub singular_values: Vec<f64>,
}

impl SpectralSummary {
    /// Smallest of the `min(rows, cols)` singular values. For wide matrices
    /// this is the smallest singular value of the row space, which governs
    /// the residual recursion of Gauss-Seidel.
    pub fn sigma_min_nonzero_dims(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }
}

/// Singular values via a dense SVD.
///
/// `tol` is the relative threshold for the rank decision:
/// `full_column_rank` holds iff `rows >= cols` and `sigma_min > tol * sigma_max`.
pub fn spectral_summary(a: &DenseMatrix, tol: f64) -> Result<SpectralSummary> {
    if !(tol > 0.0) {
        return Err(Error::invalid("spectral_summary: tol must be positive"));
    }
    if a.is_zero() {
        return Err(Error::ZeroMatrix);
    }
    let (m, n) = a.shape();
    let mut sv: Vec<f64> = if m >= n {
        a.to_nalgebra().singular_values().iter().copied().collect()
    } else {
        a.transpose().to_nalgebra().singular_values().iter().copied().collect()
    };
    sv.sort_by(|x, y| y.total_cmp(x));
    let sigma_max = sv[0];
    let smallest = *sv.last().unwrap();
    let sigma_min = if m >= n { smallest } else { 0.0 };
    let condition_number = if sigma_min > 0.0 {
        sigma_max / sigma_min
    } else {
        f64::INFINITY
    };
    Ok(SpectralSummary {
        sigma_min,
        sigma_max,
        fro_norm_sq: a.frobenius_sq(),
        condition_number,
        full_column_rank: m >= n && sigma_min > tol * sigma_max,
        singular_values: sv,
    })
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(DenseMatrix::new(0, 2, vec![]).is_err());
        assert!(matches!(
            DenseMatrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite(1))
        ));
        assert!(DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn identity_summary() {
        let s = spectral_summary(&DenseMatrix::identity(2).unwrap(), 1e-12).unwrap();
        assert_relative_eq!(s.sigma_min, 1.0, epsilon = 1e-14);
        assert_relative_eq!(s.sigma_max, 1.0, epsilon = 1e-14);
        assert_relative_eq!(s.fro_norm_sq, 2.0);
        assert_relative_eq!(s.condition_number, 1.0, epsilon = 1e-14);
        assert!(s.full_column_rank);
    }

    #[test]
    fn two_row_family_summary() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let a = DenseMatrix::from_rows(&[[1.0, 0.0], [h, h]]).unwrap();
        let s = spectral_summary(&a, 1e-12).unwrap();
        // AᵀA = [[1.5, .5], [.5, .5]]: eigenvalues 1 ± 1/√2
        assert_relative_eq!(s.sigma_max.powi(2), 1.0 + h, epsilon = 1e-12);
        assert_relative_eq!(s.sigma_min.powi(2), 1.0 - h, epsilon = 1e-12);
        assert_relative_eq!(s.fro_norm_sq, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_matrix_rejected() {
        let z = DenseMatrix::zeros(3, 2).unwrap();
        assert!(matches!(spectral_summary(&z, 1e-12), Err(Error::ZeroMatrix)));
    }

    #[test]
    fn wide_matrix_has_zero_sigma_min() {
        let a = DenseMatrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]]).unwrap();
        let s = spectral_summary(&a, 1e-12).unwrap();
        assert_eq!(s.sigma_min, 0.0);
        assert!(s.condition_number.is_infinite());
        assert!(!s.full_column_rank);
        assert_relative_eq!(s.sigma_min_nonzero_dims(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn axis_norms_examples() {
        let i2 = DenseMatrix::identity(2).unwrap();
        assert_eq!(axis_norms(&i2, Axis::Row), vec![1.0, 1.0]);
        let a = DenseMatrix::from_rows(&[[3.0, 4.0], [0.0, 0.0]]).unwrap();
        assert_eq!(axis_norms(&a, Axis::Row), vec![5.0, 0.0]);
        assert_eq!(axis_norms(&a, Axis::Col), vec![3.0, 4.0]);
    }

    #[test]
    fn col_major_round_trip() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let cm = a.to_col_major();
        assert_eq!(cm, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(DenseMatrix::from_col_major(2, 3, &cm).unwrap(), a);
        assert_eq!(a.transpose().transpose(), a);
    }

    #[test]
    fn gram_matches_matmul() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, -1.0], [0.5, 0.0]]).unwrap();
        let g = a.gram();
        let g2 = a.transpose().matmul(&a).unwrap();
        assert!(g.max_abs_diff(&g2) < 1e-14);
    }
}
