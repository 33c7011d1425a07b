//! Problem instances: random and spectrum-planted matrices, consistent
//! linear systems with a known solution, and linear feasibility systems with
//! a distance oracle.

use crate::error::{Error, Result};
use crate::matrix::{axis_norms, dot, norm, norm_sq, spectral_summary, sub, Axis, DenseMatrix};
use crate::rng::SeededStream;

/// `m x n` matrix with i.i.d. `N(0, std²)` entries, filled row by row.
pub fn gaussian_matrix(m: usize, n: usize, std: f64, seed: u64) -> Result<DenseMatrix> {
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::invalid("gaussian_matrix: std must be positive"));
    }
    let mut s = SeededStream::new(seed);
    DenseMatrix::new(m, n, s.normal_vec(m * n, std))
}

/// `σ_i = 1 - (i-1)/m` for `i = 1..=min(m, n)`.
pub fn sigmas_linear(m: usize, n: usize) -> Vec<f64> {
    (0..m.min(n)).map(|i| 1.0 - i as f64 / m as f64).collect()
}

/// `σ_i = 1/i` for `i = 1..=len`.
pub fn sigmas_inverse(len: usize) -> Vec<f64> {
    (1..=len).map(|i| 1.0 / i as f64).collect()
}

/// Geometric profile from 1 down to `1/kappa` over `len` values.
pub fn sigmas_geometric(len: usize, kappa: f64) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|i| kappa.powf(-(i as f64) / (len - 1) as f64))
        .collect()
}

/// `A = U diag(σ) Vᵀ` where `U`, `V` are the singular vectors of a seeded
/// standard Gaussian `m x n` matrix.
pub fn spectrum_matrix(m: usize, n: usize, sigmas: &[f64], seed: u64) -> Result<DenseMatrix> {
    let r = m.min(n);
    if sigmas.len() != r {
        return Err(Error::Dimension(format!(
            "spectrum_matrix: {m}x{n} needs {r} singular values, got {}",
            sigmas.len()
        )));
    }
    if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::invalid("spectrum_matrix: singular values must be finite and nonnegative"));
    }
    if sigmas.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::invalid("spectrum_matrix: singular values must be nonincreasing"));
    }
    let g = gaussian_matrix(m, n, 1.0, seed)?;
    let svd = g.to_nalgebra().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested Vᵀ");
    let mut data = vec![0.0; m * n];
    for i in 0..m {
        for k in 0..r {
            let uik = u[(i, k)] * sigmas[k];
            if uik == 0.0 {
                continue;
            }
            for j in 0..n {
                data[i * n + j] += uik * vt[(k, j)];
            }
        }
    }
    DenseMatrix::new(m, n, data)
}

/// Scales every row (or column) to unit Euclidean norm.
pub fn normalize(a: &DenseMatrix, axis: Axis) -> Result<DenseMatrix> {
    let norms = axis_norms(a, axis);
    if let Some(index) = norms.iter().position(|&v| v == 0.0) {
        return Err(Error::ZeroLine {
            axis: axis.name(),
            index,
        });
    }
    let (m, n) = a.shape();
    let mut data = a.as_slice().to_vec();
    for i in 0..m {
        for j in 0..n {
            let s = match axis {
                Axis::Row => norms[i],
                Axis::Col => norms[j],
            };
            data[i * n + j] /= s;
        }
    }
    DenseMatrix::new(m, n, data)
}

/// `A x = b`, optionally with a known solution.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub a: DenseMatrix,
    pub b: Vec<f64>,
    pub x_star: Option<Vec<f64>>,
    pub consistent: bool,
}

impl LinearSystem {
    /// Validates dimensions and, when `x_star` is given, the residual
    /// invariant `‖A x* - b‖ <= 1e-10 (‖A‖_F ‖x*‖ + ‖b‖)`.
    pub fn new(a: DenseMatrix, b: Vec<f64>, x_star: Option<Vec<f64>>) -> Result<Self> {
        if b.len() != a.rows() {
            return Err(Error::Dimension(format!(
                "b has {} entries, A has {} rows",
                b.len(),
                a.rows()
            )));
        }
        if let Some(i) = b.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if let Some(x) = &x_star {
            if x.len() != a.cols() {
                return Err(Error::Dimension(format!(
                    "x* has {} entries, A has {} columns",
                    x.len(),
                    a.cols()
                )));
            }
            let res = norm(&sub(&a.matvec(x)?, &b));
            let scale = a.frobenius_sq().sqrt() * norm(x) + norm(&b);
            if res > 1e-10 * scale {
                return Err(Error::invalid(format!(
                    "x* does not solve the system (residual {res:e})"
                )));
            }
        }
        let consistent = x_star.is_some();
        Ok(LinearSystem {
            a,
            b,
            x_star,
            consistent,
        })
    }

    /// `b = A x*` for the given solution.
    pub fn from_solution(a: DenseMatrix, x_star: Vec<f64>) -> Result<Self> {
        let b = a.matvec(&x_star)?;
        Self::new(a, b, Some(x_star))
    }

    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(sub(&self.a.matvec(x)?, &self.b))
    }
}

/// Consistent system with a seeded standard Gaussian `x*` and `b = A x*`.
/// Requires full column rank so that `x*` is the unique solution.
pub fn plant_system(a: &DenseMatrix, seed: u64) -> Result<LinearSystem> {
    let summary = spectral_summary(a, 1e-12)?;
    if !summary.full_column_rank {
        return Err(Error::RankDeficient {
            sigma_min: summary.sigma_min,
            sigma_max: summary.sigma_max,
        });
    }
    let mut s = SeededStream::new(seed);
    let x_star = s.normal_vec(a.cols(), 1.0);
    LinearSystem::from_solution(a.clone(), x_star)
}

/// How `d(x, S)` is evaluated for an [`InequalitySystem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceOracle {
    /// Single unit-norm inequality: `d = (aᵀx - β)⁺`, exact.
    Halfspace,
    /// Equalities with orthonormal rows: `d = ‖Ax - b‖`, exact.
    OrthonormalEqualities,
    /// Dykstra's alternating projections run to 1e-12. Approximate.
    AlternatingProjection,
}

impl DistanceOracle {
    pub fn is_exact(self) -> bool {
        !matches!(self, DistanceOracle::AlternatingProjection)
    }
}

/// `a_iᵀx <= b_i` for `i ∈ I_≤`, `a_iᵀx = b_i` for `i ∈ I_=`.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalitySystem {
    pub a: DenseMatrix,
    pub b: Vec<f64>,
    leq_rows: Vec<usize>,
    eq_rows: Vec<usize>,
    is_leq: Vec<bool>,
    hoffman_l: Option<f64>,
    oracle: DistanceOracle,
}

const DYKSTRA_TOL: f64 = 1e-12;
const DYKSTRA_MAX_CYCLES: usize = 200_000;

impl InequalitySystem {
    /// General mixed system; distances come from the approximate
    /// alternating-projection oracle and no Hoffman constant is attached.
    /// The feasible set is assumed nonempty.
    pub fn new(a: DenseMatrix, b: Vec<f64>, leq_rows: Vec<usize>, eq_rows: Vec<usize>) -> Result<Self> {
        Self::build(a, b, leq_rows, eq_rows, None, DistanceOracle::AlternatingProjection)
    }

    fn build(
        a: DenseMatrix,
        b: Vec<f64>,
        mut leq_rows: Vec<usize>,
        mut eq_rows: Vec<usize>,
        hoffman_l: Option<f64>,
        oracle: DistanceOracle,
    ) -> Result<Self> {
        let m = a.rows();
        if b.len() != m {
            return Err(Error::Dimension(format!("b has {} entries, A has {m} rows", b.len())));
        }
        let mut seen = vec![0u8; m];
        for &i in leq_rows.iter().chain(&eq_rows) {
            if i >= m {
                return Err(Error::invalid(format!("row index {i} out of range for {m} rows")));
            }
            seen[i] += 1;
        }
        if let Some(i) = seen.iter().position(|&c| c != 1) {
            return Err(Error::invalid(format!(
                "I_≤ and I_= must partition the rows; row {i} appears {} times",
                seen[i]
            )));
        }
        if let Some(index) = axis_norms(&a, Axis::Row).iter().position(|&v| v == 0.0) {
            return Err(Error::ZeroLine { axis: "row", index });
        }
        leq_rows.sort_unstable();
        eq_rows.sort_unstable();
        let mut is_leq = vec![false; m];
        for &i in &leq_rows {
            is_leq[i] = true;
        }
        Ok(InequalitySystem {
            a,
            b,
            leq_rows,
            eq_rows,
            is_leq,
            hoffman_l,
            oracle,
        })
    }

    pub fn leq_rows(&self) -> &[usize] {
        &self.leq_rows
    }

    pub fn eq_rows(&self) -> &[usize] {
        &self.eq_rows
    }

    pub fn is_leq(&self, i: usize) -> bool {
        self.is_leq[i]
    }

    pub fn hoffman_l(&self) -> Option<f64> {
        self.hoffman_l
    }

    pub fn oracle(&self) -> DistanceOracle {
        self.oracle
    }

    /// Euclidean distance from `x` to the feasible set.
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self.oracle {
            DistanceOracle::Halfspace => (dot(self.a.row(0), x) - self.b[0]).max(0.0),
            DistanceOracle::OrthonormalEqualities => (0..self.a.rows())
                .map(|i| (dot(self.a.row(i), x) - self.b[i]).powi(2))
                .sum::<f64>()
                .sqrt(),
            DistanceOracle::AlternatingProjection => norm(&sub(x, &self.project(x))),
        }
    }

    /// Nearest feasible point, by Dykstra's method over the individual
    /// constraints. Returns the last iterate if the 1e-12 tolerance is not
    /// reached.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let m = self.a.rows();
        let n = self.a.cols();
        let row_norm_sq: Vec<f64> = (0..m).map(|i| norm_sq(self.a.row(i))).collect();
        let mut cur = x.to_vec();
        let mut incr = vec![vec![0.0; n]; m];
        let mut y = vec![0.0; n];
        for _ in 0..DYKSTRA_MAX_CYCLES {
            let before = cur.clone();
            for i in 0..m {
                for k in 0..n {
                    y[k] = cur[k] + incr[i][k];
                }
                let ai = self.a.row(i);
                let viol = dot(ai, &y) - self.b[i];
                let step = if self.is_leq[i] { viol.max(0.0) } else { viol } / row_norm_sq[i];
                for k in 0..n {
                    cur[k] = y[k] - step * ai[k];
                    incr[i][k] = y[k] - cur[k];
                }
            }
            let change = norm(&sub(&cur, &before));
            if change <= DYKSTRA_TOL * (1.0 + norm(&cur)) {
                break;
            }
        }
        cur
    }
}

/// `{x : aᵀx <= beta}` for a unit vector `a`; Hoffman constant 1.
pub fn make_halfspace_system(a: &[f64], beta: f64) -> Result<InequalitySystem> {
    if (norm(a) - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("halfspace normal must have unit norm"));
    }
    let mat = DenseMatrix::new(1, a.len(), a.to_vec())?;
    InequalitySystem::build(mat, vec![beta], vec![0], vec![], Some(1.0), DistanceOracle::Halfspace)
}

/// `{x : Ax = b}` for `A` with orthonormal rows; Hoffman constant
/// `1/σ_min(A) = 1`.
pub fn make_orthonormal_equality_system(a: DenseMatrix, b: Vec<f64>) -> Result<InequalitySystem> {
    let m = a.rows();
    for i in 0..m {
        for j in 0..m {
            let target = if i == j { 1.0 } else { 0.0 };
            if (dot(a.row(i), a.row(j)) - target).abs() > 1e-10 {
                return Err(Error::invalid(format!("rows {i} and {j} are not orthonormal")));
            }
        }
    }
    InequalitySystem::build(
        a,
        b,
        vec![],
        (0..m).collect(),
        Some(1.0),
        DistanceOracle::OrthonormalEqualities,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn gaussian_is_deterministic() {
        let a = gaussian_matrix(7, 3, 2.0, 11).unwrap();
        let b = gaussian_matrix(7, 3, 2.0, 11).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        assert_ne!(a, gaussian_matrix(7, 3, 2.0, 12).unwrap());
    }

    #[test]
    fn gaussian_mean_within_clt_tolerance() {
        let a = gaussian_matrix(1000, 20, 1.0, 5).unwrap();
        let mean = a.as_slice().iter().sum::<f64>() / 20_000.0;
        assert!(mean.abs() < 4.0 / (20_000f64).sqrt());
    }

    #[test]
    fn spectrum_recovered() {
        let sig = sigmas_inverse(6);
        let a = spectrum_matrix(30, 6, &sig, 4).unwrap();
        let s = spectral_summary(&a, 1e-12).unwrap();
        for (got, want) in s.singular_values.iter().zip(&sig) {
            assert_relative_eq!(got, want, max_relative = 1e-10);
        }
    }

    #[test]
    fn unit_spectrum_square_is_orthogonal() {
        let a = spectrum_matrix(5, 5, &[1.0; 5], 8).unwrap();
        let g = a.gram();
        assert!(g.max_abs_diff(&DenseMatrix::identity(5).unwrap()) < 1e-9);
    }

    #[test]
    fn spectrum_rejects_bad_sigmas() {
        assert!(spectrum_matrix(4, 3, &[1.0, 0.5], 0).is_err());
        assert!(spectrum_matrix(4, 3, &[0.5, 1.0, 0.1], 0).is_err());
        assert!(spectrum_matrix(4, 3, &[1.0, 0.5, -0.1], 0).is_err());
    }

    #[test]
    fn normalize_examples() {
        let a = DenseMatrix::from_rows(&[[3.0, 4.0], [0.0, 1.0]]).unwrap();
        let r = normalize(&a, Axis::Row).unwrap();
        assert_eq!(r.to_rows(), vec![vec![0.6, 0.8], vec![0.0, 1.0]]);
        let g = gaussian_matrix(9, 4, 3.0, 1).unwrap();
        let rn = normalize(&g, Axis::Row).unwrap();
        for v in axis_norms(&rn, Axis::Row) {
            assert!((v - 1.0).abs() < 1e-14);
        }
        assert!((rn.frobenius_sq() - 9.0).abs() < 1e-12);
        let cn = normalize(&g, Axis::Col).unwrap();
        for v in axis_norms(&cn, Axis::Col) {
            assert!((v - 1.0).abs() < 1e-14);
        }
        let z = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        assert!(matches!(
            normalize(&z, Axis::Row),
            Err(Error::ZeroLine { axis: "row", index: 1 })
        ));
    }

    #[test]
    fn planted_systems() {
        let sys = LinearSystem::from_solution(DenseMatrix::identity(2).unwrap(), vec![1.0, 2.0]).unwrap();
        assert_eq!(sys.b, vec![1.0, 2.0]);
        let a = gaussian_matrix(10, 4, 1.0, 2).unwrap();
        let s1 = plant_system(&a, 77).unwrap();
        let s2 = plant_system(&a, 77).unwrap();
        assert_eq!(s1.x_star, s2.x_star);
        assert!(s1.consistent);
        let res = s1.residual(s1.x_star.as_ref().unwrap()).unwrap();
        assert_eq!(norm(&res), 0.0);
        let wide = gaussian_matrix(2, 4, 1.0, 2).unwrap();
        assert!(matches!(plant_system(&wide, 1), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn halfspace_distances() {
        let sys = make_halfspace_system(&[1.0, 0.0], 1.0).unwrap();
        assert_eq!(sys.distance(&[2.0, 0.0]), 1.0);
        assert_eq!(sys.distance(&[0.5, 7.0]), 0.0);
        let diag = make_halfspace_system(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2], 0.0).unwrap();
        assert_relative_eq!(diag.distance(&[1.0, 1.0]), 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(diag.hoffman_l(), Some(1.0));
        assert!(make_halfspace_system(&[1.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn orthonormal_distances() {
        let sys = make_orthonormal_equality_system(DenseMatrix::identity(2).unwrap(), vec![1.0, 2.0]).unwrap();
        assert_relative_eq!(sys.distance(&[0.0, 0.0]), 5f64.sqrt());
        assert_eq!(sys.distance(&[1.0, 2.0]), 0.0);
        let e1 = DenseMatrix::from_rows(&[[1.0, 0.0, 0.0]]).unwrap();
        let sys = make_orthonormal_equality_system(e1, vec![4.0]).unwrap();
        assert_eq!(sys.distance(&[1.0, 0.0, 0.0]), 3.0);
        let bad = DenseMatrix::from_rows(&[[1.0, 0.0], [1.0, 1.0]]).unwrap();
        assert!(make_orthonormal_equality_system(bad, vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn partition_is_enforced() {
        let a = DenseMatrix::identity(3).unwrap();
        assert!(InequalitySystem::new(a.clone(), vec![0.0; 3], vec![0, 1], vec![1, 2]).is_err());
        assert!(InequalitySystem::new(a.clone(), vec![0.0; 3], vec![0], vec![1]).is_err());
        assert!(InequalitySystem::new(a, vec![0.0; 3], vec![0, 2], vec![1]).is_ok());
    }

    #[test]
    fn dykstra_box_projection() {
        // unit box in 2-D: x <= 1, -x <= 0, y <= 1, -y <= 0
        let a = DenseMatrix::from_rows(&[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]).unwrap();
        let sys = InequalitySystem::new(a, vec![1.0, 0.0, 1.0, 0.0], vec![0, 1, 2, 3], vec![]).unwrap();
        assert_relative_eq!(sys.distance(&[2.0, 3.0]), 5f64.sqrt(), epsilon = 1e-10);
        assert_relative_eq!(sys.distance(&[0.5, -2.0]), 2.0, epsilon = 1e-10);
        assert_eq!(sys.distance(&[0.5, 0.5]), 0.0);
    }
}
