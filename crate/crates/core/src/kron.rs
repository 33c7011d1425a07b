//! Families of rank-one-deficient orthogonal projectors `Y_i = I - u_i u_iᵀ`
//! and the action of their lifted expectations `E[Y^{⊗p}]`.
//!
//! Each `Y_i` is symmetric and idempotent, so `YᵀY = Y` and the lifted
//! second moment is `Σ_i w_i Y_i ⊗ Y_i`. Tensors of order `p` are stored flat
//! in row-major multi-index order; for `p = 2` that is the row-major `n x n`
//! matrix `V` with `(Y ⊗ Y) vec(V) = vec(Y V Yᵀ)`.

use crate::error::{Error, Result};
use crate::matrix::{axis_norms, axpy, dot, norm_sq, Axis, DenseMatrix};
use crate::solvers::Sampling;

/// Largest `n^p` for which lifted operators are formed explicitly.
pub const EXPLICIT_LIMIT: usize = 4096;

const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorFamily {
    dim: usize,
    weights: Vec<f64>,
    // unit directions, concatenated
    directions: Vec<f64>,
}

impl ProjectorFamily {
    /// Weights must form a probability vector and every direction must have
    /// unit norm (both within 1e-12).
    pub fn new(weights: Vec<f64>, directions: Vec<Vec<f64>>) -> Result<Self> {
        if weights.len() != directions.len() || weights.is_empty() {
            return Err(Error::Dimension(format!(
                "projector family: {} weights for {} directions",
                weights.len(),
                directions.len()
            )));
        }
        validate_probabilities(&weights)?;
        let dim = directions[0].len();
        if dim == 0 {
            return Err(Error::Dimension("projector family: zero-dimensional directions".into()));
        }
        let mut flat = Vec::with_capacity(dim * directions.len());
        for (i, d) in directions.iter().enumerate() {
            if d.len() != dim {
                return Err(Error::Dimension(format!(
                    "direction {i} has length {}, expected {dim}",
                    d.len()
                )));
            }
            if (norm_sq(d).sqrt() - 1.0).abs() > UNIT_TOL {
                return Err(Error::invalid(format!("direction {i} is not a unit vector")));
            }
            flat.extend_from_slice(d);
        }
        Ok(ProjectorFamily {
            dim,
            weights,
            directions: flat,
        })
    }

    /// Projectors onto the orthogonal complements of the rows (`Axis::Row`,
    /// Kaczmarz) or columns (`Axis::Col`, Gauss-Seidel) of `a`. Zero lines are
    /// rejected since their projector is undefined.
    pub fn from_lines(a: &DenseMatrix, axis: Axis, sampling: Sampling) -> Result<Self> {
        let norms = axis_norms(a, axis);
        if let Some(index) = norms.iter().position(|&v| v == 0.0) {
            return Err(Error::ZeroLine {
                axis: axis.name(),
                index,
            });
        }
        let weights = sampling.weights(&norms);
        let (count, dim) = match axis {
            Axis::Row => (a.rows(), a.cols()),
            Axis::Col => (a.cols(), a.rows()),
        };
        let mut directions = Vec::with_capacity(count * dim);
        for (i, &nrm) in norms.iter().enumerate() {
            match axis {
                Axis::Row => directions.extend(a.row(i).iter().map(|v| v / nrm)),
                Axis::Col => directions.extend((0..a.rows()).map(|r| a.get(r, i) / nrm)),
            }
        }
        Ok(ProjectorFamily {
            dim,
            weights,
            directions,
        })
    }

    pub fn rk(a: &DenseMatrix, sampling: Sampling) -> Result<Self> {
        Self::from_lines(a, Axis::Row, sampling)
    }

    pub fn rgs(a: &DenseMatrix, sampling: Sampling) -> Result<Self> {
        Self::from_lines(a, Axis::Col, sampling)
    }

    /// Dimension of the space the projectors act on.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn direction(&self, i: usize) -> &[f64] {
        &self.directions[i * self.dim..(i + 1) * self.dim]
    }

    fn members(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.weights.iter().copied().zip(self.directions.chunks_exact(self.dim))
    }

    /// Explicit `Y_i = I - u_i u_iᵀ`.
    pub fn projector(&self, i: usize) -> DenseMatrix {
        let n = self.dim;
        let u = self.direction(i);
        let mut data = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                data[r * n + c] = if r == c { 1.0 } else { 0.0 } - u[r] * u[c];
            }
        }
        DenseMatrix::new(n, n, data).expect("finite projector")
    }

    /// `E[Y] = I - Σ_i w_i u_i u_iᵀ`.
    pub fn expected_projector(&self) -> DenseMatrix {
        let n = self.dim;
        let mut data = vec![0.0; n * n];
        for r in 0..n {
            data[r * n + r] = 1.0;
        }
        for (w, u) in self.members() {
            for r in 0..n {
                axpy(-w * u[r], u, &mut data[r * n..(r + 1) * n]);
            }
        }
        DenseMatrix::new(n, n, data).expect("finite expectation")
    }

    /// `E[Y] v` without forming `E[Y]`.
    pub fn apply_expected(&self, v: &[f64], out: &mut [f64]) {
        out.copy_from_slice(v);
        for (w, u) in self.members() {
            axpy(-w * dot(u, v), u, out);
        }
    }
}

pub(crate) fn validate_probabilities(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }
    let s: f64 = weights.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("weights sum to {s}, expected 1")));
    }
    Ok(())
}

/// `Σ_i w_i Y_i V Y_i` for an `n x n` matrix `V`: the action of
/// `E[Y ⊗ Y]` on `vec(V)`, in `O(n²)` per family member.
pub fn kron2_apply(family: &ProjectorFamily, v: &DenseMatrix) -> Result<DenseMatrix> {
    let n = family.dim();
    if v.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "kron2_apply: family acts on R^{n}, V is {}x{}",
            v.rows(),
            v.cols()
        )));
    }
    let mut out = vec![0.0; n * n];
    kron2_action(family, v.as_slice(), &mut out, false);
    DenseMatrix::new(n, n, out)
}

// out = Σ w (Y V Y)        (deficit = false)
// out = Σ w (V - Y V Y)    (deficit = true)
// using V - YVY = u(uᵀV) + (Vu)uᵀ - (uᵀVu) uuᵀ, which avoids cancellation.
fn kron2_action(family: &ProjectorFamily, v: &[f64], out: &mut [f64], deficit: bool) {
    let n = family.dim();
    if deficit {
        out.iter_mut().for_each(|o| *o = 0.0);
    } else {
        out.copy_from_slice(v);
    }
    let sign = if deficit { 1.0 } else { -1.0 };
    let mut ut_v = vec![0.0; n];
    let mut v_u = vec![0.0; n];
    for (w, u) in family.members() {
        ut_v.iter_mut().for_each(|x| *x = 0.0);
        for r in 0..n {
            let row = &v[r * n..(r + 1) * n];
            v_u[r] = dot(row, u);
            axpy(u[r], row, &mut ut_v);
        }
        let q = dot(u, &v_u);
        for r in 0..n {
            let o = &mut out[r * n..(r + 1) * n];
            let ur = u[r];
            let vur = v_u[r];
            for c in 0..n {
                o[c] += sign * w * (ur * ut_v[c] + vur * u[c] - q * ur * u[c]);
            }
        }
    }
}

/// Applies `Y = I - uuᵀ` along every mode of an order-`p` tensor in place.
fn apply_projector_all_modes(u: &[f64], p: usize, t: &mut [f64]) {
    let n = u.len();
    let mut fiber = vec![0.0; n];
    for mode in 0..p {
        let stride = n.pow((p - 1 - mode) as u32);
        let block = stride * n;
        for base in (0..t.len()).step_by(block) {
            for offset in 0..stride {
                let start = base + offset;
                for (k, f) in fiber.iter_mut().enumerate() {
                    *f = t[start + k * stride];
                }
                let c = dot(u, &fiber);
                for (k, uk) in u.iter().enumerate() {
                    t[start + k * stride] -= c * uk;
                }
            }
        }
    }
}

/// The lifted expectation `E[Y^{⊗p}]` as a matrix-free symmetric operator on
/// `R^{n^p}`.
#[derive(Debug, Clone, Copy)]
pub struct LiftedOperator<'a> {
    family: &'a ProjectorFamily,
    p: usize,
}

impl<'a> LiftedOperator<'a> {
    pub fn new(family: &'a ProjectorFamily, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::invalid("lifted operator order must be >= 1"));
        }
        family
            .dim()
            .checked_pow(p as u32)
            .ok_or_else(|| Error::invalid("lifted dimension overflows"))?;
        Ok(LiftedOperator { family, p })
    }

    pub fn order(&self) -> usize {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.family.dim().pow(self.p as u32)
    }

    /// `out = E[Y^{⊗p}] x`
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        match self.p {
            1 => self.family.apply_expected(x, out),
            2 => kron2_action(self.family, x, out, false),
            p => {
                out.iter_mut().for_each(|o| *o = 0.0);
                let mut t = vec![0.0; x.len()];
                for (w, u) in self.family.members() {
                    t.copy_from_slice(x);
                    apply_projector_all_modes(u, p, &mut t);
                    axpy(w, &t, out);
                }
            }
        }
    }

    /// `out = (I - E[Y^{⊗p}]) x`, evaluated without cancellation for p <= 2.
    pub fn apply_deficit(&self, x: &[f64], out: &mut [f64]) {
        match self.p {
            1 => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for (w, u) in self.family.members() {
                    axpy(w * dot(u, x), u, out);
                }
            }
            2 => kron2_action(self.family, x, out, true),
            _ => {
                self.apply(x, out);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = xi - *o;
                }
            }
        }
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let cols = ac * bc;
    let mut data = vec![0.0; ar * br * cols];
    for i in 0..ar {
        for j in 0..ac {
            let aij = a.get(i, j);
            if aij == 0.0 {
                continue;
            }
            for k in 0..br {
                let row = i * br + k;
                let dst = &mut data[row * cols + j * bc..row * cols + (j + 1) * bc];
                for (d, bv) in dst.iter_mut().zip(b.row(k)) {
                    *d = aij * bv;
                }
            }
        }
    }
    DenseMatrix::new(ar * br, cols, data).expect("finite kron")
}

/// Explicit `E[(YᵀY)^{⊗p}] = Σ_i w_i Y_i^{⊗p}`, guarded by `n^p <= 4096`.
pub fn kron_explicit(family: &ProjectorFamily, p: usize) -> Result<DenseMatrix> {
    if p == 0 {
        return Err(Error::invalid("kron_explicit: p must be >= 1"));
    }
    let n = family.dim();
    let size = (n as u128).pow(p as u32);
    if size > EXPLICIT_LIMIT as u128 {
        return Err(Error::SizeGuard {
            what: "explicit lifted operator dimension n^p",
            required: size,
            limit: EXPLICIT_LIMIT as u128,
        });
    }
    let size = size as usize;
    let mut acc = vec![0.0; size * size];
    for i in 0..family.len() {
        let y = family.projector(i);
        let mut power = y.clone();
        for _ in 1..p {
            power = kron(&power, &y);
        }
        axpy(family.weights()[i], power.as_slice(), &mut acc);
    }
    DenseMatrix::new(size, size, acc)
}
