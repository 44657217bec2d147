//! Design matrix bookkeeping.
//!
//! `DesignState` keeps `V = λI + Σ x xᵀ` together with its inverse, the
//! symmetric inverse square root used by the TS sampling rule, the response
//! vector `b = Σ x r` and `log det V`. The inverse is updated by a rank-one
//! (Sherman-Morrison) step and re-inverted from scratch whenever the
//! identity `V·V⁻¹ = I` drifts past [`INVERSE_RESIDUAL_REFRESH`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Componentwise symmetry tolerance of `V`.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Slack on `λ_min(V) ≥ λ`.
pub const MIN_EIGEN_TOL: f64 = 1e-9;
/// Max-norm bound on `V·V⁻¹ − I` and `V^{-1/2}·V^{-1/2} − V⁻¹`.
pub const INVERSE_TOL: f64 = 1e-8;
/// Max-norm tolerance between the incremental `log det V` and a recomputation.
pub const LOG_DET_TOL: f64 = 1e-6;
/// Arms are allowed to exceed the unit ball by this much.
pub const ARM_NORM_TOL: f64 = 1e-12;
/// Quadratic forms more negative than this are reported as degenerate.
pub const QUAD_FORM_NEG_TOL: f64 = 1e-12;
/// Asymmetry accepted by [`sym_sqrt`].
pub const SQRT_SYMMETRY_TOL: f64 = 1e-9;
/// Residual of `V·V⁻¹ − I` that triggers a full re-inversion after an update.
pub const INVERSE_RESIDUAL_REFRESH: f64 = 1e-10;

/// Incrementally maintained regularized design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignState {
    dim: usize,
    lambda: f64,
    t: usize,
    v: Matrix,
    v_inv: Matrix,
    v_inv_sqrt: Matrix,
    b: Vector,
    log_det_v: f64,
}

impl DesignState {
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(invalid(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self {
            dim,
            lambda,
            t: 0,
            v: Matrix::identity(dim, dim) * lambda,
            v_inv: Matrix::identity(dim, dim) / lambda,
            v_inv_sqrt: Matrix::identity(dim, dim) / lambda.sqrt(),
            b: Vector::zeros(dim),
            log_det_v: dim as f64 * lambda.ln(),
        })
    }

    /// Builds the state from a full history in one pass (direct inversion).
    pub fn from_history<'a, I>(dim: usize, lambda: f64, history: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a Vector, f64)>,
    {
        let mut state = Self::new(dim, lambda)?;
        for (x, r) in history {
            check_vector(&state, x, r)?;
            state.v += x * x.transpose();
            state.b.axpy(r, x, 1.0);
            state.t += 1;
        }
        state.v = symmetrize(&state.v);
        state.recompute_from_v()?;
        Ok(state)
    }

    /// Absorbs one observation `(x, r)`.
    pub fn absorb(&mut self, x: &Vector, r: f64) -> Result<()> {
        check_vector(self, x, r)?;
        let vx = &self.v_inv * x;
        let quad = x.dot(&vx).max(0.0);

        self.v += x * x.transpose();
        self.v_inv -= (&vx * vx.transpose()) / (1.0 + quad);
        self.v_inv = symmetrize(&self.v_inv);
        self.b.axpy(r, x, 1.0);
        self.t += 1;
        self.log_det_v += quad.ln_1p();

        let drifted = inverse_residual(&self.v, &self.v_inv) > INVERSE_RESIDUAL_REFRESH;
        let root = if drifted {
            Err(Error::NumericalDegeneracy("inverse drift".into()))
        } else {
            psd_sqrt_checked(&self.v_inv)
        };
        match root {
            Ok(s) => self.v_inv_sqrt = s,
            Err(Error::NumericalDegeneracy(_)) => {
                // Full recompute; the incremental log det is kept since it is
                // monotone by construction.
                let log_det = self.log_det_v;
                self.recompute_from_v()?;
                self.log_det_v = log_det;
            }
            Err(e) => return Err(e),
        }
        Ok(())
    }

    fn recompute_from_v(&mut self) -> Result<()> {
        let eig = SymmetricEigen::new(self.v.clone());
        if eig.eigenvalues.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::NumericalDegeneracy(
                "design matrix lost positive definiteness".into(),
            ));
        }
        let q = &eig.eigenvectors;
        let inv = Vector::from_iterator(self.dim, eig.eigenvalues.iter().map(|e| 1.0 / e));
        let inv_sqrt = inv.map(f64::sqrt);
        self.v_inv = symmetrize(&(q * Matrix::from_diagonal(&inv) * q.transpose()));
        self.v_inv_sqrt = symmetrize(&(q * Matrix::from_diagonal(&inv_sqrt) * q.transpose()));
        self.log_det_v = eig.eigenvalues.iter().map(|e| e.ln()).sum();
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of absorbed observations.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn v(&self) -> &Matrix {
        &self.v
    }

    pub fn v_inv(&self) -> &Matrix {
        &self.v_inv
    }

    pub fn v_inv_sqrt(&self) -> &Matrix {
        &self.v_inv_sqrt
    }

    pub fn b(&self) -> &Vector {
        &self.b
    }

    pub fn log_det_v(&self) -> f64 {
        self.log_det_v
    }

    /// `log(det V / det λI)`.
    pub fn log_det_ratio(&self) -> f64 {
        self.log_det_v - self.dim as f64 * self.lambda.ln()
    }
}

fn check_vector(state: &DesignState, x: &Vector, r: f64) -> Result<()> {
    if x.len() != state.dim {
        return Err(invalid(format!(
            "vector has dimension {}, expected {}",
            x.len(),
            state.dim
        )));
    }
    if !r.is_finite() || x.iter().any(|v| !v.is_finite()) {
        return Err(invalid("non-finite observation"));
    }
    Ok(())
}

/// `‖x‖_M = √(xᵀ M x)`; tiny negative forms are clamped to zero.
pub fn weighted_norm(m: &Matrix, x: &Vector) -> Result<f64> {
    if m.nrows() != x.len() || m.ncols() != x.len() {
        return Err(invalid("dimension mismatch in weighted norm"));
    }
    let q = x.dot(&(m * x));
    if q < -QUAD_FORM_NEG_TOL {
        return Err(Error::NumericalDegeneracy(format!(
            "negative quadratic form {q:e}"
        )));
    }
    Ok(q.max(0.0).sqrt())
}

/// Symmetric PSD square root via eigendecomposition; negative eigenvalues
/// are clamped to zero.
pub fn sym_sqrt(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(invalid("matrix is not square"));
    }
    let asym = max_abs(&(m - m.transpose()));
    if asym > SQRT_SYMMETRY_TOL {
        return Err(invalid(format!(
            "matrix is not symmetric (|M − Mᵀ| = {asym:e})"
        )));
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let roots = eig.eigenvalues.map(|e| e.max(0.0).sqrt());
    let q = &eig.eigenvectors;
    Ok(symmetrize(
        &(q * Matrix::from_diagonal(&roots) * q.transpose()),
    ))
}

/// Like [`sym_sqrt`] but rejects matrices with a nonpositive eigenvalue.
fn psd_sqrt_checked(m: &Matrix) -> Result<Matrix> {
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::NumericalDegeneracy(
            "inverse design matrix has a nonpositive eigenvalue".into(),
        ));
    }
    let roots = eig.eigenvalues.map(f64::sqrt);
    let q = &eig.eigenvectors;
    Ok(symmetrize(
        &(q * Matrix::from_diagonal(&roots) * q.transpose()),
    ))
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// `‖A·B − I‖_max`.
pub fn inverse_residual(a: &Matrix, b: &Matrix) -> f64 {
    let mut prod = a * b;
    for i in 0..prod.nrows() {
        prod[(i, i)] -= 1.0;
    }
    max_abs(&prod)
}
