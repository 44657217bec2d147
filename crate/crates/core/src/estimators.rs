//! Point estimators and confidence radii.

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{weighted_norm, DesignState, Matrix, Vector};
use crate::samplers::TsDistribution;

/// Problem constants that drive the confidence radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceParams {
    pub dim: usize,
    /// Subgaussian scale of the noise.
    pub r: f64,
    /// Bound on `‖θ*‖`.
    pub s: f64,
    pub lambda: f64,
    pub delta: f64,
    pub horizon: usize,
}

impl ConfidenceParams {
    pub fn new(
        dim: usize,
        r: f64,
        s: f64,
        lambda: f64,
        delta: f64,
        horizon: usize,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        if !(r >= 0.0) || !r.is_finite() {
            return Err(invalid(format!("R must be nonnegative, got {r}")));
        }
        if !(s > 0.0) || !s.is_finite() {
            return Err(invalid(format!("S must be positive, got {s}")));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(invalid(format!("lambda must be positive, got {lambda}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
        }
        if horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        Ok(Self {
            dim,
            r,
            s,
            lambda,
            delta,
            horizon,
        })
    }

    /// `δ′ = δ / (4T)`.
    pub fn delta_prime(&self) -> f64 {
        self.delta / (4.0 * self.horizon as f64)
    }
}

/// `β_t(δ) = R·√(d·log((λ+t)/λ) + 2·log(1/δ)) + √λ·S`.
pub fn beta_t(params: &ConfidenceParams, t: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let d = params.dim as f64;
    let lam = params.lambda;
    let log_term = d * ((lam + t as f64) / lam).ln() + 2.0 * (1.0 / delta).ln();
    Ok(params.r * log_term.sqrt() + lam.sqrt() * params.s)
}

/// `γ_t(δ) = β_t(δ′)·√(c·d·log(c′d/δ))`.
pub fn gamma_t(
    params: &ConfidenceParams,
    dist: &TsDistribution,
    t: usize,
    delta: f64,
) -> Result<f64> {
    Ok(beta_t(params, t, params.delta_prime())? * dist.concentration_radius(delta)?)
}

/// `θ̂ = V⁻¹ b`.
pub fn rls_estimate(state: &DesignState) -> Vector {
    state.v_inv() * state.b()
}

/// `‖θ − center‖_V ≤ radius`, boundary inclusive.
pub fn in_ellipsoid(state: &DesignState, center: &Vector, theta: &Vector, radius: f64) -> bool {
    weighted_norm(state.v(), &(theta - center)).is_ok_and(|n| n <= radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    Identity,
    Logistic,
    Custom,
}

/// Strictly increasing inverse link `μ` with slope bounds on `[−z_max, z_max]`.
#[derive(Debug, Clone, Copy)]
pub struct LinkFunction {
    kind: LinkKind,
    mu: fn(f64) -> f64,
    mu_prime: fn(f64) -> f64,
    k_mu: f64,
    c_mu: f64,
    z_max: f64,
}

/// Points in the spot check of `μ′ ∈ [c_μ, k_μ]`.
const LINK_GRID: usize = 1000;

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn sigmoid_prime(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 - s)
}

impl LinkFunction {
    pub fn identity() -> Self {
        Self {
            kind: LinkKind::Identity,
            mu: |z| z,
            mu_prime: |_| 1.0,
            k_mu: 1.0,
            c_mu: 1.0,
            z_max: f64::INFINITY,
        }
    }

    /// Logistic link on the admissible region `|z| ≤ z_max`, so `c_μ = μ′(z_max)`.
    pub fn logistic(z_max: f64) -> Result<Self> {
        if !(z_max > 0.0) || !z_max.is_finite() {
            return Err(invalid(format!(
                "z_max must be positive and finite, got {z_max}"
            )));
        }
        Ok(Self {
            kind: LinkKind::Logistic,
            mu: sigmoid,
            mu_prime: sigmoid_prime,
            k_mu: 0.25,
            c_mu: sigmoid_prime(z_max),
            z_max,
        })
    }

    /// User-supplied link, validated on a grid over `[−z_max, z_max]`.
    pub fn custom(
        mu: fn(f64) -> f64,
        mu_prime: fn(f64) -> f64,
        k_mu: f64,
        c_mu: f64,
        z_max: f64,
    ) -> Result<Self> {
        let link = Self {
            kind: LinkKind::Custom,
            mu,
            mu_prime,
            k_mu,
            c_mu,
            z_max,
        };
        link.validate()?;
        Ok(link)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_mu > 0.0) || !(self.k_mu >= self.c_mu) {
            return Err(invalid("link slope bounds must satisfy 0 < c_mu <= k_mu"));
        }
        let span = if self.z_max.is_finite() {
            self.z_max
        } else {
            10.0
        };
        let mut prev = f64::NEG_INFINITY;
        for i in 0..LINK_GRID {
            let z = -span + 2.0 * span * i as f64 / (LINK_GRID - 1) as f64;
            let m = (self.mu)(z);
            let slope = (self.mu_prime)(z);
            if !(m > prev) {
                return Err(invalid(format!(
                    "link is not strictly increasing near z = {z}"
                )));
            }
            let tol = 1e-12 * self.k_mu.max(1.0);
            if slope < self.c_mu - tol || slope > self.k_mu + tol {
                return Err(invalid(format!(
                    "link slope {slope} at z = {z} outside [{}, {}]",
                    self.c_mu, self.k_mu
                )));
            }
            prev = m;
        }
        Ok(())
    }

    pub fn kind(&self) -> LinkKind {
        self.kind
    }

    pub fn mu(&self, z: f64) -> f64 {
        (self.mu)(z)
    }

    pub fn mu_prime(&self, z: f64) -> f64 {
        (self.mu_prime)(z)
    }

    pub fn k_mu(&self) -> f64 {
        self.k_mu
    }

    pub fn c_mu(&self) -> f64 {
        self.c_mu
    }

    pub fn z_max(&self) -> f64 {
        self.z_max
    }
}

/// GLM estimate by solving the score equation `Σ (r − μ(xᵀθ)) x = 0`.
///
/// Damped Newton with a `1e-8·trace` ridge on the Jacobian, step halving
/// on `‖g‖_{V⁻¹}` (with `V = λI + Σ x xᵀ`) and iterates projected onto
/// `‖θ‖ ≤ z_max` of the link. Succeeds once `‖g‖_{V⁻¹} ≤ tol`.
pub fn glm_estimate(
    history: &[(Vector, f64)],
    link: &LinkFunction,
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vector> {
    let dim = history.first().map(|(x, _)| x.len()).unwrap_or(0);
    glm_estimate_from(history, link, lambda, tol, max_iter, &Vector::zeros(dim))
}

/// [`glm_estimate`] started from `init`.
pub fn glm_estimate_from(
    history: &[(Vector, f64)],
    link: &LinkFunction,
    lambda: f64,
    tol: f64,
    max_iter: usize,
    init: &Vector,
) -> Result<Vector> {
    let Some((first, _)) = history.first() else {
        return Err(invalid("GLM estimate needs a nonempty history"));
    };
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    if !(lambda > 0.0) {
        return Err(invalid("lambda must be positive"));
    }
    let d = first.len();
    if init.len() != d || history.iter().any(|(x, _)| x.len() != d) {
        return Err(invalid("inconsistent dimensions in GLM history"));
    }

    let mut design = Matrix::identity(d, d) * lambda;
    for (x, _) in history {
        design += x * x.transpose();
    }
    let v_inv = Cholesky::new(design)
        .ok_or_else(|| {
            Error::NumericalDegeneracy("GLM design matrix is not positive definite".into())
        })?
        .inverse();

    let radius = link.z_max();
    let project = |theta: Vector| -> Vector {
        let n = theta.norm();
        if radius.is_finite() && n > radius {
            theta * (radius / n)
        } else {
            theta
        }
    };
    let score = |theta: &Vector| -> Vector {
        let mut g = Vector::zeros(d);
        for (x, r) in history {
            g.axpy(r - link.mu(x.dot(theta)), x, 1.0);
        }
        g
    };
    let residual = |g: &Vector| weighted_norm(&v_inv, g).unwrap_or(f64::INFINITY);

    let mut theta = project(init.clone());
    let mut g = score(&theta);
    let mut res = residual(&g);
    for iter in 0..max_iter {
        if res <= tol {
            return Ok(theta);
        }
        let mut jac = Matrix::zeros(d, d);
        for (x, _) in history {
            jac += x * x.transpose() * link.mu_prime(x.dot(&theta));
        }
        let ridge = 1e-8 * jac.trace().max(f64::MIN_POSITIVE);
        for i in 0..d {
            jac[(i, i)] += ridge;
        }
        let Some(step) = Cholesky::new(jac).map(|c| c.solve(&g)) else {
            return Err(Error::NumericalDegeneracy(
                "GLM Jacobian is singular".into(),
            ));
        };

        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let cand = project(&theta + &step * scale);
            let cand_g = score(&cand);
            let cand_res = residual(&cand_g);
            if cand_res < res {
                theta = cand;
                g = cand_g;
                res = cand_res;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if !improved {
            return Err(Error::ConvergenceFailure {
                best: theta.iter().copied().collect(),
                residual: res,
                iterations: iter + 1,
            });
        }
    }
    if res <= tol {
        return Ok(theta);
    }
    Err(Error::ConvergenceFailure {
        best: theta.iter().copied().collect(),
        residual: res,
        iterations: max_iter,
    })
}
