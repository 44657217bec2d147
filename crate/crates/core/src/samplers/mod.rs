//! Perturbation distributions for the TS sampling rule.
//!
//! Each distribution carries the constants of the TS exploration condition:
//! a concentration radius `√(c·d·log(c′d/δ))` holding with probability at
//! least `1 − δ`, and an anti-concentration level `p` such that
//! `P(uᵀη ≥ 1) ≥ p` for every unit vector `u`.

pub mod special;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::Vector;

pub use special::{erfc, reg_inc_beta};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistKind {
    /// `N(0, I_d)`.
    #[serde(alias = "gaussian_std")]
    Gaussian,
    /// Uniform on the ball of radius `√d`.
    #[serde(alias = "uniform_ball_sqrt_d")]
    UniformBall,
    /// Uniform on the sphere of radius `√d`.
    #[serde(alias = "uniform_sphere_sqrt_d")]
    UniformSphere,
    /// Always returns the same vector while claiming the Gaussian constants.
    /// Used as a negative control and to switch the perturbation off in tests.
    Constant(Vec<f64>),
}

/// `(c, c′, p)`; `p` is `None` where no closed-form level is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Def1Constants {
    pub c: f64,
    pub c_prime: f64,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsDistribution {
    pub kind: DistKind,
    pub dim: usize,
}

/// `1/(4√(eπ))`, lower bound on the standard normal tail at 1.
pub fn gaussian_p() -> f64 {
    1.0 / (4.0 * (std::f64::consts::E * std::f64::consts::PI).sqrt())
}

/// `1/(16√(6π))`, lower bound on the ball cap probability.
pub fn uniform_ball_p() -> f64 {
    1.0 / (16.0 * (6.0 * std::f64::consts::PI).sqrt())
}

impl TsDistribution {
    pub fn new(kind: DistKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        if let DistKind::Constant(v) = &kind {
            if v.len() != dim {
                return Err(invalid("constant perturbation has the wrong dimension"));
            }
        }
        Ok(Self { kind, dim })
    }

    pub fn gaussian(dim: usize) -> Result<Self> {
        Self::new(DistKind::Gaussian, dim)
    }

    pub fn uniform_ball(dim: usize) -> Result<Self> {
        Self::new(DistKind::UniformBall, dim)
    }

    pub fn uniform_sphere(dim: usize) -> Result<Self> {
        Self::new(DistKind::UniformSphere, dim)
    }

    /// The all-zero perturbation.
    pub fn zero(dim: usize) -> Result<Self> {
        Self::new(DistKind::Constant(vec![0.0; dim]), dim)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            DistKind::Gaussian => "gaussian",
            DistKind::UniformBall => "uniform_ball",
            DistKind::UniformSphere => "uniform_sphere",
            DistKind::Constant(_) => "constant",
        }
    }

    pub fn constants(&self) -> Def1Constants {
        let d = self.dim as f64;
        match self.kind {
            DistKind::Gaussian | DistKind::Constant(_) => Def1Constants {
                c: 2.0,
                c_prime: 2.0,
                p: Some(gaussian_p()),
            },
            DistKind::UniformBall => Def1Constants {
                c: 1.0,
                c_prime: std::f64::consts::E / d,
                p: Some(uniform_ball_p()),
            },
            DistKind::UniformSphere => Def1Constants {
                c: 1.0,
                c_prime: std::f64::consts::E / d,
                p: None,
            },
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let d = self.dim;
        match &self.kind {
            DistKind::Gaussian => Vector::from_fn(d, |_, _| rng.sample(StandardNormal)),
            DistKind::UniformBall => {
                let dir = unit_direction(d, rng);
                // Radius by CDF inversion; U ∈ (0, 1].
                let u = 1.0 - rng.random::<f64>();
                dir * ((d as f64).sqrt() * u.powf(1.0 / d as f64))
            }
            DistKind::UniformSphere => unit_direction(d, rng) * (d as f64).sqrt(),
            DistKind::Constant(v) => Vector::from_column_slice(v),
        }
    }

    /// `√(c·d·log(c′d/δ))`.
    pub fn concentration_radius(&self, delta: f64) -> Result<f64> {
        let k = self.constants();
        concentration_radius_with(k.c, k.c_prime, self.dim, delta)
    }

    /// The closed-form anti-concentration level `p`.
    pub fn anticoncentration_bound(&self) -> Result<f64> {
        match self.kind {
            DistKind::Gaussian => Ok(gaussian_p()),
            DistKind::UniformBall => Ok(uniform_ball_p()),
            DistKind::UniformSphere => Err(Error::Unsupported(
                "no closed-form anti-concentration level for the sphere".into(),
            )),
            DistKind::Constant(_) => Err(Error::Unsupported(
                "constant perturbation has no anti-concentration level".into(),
            )),
        }
    }
}

pub fn concentration_radius_with(c: f64, c_prime: f64, dim: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let ratio = c_prime * dim as f64 / delta;
    if !(ratio > 1.0) {
        return Err(invalid(format!(
            "c'd/delta = {ratio} <= 1 makes the concentration bound vacuous"
        )));
    }
    Ok((c * dim as f64 * ratio.ln()).sqrt())
}

/// Uniform direction on the unit sphere (normalized Gaussian).
pub fn unit_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vector {
    loop {
        let g = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = g.norm();
        if n > 0.0 {
            return g / n;
        }
    }
}

/// Exact `P(uᵀη ≥ 1)` for `η` uniform on the ball of radius `√d`:
/// `½·I_{1−1/d}((d+1)/2, ½)`.
pub fn cap_probability(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(invalid(format!("cap probability needs d >= 2, got {d}")));
    }
    let d = d as f64;
    Ok(0.5 * reg_inc_beta(1.0 - 1.0 / d, (d + 1.0) / 2.0, 0.5)?)
}

/// `P(η₁ ≥ 1) = ½·erfc(1/√2)` for a standard normal.
pub fn gaussian_tail_at_one() -> f64 {
    0.5 * erfc(std::f64::consts::FRAC_1_SQRT_2)
}
