//! Arm-selection rules.
//!
//! The TS rules all share one sampling step,
//! `θ̃ = θ̂ + scale·β_t(δ′)·V^{-1/2}·η` with `η` drawn from the perturbation
//! distribution, followed by an argmax over the decision set.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::armsets::ArmSet;
use crate::error::{invalid, Error, Result};
use crate::estimators::{beta_t, glm_estimate_from, rls_estimate, ConfidenceParams, LinkFunction};
use crate::linalg::{DesignState, Vector};
use crate::samplers::TsDistribution;

/// Penalized objective `f(x; θ) = xᵀθ + w·c(x)` for regularized linear optimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RloPenalty {
    /// `c(x) = −‖x‖²`, `x` unconstrained.
    QuadraticNorm { weight: f64 },
    /// `c(x) = −‖x‖₁` over the box `[−1/√d, 1/√d]^d`.
    L1Box { weight: f64 },
}

impl RloPenalty {
    pub fn validate(&self) -> Result<()> {
        let w = self.weight();
        if !(w > 0.0) || !w.is_finite() {
            return Err(invalid(format!("penalty weight must be positive, got {w}")));
        }
        Ok(())
    }

    pub fn weight(&self) -> f64 {
        match *self {
            RloPenalty::QuadraticNorm { weight } | RloPenalty::L1Box { weight } => weight,
        }
    }

    /// `c(x)`.
    pub fn penalty(&self, x: &Vector) -> f64 {
        match self {
            RloPenalty::QuadraticNorm { .. } => -x.norm_squared(),
            RloPenalty::L1Box { .. } => -x.lp_norm(1),
        }
    }

    /// `f(x; θ)`.
    pub fn objective(&self, x: &Vector, theta: &Vector) -> f64 {
        x.dot(theta) + self.weight() * self.penalty(x)
    }
}

/// `argmax_x f(x; θ)` and its value.
pub fn rlo_best(penalty: &RloPenalty, theta: &Vector) -> (Vector, f64) {
    match *penalty {
        RloPenalty::QuadraticNorm { weight } => {
            let arm = theta / (2.0 * weight);
            let value = theta.norm_squared() / (4.0 * weight);
            (arm, value)
        }
        RloPenalty::L1Box { weight } => {
            let scale = 1.0 / (theta.len() as f64).sqrt();
            let arm = theta.map(|v| {
                if v.abs() > weight {
                    v.signum() * scale
                } else {
                    0.0
                }
            });
            let value = theta
                .iter()
                .map(|v| (v.abs() - weight).max(0.0))
                .sum::<f64>()
                * scale;
            (arm, value)
        }
    }
}

#[derive(Debug, Clone)]
pub enum PolicySpec {
    LinTs {
        dist: TsDistribution,
    },
    GlmTs {
        dist: TsDistribution,
        link: LinkFunction,
    },
    RloTs {
        dist: TsDistribution,
        penalty: RloPenalty,
    },
    Greedy,
    EpsGreedy {
        eps: f64,
    },
}

impl PolicySpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PolicySpec::EpsGreedy { eps } if !(0.0..=1.0).contains(eps) => {
                Err(invalid(format!("epsilon must lie in [0, 1], got {eps}")))
            }
            PolicySpec::GlmTs { link, .. } => link.validate(),
            PolicySpec::RloTs { penalty, .. } => penalty.validate(),
            _ => Ok(()),
        }
    }

    pub fn dist(&self) -> Option<&TsDistribution> {
        match self {
            PolicySpec::LinTs { dist }
            | PolicySpec::GlmTs { dist, .. }
            | PolicySpec::RloTs { dist, .. } => Some(dist),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::LinTs { .. } => "lin_ts",
            PolicySpec::GlmTs { .. } => "glm_ts",
            PolicySpec::RloTs { .. } => "rlo_ts",
            PolicySpec::Greedy => "greedy",
            PolicySpec::EpsGreedy { .. } => "eps_greedy",
        }
    }
}

/// One TS draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub theta_tilde: Vector,
    pub arm: Vector,
    pub arm_index: Option<usize>,
    pub eta: Vector,
}

/// `θ̂ + scale·β_t(δ′)·V^{-1/2}·η`; `t` is the number of absorbed observations.
pub fn perturb(
    state: &DesignState,
    params: &ConfidenceParams,
    center: &Vector,
    scale: f64,
    eta: &Vector,
) -> Result<Vector> {
    let beta = beta_t(params, state.t(), params.delta_prime())?;
    Ok(center + state.v_inv_sqrt() * eta * (scale * beta))
}

/// Linear TS.
pub fn ts_select<R: Rng + ?Sized>(
    state: &DesignState,
    params: &ConfidenceParams,
    dist: &TsDistribution,
    set: &ArmSet,
    rng: &mut R,
) -> Result<Selection> {
    let eta = dist.sample(rng);
    let theta_tilde = perturb(state, params, &rls_estimate(state), 1.0, &eta)?;
    let best = set.best_arm(&theta_tilde)?;
    Ok(Selection {
        theta_tilde,
        arm: best.arm,
        arm_index: best.index,
        eta,
    })
}

/// TS around a GLM estimate, with the radius inflated by `1/c_μ`. Since `μ` is
/// increasing, the argmax of `μ(xᵀθ̃)` is the linear argmax.
pub fn glm_ts_select<R: Rng + ?Sized>(
    state: &DesignState,
    params: &ConfidenceParams,
    dist: &TsDistribution,
    link: &LinkFunction,
    glm_center: &Vector,
    set: &ArmSet,
    rng: &mut R,
) -> Result<Selection> {
    let eta = dist.sample(rng);
    let theta_tilde = perturb(state, params, glm_center, 1.0 / link.c_mu(), &eta)?;
    let best = set.best_arm(&theta_tilde)?;
    Ok(Selection {
        theta_tilde,
        arm: best.arm,
        arm_index: best.index,
        eta,
    })
}

/// TS for regularized linear optimization.
pub fn rlo_ts_select<R: Rng + ?Sized>(
    state: &DesignState,
    params: &ConfidenceParams,
    dist: &TsDistribution,
    penalty: &RloPenalty,
    rng: &mut R,
) -> Result<Selection> {
    let eta = dist.sample(rng);
    let theta_tilde = perturb(state, params, &rls_estimate(state), 1.0, &eta)?;
    let (arm, _) = rlo_best(penalty, &theta_tilde);
    Ok(Selection {
        theta_tilde,
        arm,
        arm_index: None,
        eta,
    })
}

/// `x*(θ̂)`.
pub fn greedy_select(state: &DesignState, set: &ArmSet) -> Result<(Vector, Option<usize>)> {
    let best = set.best_arm(&rls_estimate(state))?;
    Ok((best.arm, best.index))
}

/// Greedy with probability `1 − ε`, otherwise a uniformly drawn arm.
pub fn eps_greedy_select<R: Rng + ?Sized>(
    state: &DesignState,
    set: &ArmSet,
    eps: f64,
    rng: &mut R,
) -> Result<(Vector, Option<usize>)> {
    if rng.random::<f64>() < eps {
        Ok(set.sample_arm(rng))
    } else {
        greedy_select(state, set)
    }
}

/// Observation history and last good estimate for the GLM policy.
///
/// The estimator is re-solved every step, warm-started from the previous
/// estimate. When the solver fails the previous estimate is reused and the
/// step is flagged.
#[derive(Debug, Clone)]
pub struct GlmTracker {
    history: Vec<(Vector, f64)>,
    last: Vector,
    pub tol: f64,
    pub max_iter: usize,
}

/// Tolerance on `‖g(θ̂)‖_{V⁻¹}` used by the GLM policy.
pub const GLM_TOL: f64 = 1e-8;
pub const GLM_MAX_ITER: usize = 100;

impl GlmTracker {
    pub fn new(dim: usize) -> Self {
        Self {
            history: Vec::new(),
            last: Vector::zeros(dim),
            tol: GLM_TOL,
            max_iter: GLM_MAX_ITER,
        }
    }

    pub fn push(&mut self, x: Vector, r: f64) {
        self.history.push((x, r));
    }

    pub fn history(&self) -> &[(Vector, f64)] {
        &self.history
    }

    /// Current estimate and whether it is a fallback to the previous one.
    pub fn estimate(&mut self, link: &LinkFunction, lambda: f64) -> Result<(Vector, bool)> {
        if self.history.is_empty() {
            return Ok((self.last.clone(), false));
        }
        match glm_estimate_from(
            &self.history,
            link,
            lambda,
            self.tol,
            self.max_iter,
            &self.last,
        ) {
            Ok(theta) => {
                self.last = theta.clone();
                Ok((theta, false))
            }
            Err(Error::ConvergenceFailure { .. }) => Ok((self.last.clone(), true)),
            Err(e) => Err(e),
        }
    }
}
