//! Synthetic environments, episode execution and the ledger diagnostics.
//!
//! Every step records enough to re-derive the regret decomposition
//! `inst_regret = rts + rrls`, the two concentration events and the
//! optimism flag without replaying the episode.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::armsets::ArmSet;
use crate::error::{invalid, Error, Result};
use crate::estimators::{beta_t, rls_estimate, ConfidenceParams, LinkFunction};
use crate::linalg::{weighted_norm, DesignState, Vector, ARM_NORM_TOL};
use crate::policies::{
    eps_greedy_select, glm_ts_select, greedy_select, rlo_best, rlo_ts_select, ts_select,
    GlmTracker, PolicySpec, RloPenalty, Selection,
};
use crate::stats::mean;

/// Tolerance of the per-step decomposition identity.
pub const DECOMPOSITION_TOL: f64 = 1e-9;
/// Tolerance of both determinant-lemma inequalities.
pub const DET_LEMMA_TOL: f64 = 1e-6;

/// Reward noise; every variant is `R`-subgaussian for the matching `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    Gaussian {
        sigma: f64,
    },
    /// Uniform on `[−half_width, half_width]`.
    Uniform {
        half_width: f64,
    },
    /// Bernoulli with mean `μ(xᵀθ*)`; only meaningful with a link in `(0, 1)`.
    Bernoulli,
}

impl NoiseSpec {
    pub fn gaussian(r: f64) -> Self {
        NoiseSpec::Gaussian { sigma: r }
    }

    /// Uniform noise with variance `R²`, i.e. half-width `√3·R`.
    pub fn uniform(r: f64) -> Self {
        NoiseSpec::Uniform {
            half_width: 3f64.sqrt() * r,
        }
    }

    /// The subgaussian scale of the noise.
    pub fn subgaussian_scale(&self) -> f64 {
        match *self {
            NoiseSpec::Gaussian { sigma } => sigma,
            NoiseSpec::Uniform { half_width } => half_width / 3f64.sqrt(),
            NoiseSpec::Bernoulli => 0.5,
        }
    }
}

/// What the learner is optimizing.
#[derive(Debug, Clone)]
pub enum Objective {
    Linear(ArmSet),
    Glm { set: ArmSet, link: LinkFunction },
    Rlo(RloPenalty),
}

#[derive(Debug, Clone)]
pub struct Environment {
    theta_star: Vector,
    objective: Objective,
    noise: NoiseSpec,
}

impl Environment {
    /// Checks `‖θ*‖ ≤ s_bound` and dimensional consistency.
    pub fn new(
        theta_star: Vector,
        objective: Objective,
        noise: NoiseSpec,
        s_bound: f64,
    ) -> Result<Self> {
        if theta_star.iter().any(|v| !v.is_finite()) {
            return Err(invalid("theta* is not finite"));
        }
        if theta_star.norm() > s_bound * (1.0 + 1e-12) {
            return Err(invalid(format!(
                "||theta*|| = {} exceeds S = {s_bound}",
                theta_star.norm()
            )));
        }
        let set_dim = match &objective {
            Objective::Linear(set) | Objective::Glm { set, .. } => Some(set.dim()),
            Objective::Rlo(p) => {
                p.validate()?;
                None
            }
        };
        if let Some(d) = set_dim {
            if d != theta_star.len() {
                return Err(invalid("theta* and arm set dimensions differ"));
            }
        }
        if matches!(noise, NoiseSpec::Bernoulli) {
            match &objective {
                Objective::Glm { link, .. }
                    if (0..=100).all(|i| {
                        let m = link.mu(-50.0 + i as f64);
                        (0.0..=1.0).contains(&m)
                    }) => {}
                _ => {
                    return Err(invalid(
                        "Bernoulli rewards need a link with values in [0, 1]",
                    ))
                }
            }
        }
        match noise {
            NoiseSpec::Gaussian { sigma } if !(sigma >= 0.0) => {
                return Err(invalid("noise scale must be >= 0"))
            }
            NoiseSpec::Uniform { half_width } if !(half_width >= 0.0) => {
                return Err(invalid("noise scale must be >= 0"))
            }
            _ => {}
        }
        Ok(Self {
            theta_star,
            objective,
            noise,
        })
    }

    pub fn theta_star(&self) -> &Vector {
        &self.theta_star
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn noise(&self) -> NoiseSpec {
        self.noise
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    /// Value of arm `x` under parameter `θ`, in the objective's own scale.
    pub fn value(&self, x: &Vector, theta: &Vector) -> f64 {
        match &self.objective {
            Objective::Linear(_) => x.dot(theta),
            Objective::Glm { link, .. } => link.mu(x.dot(theta)),
            Objective::Rlo(p) => p.objective(x, theta),
        }
    }

    /// Best achievable value under `θ` (the support value for linear sets).
    pub fn optimal(&self, theta: &Vector) -> Result<(Vector, f64)> {
        match &self.objective {
            Objective::Linear(set) => {
                let b = set.best_arm(theta)?;
                Ok((b.arm, b.value))
            }
            Objective::Glm { set, link } => {
                let b = set.best_arm(theta)?;
                Ok((b.arm, link.mu(b.value)))
            }
            Objective::Rlo(p) => Ok(rlo_best(p, theta)),
        }
    }

    /// Draws the reward for playing `x`.
    pub fn reward<R: Rng + ?Sized>(&self, x: &Vector, rng: &mut R) -> f64 {
        let lin = x.dot(&self.theta_star);
        let mean = match &self.objective {
            Objective::Glm { link, .. } => link.mu(lin),
            _ => lin,
        };
        match self.noise {
            NoiseSpec::Gaussian { sigma } => mean + sigma * rng.sample::<f64, _>(StandardNormal),
            NoiseSpec::Uniform { half_width } => {
                if half_width > 0.0 {
                    mean + rng.random_range(-half_width..=half_width)
                } else {
                    mean
                }
            }
            NoiseSpec::Bernoulli => {
                if rng.random::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn arm_set(&self) -> Option<&ArmSet> {
        match &self.objective {
            Objective::Linear(set) | Objective::Glm { set, .. } => Some(set),
            Objective::Rlo(_) => None,
        }
    }
}

/// Everything recorded about one step. Flags are derived from the stored
/// norms and radii, never cached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based step index.
    pub t: usize,
    pub arm: Vec<f64>,
    pub arm_index: Option<usize>,
    pub theta_hat: Vec<f64>,
    pub theta_tilde: Vec<f64>,
    pub eta: Vec<f64>,
    pub reward: f64,
    /// Optimal value under `θ*`.
    pub value_star: f64,
    /// Optimal value under `θ̃`.
    pub value_tilde: f64,
    /// Value of the played arm under `θ̃`.
    pub played_tilde: f64,
    /// Value of the played arm under `θ*`.
    pub played_star: f64,
    pub inst_regret: f64,
    pub rts: f64,
    pub rrls: f64,
    /// `‖θ̂ − θ*‖_V`.
    pub err_norm: f64,
    /// `‖θ̃ − θ̂‖_V`.
    pub sample_norm: f64,
    /// Radius of the estimate ellipsoid (`β_t(δ′)`, divided by `c_μ` for GLM).
    pub beta_radius: f64,
    /// Radius of the sampling ellipsoid (`γ_t(δ′)`, divided by `c_μ` for GLM).
    pub gamma_radius: f64,
    /// `‖x_t‖_{V_t⁻¹}`, before absorbing `x_t`.
    pub feat_norm: f64,
    /// `2·log(det V_{t+1} / det λI)`.
    pub det_mid: f64,
    pub cum_regret: f64,
    pub cum_rts: f64,
    pub cum_rrls: f64,
    /// `Σ feat_norm²` up to this step.
    pub det_lhs: f64,
    pub glm_fallback: bool,
}

impl StepRecord {
    pub fn optimistic(&self) -> bool {
        self.value_tilde >= self.value_star
    }

    pub fn hat_e(&self) -> bool {
        self.err_norm <= self.beta_radius
    }

    pub fn tilde_e(&self) -> bool {
        self.sample_norm <= self.gamma_radius
    }

    pub fn arm_norm(&self) -> f64 {
        self.arm.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegretLedger {
    pub steps: Vec<StepRecord>,
}

impl RegretLedger {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn cum_regret(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.cum_regret)
    }

    pub fn det_lhs(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.det_lhs)
    }
}

/// Mutable per-lane learner state.
#[derive(Debug, Clone)]
pub struct Learner {
    pub state: DesignState,
    pub glm: Option<GlmTracker>,
}

impl Learner {
    pub fn new(dim: usize, lambda: f64, policy: &PolicySpec) -> Result<Self> {
        Ok(Self {
            state: DesignState::new(dim, lambda)?,
            glm: matches!(policy, PolicySpec::GlmTs { .. }).then(|| GlmTracker::new(dim)),
        })
    }
}

/// Plays one round: select, observe, record, absorb.
pub fn step<R: Rng + ?Sized>(
    env: &Environment,
    policy: &PolicySpec,
    learner: &mut Learner,
    params: &ConfidenceParams,
    ledger: &mut RegretLedger,
    rng: &mut R,
) -> Result<()> {
    let state = &learner.state;
    let d = state.dim();
    let delta_prime = params.delta_prime();
    let beta = beta_t(params, state.t(), delta_prime)?;

    let mut glm_fallback = false;
    let (center, radius_scale, selection) = match policy {
        PolicySpec::LinTs { dist } => {
            let center = rls_estimate(state);
            let sel = ts_select(state, params, dist, env_set(env)?, rng)?;
            (center, 1.0, sel)
        }
        PolicySpec::RloTs { dist, penalty } => {
            let center = rls_estimate(state);
            let sel = rlo_ts_select(state, params, dist, penalty, rng)?;
            (center, 1.0, sel)
        }
        PolicySpec::GlmTs { dist, link } => {
            let tracker = learner
                .glm
                .as_mut()
                .ok_or_else(|| invalid("GLM policy needs a GLM tracker"))?;
            let (center, fallback) = tracker.estimate(link, state.lambda())?;
            glm_fallback = fallback;
            let sel = glm_ts_select(state, params, dist, link, &center, env_set(env)?, rng)?;
            (center, 1.0 / link.c_mu(), sel)
        }
        PolicySpec::Greedy | PolicySpec::EpsGreedy { .. } => {
            let center = rls_estimate(state);
            let (arm, arm_index) = match policy {
                PolicySpec::EpsGreedy { eps } => {
                    eps_greedy_select(state, env_set(env)?, *eps, rng)?
                }
                _ => greedy_select(state, env_set(env)?)?,
            };
            let sel = Selection {
                theta_tilde: center.clone(),
                arm,
                arm_index,
                eta: Vector::zeros(d),
            };
            (center, 1.0, sel)
        }
    };
    let gamma = match policy.dist() {
        Some(dist) => beta * dist.concentration_radius(delta_prime)?,
        None => 0.0,
    };

    let theta_star = env.theta_star();
    let (_, value_star) = env.optimal(theta_star)?;
    let (_, value_tilde) = env.optimal(&selection.theta_tilde)?;
    let x = &selection.arm;
    let played_tilde = env.value(x, &selection.theta_tilde);
    let played_star = env.value(x, theta_star);
    let inst_regret = value_star - played_star;
    let rts = value_star - played_tilde;
    let rrls = played_tilde - played_star;

    let err_norm = weighted_norm(state.v(), &(&center - theta_star))?;
    let sample_norm = weighted_norm(state.v(), &(&selection.theta_tilde - &center))?;
    let feat_norm = weighted_norm(state.v_inv(), x)?;

    let reward = env.reward(x, rng);
    learner.state.absorb(x, reward)?;
    if let Some(tracker) = learner.glm.as_mut() {
        tracker.push(x.clone(), reward);
    }

    let prev = ledger.steps.last();
    let record = StepRecord {
        t: ledger.steps.len() + 1,
        arm: x.iter().copied().collect(),
        arm_index: selection.arm_index,
        theta_hat: center.iter().copied().collect(),
        theta_tilde: selection.theta_tilde.iter().copied().collect(),
        eta: selection.eta.iter().copied().collect(),
        reward,
        value_star,
        value_tilde,
        played_tilde,
        played_star,
        inst_regret,
        rts,
        rrls,
        err_norm,
        sample_norm,
        beta_radius: beta * radius_scale,
        gamma_radius: gamma * radius_scale,
        feat_norm,
        det_mid: 2.0 * learner.state.log_det_ratio(),
        cum_regret: prev.map_or(0.0, |p| p.cum_regret) + inst_regret,
        cum_rts: prev.map_or(0.0, |p| p.cum_rts) + rts,
        cum_rrls: prev.map_or(0.0, |p| p.cum_rrls) + rrls,
        det_lhs: prev.map_or(0.0, |p| p.det_lhs) + feat_norm * feat_norm,
        glm_fallback,
    };
    ledger.steps.push(record);
    Ok(())
}

fn env_set(env: &Environment) -> Result<&ArmSet> {
    env.arm_set()
        .ok_or_else(|| invalid("policy needs an arm set but the objective has none"))
}

/// The two inequalities `Σ‖x_t‖²_{V_t⁻¹} ≤ 2 log(det V_{T+1}/det λI) ≤ 2d log(1 + T/λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetLemmaCheck {
    pub lhs: f64,
    pub mid: f64,
    pub rhs: f64,
    pub ok: bool,
}

pub fn check_det_lemma(ledger: &RegretLedger, state: &DesignState) -> DetLemmaCheck {
    let t = ledger.len() as f64;
    let lhs = ledger.det_lhs();
    let mid = 2.0 * state.log_det_ratio();
    let rhs = 2.0 * state.dim() as f64 * (1.0 + t / state.lambda()).ln();
    DetLemmaCheck {
        lhs,
        mid,
        rhs,
        ok: lhs <= mid + DET_LEMMA_TOL && mid <= rhs + DET_LEMMA_TOL,
    }
}

/// Whether the determinant lemma's hypotheses (`λ ≥ 1`, `‖x_t‖ ≤ 1`) hold.
pub fn det_lemma_applies(ledger: &RegretLedger, lambda: f64) -> bool {
    lambda >= 1.0
        && ledger
            .steps
            .iter()
            .all(|s| s.arm_norm() <= 1.0 + ARM_NORM_TOL)
}

/// `(numerator, denominator)` of the optimism frequency. Conditioned on the
/// estimate event, the numerator also requires the sampling event.
pub fn optimism_counts(ledger: &RegretLedger, condition_on_hat_e: bool) -> (usize, usize) {
    if condition_on_hat_e {
        let den = ledger.steps.iter().filter(|s| s.hat_e()).count();
        let num = ledger
            .steps
            .iter()
            .filter(|s| s.hat_e() && s.tilde_e() && s.optimistic())
            .count();
        (num, den)
    } else {
        let num = ledger.steps.iter().filter(|s| s.optimistic()).count();
        (num, ledger.len())
    }
}

pub fn optimism_frequency(ledger: &RegretLedger, condition_on_hat_e: bool) -> Result<f64> {
    if ledger.is_empty() {
        return Err(invalid("optimism frequency of an empty ledger"));
    }
    let (num, den) = optimism_counts(ledger, condition_on_hat_e);
    if den == 0 {
        return Err(invalid("no step satisfies the conditioning event"));
    }
    Ok(num as f64 / den as f64)
}

/// Fractions of trajectories with at least one violation of each event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViolationRates {
    pub hat_e: f64,
    pub tilde_e: f64,
    pub joint: f64,
}

pub fn event_violation_rates(records: &[TrajectoryRecord]) -> Result<ViolationRates> {
    if records.len() < 2 {
        return Err(invalid("violation rates need at least two trajectories"));
    }
    let n = records.len() as f64;
    let hat = records
        .iter()
        .filter(|r| r.ledger.steps.iter().any(|s| !s.hat_e()))
        .count();
    let tilde = records
        .iter()
        .filter(|r| r.ledger.steps.iter().any(|s| !s.tilde_e()))
        .count();
    let joint = records
        .iter()
        .filter(|r| r.ledger.steps.iter().any(|s| !s.hat_e() || !s.tilde_e()))
        .count();
    Ok(ViolationRates {
        hat_e: hat as f64 / n,
        tilde_e: tilde as f64 / n,
        joint: joint as f64 / n,
    })
}

/// Martingale-deviation monitor over a batch of seeds: each seed's running
/// sum of `feat_norm_t − mean_over_seeds(feat_norm_t)` against the
/// Azuma-style radius `√(8T/λ · log(4/δ))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleMonitor {
    pub bound: f64,
    pub max_deviation: Vec<f64>,
    pub fraction_within: f64,
    pub ok: bool,
}

pub fn martingale_monitor(
    records: &[TrajectoryRecord],
    lambda: f64,
    delta: f64,
) -> Result<MartingaleMonitor> {
    let Some(first) = records.first() else {
        return Err(invalid("monitor needs at least one trajectory"));
    };
    let horizon = first.ledger.len();
    if records.iter().any(|r| r.ledger.len() != horizon) {
        return Err(invalid("monitor needs trajectories of equal length"));
    }
    let lane_mean: Vec<f64> = (0..horizon)
        .map(|t| {
            mean(
                &records
                    .iter()
                    .map(|r| r.ledger.steps[t].feat_norm)
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    let bound = (8.0 * horizon as f64 / lambda * (4.0 / delta).ln()).sqrt();
    let max_deviation: Vec<f64> = records
        .iter()
        .map(|r| {
            let mut acc = 0.0f64;
            let mut worst = 0.0f64;
            for (s, m) in r.ledger.steps.iter().zip(&lane_mean) {
                acc += s.feat_norm - m;
                worst = worst.max(acc.abs());
            }
            worst
        })
        .collect();
    let within = max_deviation.iter().filter(|&&m| m <= bound).count();
    let fraction_within = within as f64 / records.len() as f64;
    Ok(MartingaleMonitor {
        bound,
        max_deviation,
        fraction_within,
        ok: fraction_within >= 1.0 - delta / 2.0,
    })
}

/// Per-episode summary; every field is recomputable from the per-step CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub steps: usize,
    pub cum_regret: f64,
    pub cum_rts: f64,
    pub cum_rrls: f64,
    pub optimism_frequency: Option<f64>,
    pub conditional_optimism_frequency: Option<f64>,
    pub hat_e_violations: usize,
    pub tilde_e_violations: usize,
    pub det_lemma: Option<DetLemmaCheck>,
    /// `min_t (det_mid_t − det_lhs_t)`.
    pub det_min_slack: Option<f64>,
    /// Mean and max distance between consecutive optimistic steps.
    pub mean_optimism_gap: Option<f64>,
    pub max_optimism_gap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub dim: usize,
    pub lambda: f64,
    pub horizon: usize,
    pub ledger: RegretLedger,
    pub summary: EpisodeSummary,
    pub warnings: Vec<String>,
}

/// Runs `params.horizon` steps from a fresh learner.
pub fn run_episode<R: Rng + ?Sized>(
    env: &Environment,
    policy: &PolicySpec,
    params: &ConfidenceParams,
    rng: &mut R,
) -> Result<TrajectoryRecord> {
    run_steps(env, policy, params, params.horizon, rng)
}

/// Like [`run_episode`] with an explicit number of steps (possibly 0);
/// `params.horizon` still sets `δ′`.
pub fn run_steps<R: Rng + ?Sized>(
    env: &Environment,
    policy: &PolicySpec,
    params: &ConfidenceParams,
    steps: usize,
    rng: &mut R,
) -> Result<TrajectoryRecord> {
    policy.validate()?;
    if params.dim != env.dim() {
        return Err(invalid(
            "confidence parameters and environment dimensions differ",
        ));
    }
    let mut warnings = Vec::new();
    if let Some(p) = policy.dist().and_then(|d| d.anticoncentration_bound().ok()) {
        if (params.horizon as f64) < 1.0 / (2.0 * p) {
            warnings.push(format!(
                "horizon {} is below 1/(2p) = {:.1}; the optimism argument needs delta' <= p/2",
                params.horizon,
                1.0 / (2.0 * p)
            ));
        }
    }
    let mut learner = Learner::new(env.dim(), params.lambda, policy)?;
    let mut ledger = RegretLedger {
        steps: Vec::with_capacity(steps),
    };
    for t in 0..steps {
        step(env, policy, &mut learner, params, &mut ledger, rng).map_err(|e| Error::AtStep {
            step: t + 1,
            source: Box::new(e),
        })?;
    }
    for s in ledger.steps.iter().filter(|s| s.glm_fallback) {
        warnings.push(format!(
            "step {}: GLM estimator fell back to the previous estimate",
            s.t
        ));
    }
    let applies = det_lemma_applies(&ledger, params.lambda);
    if !applies {
        warnings.push("determinant lemma skipped: lambda < 1 or an arm with norm > 1".into());
    }
    let summary = summarize(&ledger, &learner.state, applies);
    Ok(TrajectoryRecord {
        dim: env.dim(),
        lambda: params.lambda,
        horizon: params.horizon,
        ledger,
        summary,
        warnings,
    })
}

fn summarize(ledger: &RegretLedger, state: &DesignState, det_applies: bool) -> EpisodeSummary {
    let last = ledger.steps.last();
    let optimistic: Vec<usize> = ledger
        .steps
        .iter()
        .filter(|s| s.optimistic())
        .map(|s| s.t)
        .collect();
    let gaps: Vec<usize> = optimistic.windows(2).map(|w| w[1] - w[0]).collect();
    EpisodeSummary {
        steps: ledger.len(),
        cum_regret: last.map_or(0.0, |s| s.cum_regret),
        cum_rts: last.map_or(0.0, |s| s.cum_rts),
        cum_rrls: last.map_or(0.0, |s| s.cum_rrls),
        optimism_frequency: optimism_frequency(ledger, false).ok(),
        conditional_optimism_frequency: optimism_frequency(ledger, true).ok(),
        hat_e_violations: ledger.steps.iter().filter(|s| !s.hat_e()).count(),
        tilde_e_violations: ledger.steps.iter().filter(|s| !s.tilde_e()).count(),
        det_lemma: det_applies.then(|| check_det_lemma(ledger, state)),
        det_min_slack: if det_applies {
            ledger
                .steps
                .iter()
                .map(|s| s.det_mid - s.det_lhs)
                .reduce(f64::min)
        } else {
            None
        },
        mean_optimism_gap: (!gaps.is_empty())
            .then(|| gaps.iter().sum::<usize>() as f64 / gaps.len() as f64),
        max_optimism_gap: gaps.iter().copied().max(),
    }
}
