//! Experiment configs, seeded lanes, sweeps and the on-disk formats.
//!
//! A config is a TOML file (see `docs/config.md` at the repository root).
//! Each `(cell, seed)` pair is an isolated lane: the problem instance is
//! drawn from a stream keyed by `(dim, seed)` and the episode from a stream
//! keyed by `(cell, seed)`, both under the master seed. Adding cells or
//! seeds therefore never perturbs existing lanes, and results do not depend
//! on the number of worker threads.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::armsets::ArmSet;
use crate::error::{invalid, Result};
use crate::estimators::{ConfidenceParams, LinkFunction};
use crate::linalg::Vector;
use crate::policies::{PolicySpec, RloPenalty};
use crate::rng::{lane_rng, Purpose};
use crate::samplers::{unit_direction, DistKind, TsDistribution};
use crate::simulator::{
    martingale_monitor, optimism_counts, run_steps, Environment, EpisodeSummary, MartingaleMonitor,
    NoiseSpec, Objective, TrajectoryRecord,
};
use crate::stats::{mean, std_dev};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Linear,
    Glm,
    Rlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArmSpec {
    UnitBall,
    Hypercube,
    Finite {
        arms: Vec<Vec<f64>>,
    },
    /// Plain-text matrix, one arm per line.
    File {
        path: PathBuf,
    },
    /// `count` arms drawn uniformly on the unit sphere.
    Random {
        count: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaSpec {
    Explicit {
        values: Vec<f64>,
    },
    /// Uniform direction scaled to `norm`.
    RandomSphere {
        norm: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    LinTs,
    GlmTs,
    RloTs,
    Greedy,
    EpsGreedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistName {
    Gaussian,
    UniformBall,
    UniformSphere,
}

impl DistName {
    pub fn kind(self) -> DistKind {
        match self {
            DistName::Gaussian => DistKind::Gaussian,
            DistName::UniformBall => DistKind::UniformBall,
            DistName::UniformSphere => DistKind::UniformSphere,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkName {
    Identity,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    Uniform,
    Bernoulli,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    #[serde(default = "default_dist")]
    pub dist: DistName,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub link: Option<LinkName>,
    #[serde(default)]
    pub penalty: Option<RloPenalty>,
}

fn default_dist() -> DistName {
    DistName::Gaussian
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Count(u32),
    List(Vec<u32>),
}

impl Default for SeedSpec {
    fn default() -> Self {
        SeedSpec::Count(1)
    }
}

impl SeedSpec {
    pub fn indices(&self) -> Vec<u32> {
        match self {
            SeedSpec::Count(n) => (0..*n).collect(),
            SeedSpec::List(v) => v.clone(),
        }
    }
}

/// Grid axes of a sweep; an absent axis keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    #[serde(default)]
    pub dim: Option<Vec<usize>>,
    #[serde(default)]
    pub horizon: Option<Vec<usize>>,
    #[serde(default)]
    pub dist: Option<Vec<DistName>>,
    #[serde(default)]
    pub policy: Option<Vec<PolicyKind>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub dim: usize,
    pub horizon: usize,
    #[serde(default)]
    pub arms: Option<ArmSpec>,
    pub theta_star: ThetaSpec,
    pub policy: PolicyConfig,
    #[serde(default = "default_noise")]
    pub noise: NoiseKind,
    /// Subgaussian noise scale `R`.
    pub r: f64,
    /// Bound `S` on `‖θ*‖`.
    pub s: f64,
    pub lambda: f64,
    pub delta: f64,
    #[serde(default)]
    pub seeds: SeedSpec,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Enforces `λ ≥ 1` so the determinant lemma applies.
    #[serde(default = "default_true")]
    pub check_det_lemma: bool,
    #[serde(default)]
    pub sweep: Option<SweepGrid>,
}

fn default_noise() -> NoiseKind {
    NoiseKind::Gaussian
}

fn default_true() -> bool {
    true
}

/// A base config with a sweep grid.
pub type SweepConfig = ExperimentConfig;

/// One realized lane: environment, policy and confidence parameters.
#[derive(Debug, Clone)]
pub struct Lane {
    pub env: Environment,
    pub policy: PolicySpec,
    pub params: ConfidenceParams,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        // Arm files are resolved relative to the config file.
        if let Some(ArmSpec::File { path: arm_path }) = &mut cfg.arms {
            if arm_path.is_relative() {
                if let Some(dir) = path.parent() {
                    *arm_path = dir.join(&*arm_path);
                }
            }
        }
        Ok(cfg)
    }

    /// `δ′ = δ / (4T)`, with `T` clamped to 1 so empty runs stay defined.
    pub fn delta_prime(&self) -> f64 {
        self.delta / (4.0 * self.horizon.max(1) as f64)
    }

    /// The subgaussian scale used by the confidence radii (`½` for Bernoulli).
    pub fn effective_r(&self) -> f64 {
        match self.noise {
            NoiseKind::Bernoulli => 0.5,
            _ => self.r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(invalid("dim must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta must lie in (0, 1)"));
        }
        if !(self.s > 0.0) {
            return Err(invalid("S must be positive"));
        }
        if !(self.r >= 0.0) {
            return Err(invalid("R must be nonnegative"));
        }
        if !(self.lambda > 0.0) {
            return Err(invalid("lambda must be positive"));
        }
        if self.check_det_lemma && self.lambda < 1.0 {
            return Err(invalid(
                "lambda must be >= 1 while determinant-lemma checks are enabled",
            ));
        }
        if self.noise == NoiseKind::Bernoulli {
            if self.problem != Problem::Glm || self.policy.link != Some(LinkName::Logistic) {
                return Err(invalid(
                    "bernoulli noise needs problem = glm with a logistic link",
                ));
            }
            if self.r != 0.5 {
                return Err(invalid(
                    "bernoulli rewards are 1/2-subgaussian: set r = 0.5",
                ));
            }
        }
        match &self.theta_star {
            ThetaSpec::Explicit { values } => {
                if values.len() != self.dim {
                    return Err(invalid("theta_star has the wrong dimension"));
                }
                let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > self.s {
                    return Err(invalid(format!(
                        "||theta_star|| = {norm} exceeds S = {}",
                        self.s
                    )));
                }
            }
            ThetaSpec::RandomSphere { norm } => {
                if !(*norm >= 0.0) || *norm > self.s {
                    return Err(invalid("theta_star norm must lie in [0, S]"));
                }
            }
        }
        match (self.problem, self.policy.kind) {
            (Problem::Rlo, PolicyKind::RloTs) => {
                self.policy
                    .penalty
                    .ok_or_else(|| invalid("rlo_ts needs a penalty"))?
                    .validate()?;
            }
            (Problem::Rlo, _) | (_, PolicyKind::RloTs) => {
                return Err(invalid("problem = rlo goes with policy rlo_ts only"));
            }
            (Problem::Glm, PolicyKind::GlmTs) => {
                if self.policy.link.is_none() {
                    return Err(invalid("glm_ts needs a link"));
                }
            }
            (_, PolicyKind::GlmTs) => return Err(invalid("glm_ts needs problem = glm")),
            _ => {}
        }
        if self.problem != Problem::Rlo {
            match &self.arms {
                None => return Err(invalid("an arm set is required")),
                Some(ArmSpec::Finite { arms }) => {
                    let set = ArmSet::finite(
                        arms.iter().map(|a| Vector::from_column_slice(a)).collect(),
                    )?;
                    if set.dim() != self.dim {
                        return Err(invalid("arms have the wrong dimension"));
                    }
                }
                Some(ArmSpec::Random { count }) if *count == 0 => {
                    return Err(invalid("random arm count must be positive"))
                }
                _ => {}
            }
        }
        if let Some(eps) = self.policy.eps {
            if !(0.0..=1.0).contains(&eps) {
                return Err(invalid("eps must lie in [0, 1]"));
            }
        }
        if let Some(grid) = &self.sweep {
            let empty = |n: Option<usize>| n == Some(0);
            if empty(grid.dim.as_ref().map(Vec::len))
                || empty(grid.horizon.as_ref().map(Vec::len))
                || empty(grid.dist.as_ref().map(Vec::len))
                || empty(grid.policy.as_ref().map(Vec::len))
            {
                return Err(invalid("sweep grid has an empty axis"));
            }
        }
        if self.seeds.indices().is_empty() {
            return Err(invalid("at least one seed is required"));
        }
        Ok(())
    }

    /// Realizes the lane for `seed`. The instance depends on `(dim, seed)`
    /// only.
    pub fn lane(&self, seed: u32) -> Result<Lane> {
        let d = self.dim;
        let mut inst_rng = lane_rng(self.master_seed, Purpose::Instance, d as u32, seed);
        let theta = match &self.theta_star {
            ThetaSpec::Explicit { values } => Vector::from_column_slice(values),
            ThetaSpec::RandomSphere { norm } => unit_direction(d, &mut inst_rng) * *norm,
        };
        let link = match self.policy.link {
            Some(LinkName::Logistic) => Some(LinkFunction::logistic(2.0 * self.s)?),
            Some(LinkName::Identity) => Some(LinkFunction::identity()),
            None => None,
        };
        let objective = match self.problem {
            Problem::Rlo => Objective::Rlo(
                self.policy
                    .penalty
                    .ok_or_else(|| invalid("missing penalty"))?,
            ),
            Problem::Linear | Problem::Glm => {
                let set = match self
                    .arms
                    .as_ref()
                    .ok_or_else(|| invalid("missing arm set"))?
                {
                    ArmSpec::UnitBall => ArmSet::unit_ball(d)?,
                    ArmSpec::Hypercube => ArmSet::scaled_hypercube(d)?,
                    ArmSpec::Finite { arms } => {
                        ArmSet::finite(arms.iter().map(|a| Vector::from_column_slice(a)).collect())?
                    }
                    ArmSpec::File { path } => ArmSet::from_file(path)?,
                    ArmSpec::Random { count } => ArmSet::finite(
                        (0..*count)
                            .map(|_| unit_direction(d, &mut inst_rng))
                            .collect(),
                    )?,
                };
                if set.dim() != d {
                    return Err(invalid("arm set dimension differs from dim"));
                }
                if self.problem == Problem::Glm {
                    Objective::Glm {
                        set,
                        link: link.ok_or_else(|| invalid("glm needs a link"))?,
                    }
                } else {
                    Objective::Linear(set)
                }
            }
        };
        let noise = match self.noise {
            NoiseKind::Gaussian => NoiseSpec::gaussian(self.r),
            NoiseKind::Uniform => NoiseSpec::uniform(self.r),
            NoiseKind::Bernoulli => NoiseSpec::Bernoulli,
        };
        let env = Environment::new(theta, objective, noise, self.s)?;
        let dist = TsDistribution::new(self.policy.dist.kind(), d)?;
        let policy = match self.policy.kind {
            PolicyKind::LinTs => PolicySpec::LinTs { dist },
            PolicyKind::GlmTs => PolicySpec::GlmTs {
                dist,
                link: link.ok_or_else(|| invalid("glm_ts needs a link"))?,
            },
            PolicyKind::RloTs => PolicySpec::RloTs {
                dist,
                penalty: self
                    .policy
                    .penalty
                    .ok_or_else(|| invalid("missing penalty"))?,
            },
            PolicyKind::Greedy => PolicySpec::Greedy,
            PolicyKind::EpsGreedy => PolicySpec::EpsGreedy {
                eps: self
                    .policy
                    .eps
                    .ok_or_else(|| invalid("eps_greedy needs eps"))?,
            },
        };
        let params = ConfidenceParams::new(
            d,
            self.effective_r(),
            self.s,
            self.lambda,
            self.delta,
            self.horizon.max(1),
        )?;
        Ok(Lane {
            env,
            policy,
            params,
        })
    }

    /// Runs one lane of cell `cell`.
    pub fn run_lane(&self, cell: u32, seed: u32) -> Result<TrajectoryRecord> {
        let lane = self.lane(seed)?;
        let mut rng = lane_rng(self.master_seed, Purpose::Episode, cell, seed);
        run_steps(
            &lane.env,
            &lane.policy,
            &lane.params,
            self.horizon,
            &mut rng,
        )
    }

    /// Runs every seed of this config as cell 0, in parallel.
    pub fn run(&self) -> Result<Vec<(u32, TrajectoryRecord)>> {
        self.run_cell(0)
    }

    pub fn run_cell(&self, cell: u32) -> Result<Vec<(u32, TrajectoryRecord)>> {
        self.seeds
            .indices()
            .into_par_iter()
            .map(|seed| self.run_lane(cell, seed).map(|r| (seed, r)))
            .collect()
    }

    /// Cells of the sweep grid in a fixed order (dim, horizon, dist, policy).
    pub fn sweep_cells(&self) -> Result<Vec<ExperimentConfig>> {
        let grid = self.sweep.clone().unwrap_or_default();
        let dims = grid.dim.unwrap_or_else(|| vec![self.dim]);
        let horizons = grid.horizon.unwrap_or_else(|| vec![self.horizon]);
        let dists = grid.dist.unwrap_or_else(|| vec![self.policy.dist]);
        let policies = grid.policy.unwrap_or_else(|| vec![self.policy.kind]);
        let mut cells = Vec::new();
        for &dim in &dims {
            for &horizon in &horizons {
                for &dist in &dists {
                    for &kind in &policies {
                        let mut c = self.clone();
                        c.sweep = None;
                        c.dim = dim;
                        c.horizon = horizon;
                        c.policy.dist = dist;
                        c.policy.kind = kind;
                        c.validate()?;
                        cells.push(c);
                    }
                }
            }
        }
        if cells.is_empty() {
            return Err(invalid("sweep grid is empty"));
        }
        Ok(cells)
    }

    /// Runs the sweep and aggregates one row per cell. Ledgers are dropped
    /// as soon as each lane is summarized.
    pub fn run_sweep(&self) -> Result<Vec<CellAggregate>> {
        let cells = self.sweep_cells()?;
        let seeds = self.seeds.indices();
        let jobs: Vec<(usize, u32)> = (0..cells.len())
            .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
            .collect();
        let outcomes: Vec<(usize, LaneOutcome)> = jobs
            .into_par_iter()
            .map(|(c, s)| {
                cells[c]
                    .run_lane(c as u32, s)
                    .map(|rec| (c, LaneOutcome::from_record(&rec)))
            })
            .collect::<Result<_>>()?;
        Ok(cells
            .iter()
            .enumerate()
            .map(|(i, cfg)| {
                let lanes: Vec<&LaneOutcome> = outcomes
                    .iter()
                    .filter(|(c, _)| *c == i)
                    .map(|(_, o)| o)
                    .collect();
                CellAggregate::new(i, cfg, &lanes)
            })
            .collect())
    }
}

/// What a sweep keeps from each lane.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneOutcome {
    pub summary: EpisodeSummary,
    pub hat_e_failed: bool,
    pub tilde_e_failed: bool,
    pub joint_failed: bool,
    pub conditional_optimism: (usize, usize),
}

impl LaneOutcome {
    pub fn from_record(rec: &TrajectoryRecord) -> Self {
        let steps = &rec.ledger.steps;
        Self {
            summary: rec.summary.clone(),
            hat_e_failed: steps.iter().any(|s| !s.hat_e()),
            tilde_e_failed: steps.iter().any(|s| !s.tilde_e()),
            joint_failed: steps.iter().any(|s| !s.hat_e() || !s.tilde_e()),
            conditional_optimism: optimism_counts(&rec.ledger, true),
        }
    }
}

/// One row of the sweep CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    pub cell: usize,
    pub dim: usize,
    pub horizon: usize,
    pub dist: DistName,
    pub policy: PolicyKind,
    pub seeds: usize,
    pub mean_cum_regret: f64,
    pub std_cum_regret: f64,
    /// Mean over seeds of the unconditional optimism frequency.
    pub optimism_frequency: Option<f64>,
    /// Pooled over seeds.
    pub conditional_optimism_frequency: Option<f64>,
    pub hat_e_fail_rate: f64,
    pub tilde_e_fail_rate: f64,
    pub joint_fail_rate: f64,
}

impl CellAggregate {
    fn new(cell: usize, cfg: &ExperimentConfig, lanes: &[&LaneOutcome]) -> Self {
        let regrets: Vec<f64> = lanes.iter().map(|l| l.summary.cum_regret).collect();
        let freqs: Vec<f64> = lanes
            .iter()
            .filter_map(|l| l.summary.optimism_frequency)
            .collect();
        let (num, den) = lanes.iter().fold((0, 0), |(n, d), l| {
            (n + l.conditional_optimism.0, d + l.conditional_optimism.1)
        });
        let n = lanes.len() as f64;
        let rate = |f: fn(&LaneOutcome) -> bool| lanes.iter().filter(|l| f(l)).count() as f64 / n;
        Self {
            cell,
            dim: cfg.dim,
            horizon: cfg.horizon,
            dist: cfg.policy.dist,
            policy: cfg.policy.kind,
            seeds: lanes.len(),
            mean_cum_regret: mean(&regrets),
            std_cum_regret: std_dev(&regrets),
            optimism_frequency: (!freqs.is_empty()).then(|| mean(&freqs)),
            conditional_optimism_frequency: (den > 0).then(|| num as f64 / den as f64),
            hat_e_fail_rate: rate(|l| l.hat_e_failed),
            tilde_e_fail_rate: rate(|l| l.tilde_e_failed),
            joint_fail_rate: rate(|l| l.joint_failed),
        }
    }
}

/// Column order of the per-step CSV.
pub const TRAJECTORY_COLUMNS: [&str; 13] = [
    "t",
    "arm_index_or_coords",
    "reward",
    "inst_regret",
    "cum_regret",
    "rts",
    "rrls",
    "optimistic",
    "hatE",
    "tildeE",
    "feat_norm",
    "det_lhs",
    "det_rhs",
];

pub const SWEEP_COLUMNS: [&str; 13] = [
    "cell",
    "dim",
    "horizon",
    "dist",
    "policy",
    "seeds",
    "mean_cum_regret",
    "std_cum_regret",
    "optimism_frequency",
    "conditional_optimism_frequency",
    "hatE_fail_rate",
    "tildeE_fail_rate",
    "joint_fail_rate",
];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// Writes the per-step CSV of one trajectory.
pub fn write_trajectory_csv<W: Write>(rec: &TrajectoryRecord, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{}", TRAJECTORY_COLUMNS.join(","))?;
    for s in &rec.ledger.steps {
        let arm = match s.arm_index {
            Some(i) => i.to_string(),
            None => s
                .arm
                .iter()
                .map(|v| fmt_f64(*v))
                .collect::<Vec<_>>()
                .join(";"),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.t,
            arm,
            fmt_f64(s.reward),
            fmt_f64(s.inst_regret),
            fmt_f64(s.cum_regret),
            fmt_f64(s.rts),
            fmt_f64(s.rrls),
            flag(s.optimistic()),
            flag(s.hat_e()),
            flag(s.tilde_e()),
            fmt_f64(s.feat_norm),
            fmt_f64(s.det_lhs),
            fmt_f64(s.det_mid),
        )?;
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(rows: &[CellAggregate], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{}", SWEEP_COLUMNS.join(","))?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.cell,
            r.dim,
            r.horizon,
            serde_name(&r.dist),
            serde_name(&r.policy),
            r.seeds,
            fmt_f64(r.mean_cum_regret),
            fmt_f64(r.std_cum_regret),
            fmt_opt(r.optimism_frequency),
            fmt_opt(r.conditional_optimism_frequency),
            fmt_f64(r.hat_e_fail_rate),
            fmt_f64(r.tilde_e_fail_rate),
            fmt_f64(r.joint_fail_rate),
        )?;
    }
    Ok(())
}

fn serde_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

/// Per-seed entry of the run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u32,
    pub csv: String,
    pub summary: EpisodeSummary,
    pub warnings: Vec<String>,
}

/// Derived constants recorded alongside a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub delta_prime: f64,
    pub effective_r: f64,
    /// `c_μ = μ′(2S)` for the logistic link.
    pub c_mu: Option<f64>,
    pub det_lemma_rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub manifest: Manifest,
    pub seeds: Vec<SeedSummary>,
    pub mean_cum_regret: f64,
    pub std_cum_regret: f64,
    pub pooled_conditional_optimism: Option<f64>,
    pub hat_e_fail_rate: f64,
    pub tilde_e_fail_rate: f64,
    pub joint_fail_rate: f64,
    pub martingale: Option<MartingaleMonitor>,
}

pub fn trajectory_file_name(seed: u32) -> String {
    format!("trajectory_seed{seed}.csv")
}

impl RunSummary {
    pub fn new(cfg: &ExperimentConfig, records: &[(u32, TrajectoryRecord)]) -> Self {
        let outcomes: Vec<LaneOutcome> = records
            .iter()
            .map(|(_, r)| LaneOutcome::from_record(r))
            .collect();
        let lanes: Vec<&LaneOutcome> = outcomes.iter().collect();
        let agg = CellAggregate::new(0, cfg, &lanes);
        let recs: Vec<TrajectoryRecord> = records.iter().map(|(_, r)| r.clone()).collect();
        let c_mu = match cfg.policy.link {
            Some(LinkName::Logistic) => LinkFunction::logistic(2.0 * cfg.s).ok().map(|l| l.c_mu()),
            Some(LinkName::Identity) => Some(1.0),
            None => None,
        };
        Self {
            config: cfg.clone(),
            manifest: Manifest {
                delta_prime: cfg.delta_prime(),
                effective_r: cfg.effective_r(),
                c_mu,
                det_lemma_rhs: 2.0 * cfg.dim as f64 * (1.0 + cfg.horizon as f64 / cfg.lambda).ln(),
            },
            seeds: records
                .iter()
                .map(|(seed, r)| SeedSummary {
                    seed: *seed,
                    csv: trajectory_file_name(*seed),
                    summary: r.summary.clone(),
                    warnings: r.warnings.clone(),
                })
                .collect(),
            mean_cum_regret: agg.mean_cum_regret,
            std_cum_regret: agg.std_cum_regret,
            pooled_conditional_optimism: agg.conditional_optimism_frequency,
            hat_e_fail_rate: agg.hat_e_fail_rate,
            tilde_e_fail_rate: agg.tilde_e_fail_rate,
            joint_fail_rate: agg.joint_fail_rate,
            martingale: martingale_monitor(&recs, cfg.lambda, cfg.delta).ok(),
        }
    }
}

/// Writes one CSV per seed and `summary.json` into `dir`.
pub fn write_run(
    dir: &Path,
    cfg: &ExperimentConfig,
    records: &[(u32, TrajectoryRecord)],
) -> std::io::Result<RunSummary> {
    std::fs::create_dir_all(dir)?;
    for (seed, rec) in records {
        let file = std::fs::File::create(dir.join(trajectory_file_name(*seed)))?;
        let mut buf = std::io::BufWriter::new(file);
        write_trajectory_csv(rec, &mut buf)?;
        buf.flush()?;
    }
    let summary = RunSummary::new(cfg, records);
    let json = serde_json::to_string_pretty(&summary).map_err(std::io::Error::other)?;
    std::fs::write(dir.join("summary.json"), json + "\n")?;
    Ok(summary)
}

/// Writes `sweep.csv` into `dir`.
pub fn write_sweep(dir: &Path, rows: &[CellAggregate]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut buf = std::io::BufWriter::new(std::fs::File::create(dir.join("sweep.csv"))?);
    write_sweep_csv(rows, &mut buf)?;
    buf.flush()
}
