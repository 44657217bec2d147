//! Monte Carlo verification of the perturbation constants.
//!
//! Two clauses are checked per distribution and dimension:
//!
//! * anti-concentration: `P(uᵀη ≥ 1)` against the claimed level `p`, for a
//!   handful of random unit directions `u`;
//! * concentration: the fraction of draws inside the radius
//!   `√(c·d·log(c′d/δ))` against `1 − δ`.
//!
//! Every decision uses a 99% Wilson interval, and each cell gets its own
//! generator derived from the master seed by cell index.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::Vector;
use crate::rng::{lane_rng, Purpose};
use crate::samplers::{unit_direction, DistKind, TsDistribution};
use crate::stats::Wilson;

pub const MIN_SAMPLES: usize = 1000;
pub const UNIT_TOL: f64 = 1e-9;
/// Number of Wilson half-widths of slack on the anti-concentration clause.
pub const ANTI_SLACK_HALF_WIDTHS: f64 = 3.0;

/// Estimate of `P(uᵀη ≥ 1)` with its 99% Wilson interval.
pub fn mc_anticoncentration<R: Rng + ?Sized>(
    dist: &TsDistribution,
    u: &Vector,
    n: usize,
    rng: &mut R,
) -> Result<Wilson> {
    if u.len() != dist.dim {
        return Err(invalid("direction has the wrong dimension"));
    }
    if (u.norm() - 1.0).abs() > UNIT_TOL {
        return Err(invalid(format!(
            "direction must be a unit vector, norm = {}",
            u.norm()
        )));
    }
    if n < MIN_SAMPLES {
        return Err(invalid(format!("need at least {MIN_SAMPLES} samples")));
    }
    let hits = (0..n).filter(|_| u.dot(&dist.sample(rng)) >= 1.0).count();
    Ok(Wilson::ninety_nine(hits, n))
}

/// Fraction of draws with `‖η‖` inside the concentration radius for `delta`.
pub fn mc_concentration<R: Rng + ?Sized>(
    dist: &TsDistribution,
    delta: f64,
    n: usize,
    rng: &mut R,
) -> Result<f64> {
    if n < MIN_SAMPLES {
        return Err(invalid(format!("need at least {MIN_SAMPLES} samples")));
    }
    let radius = dist.concentration_radius(delta)?;
    let inside = (0..n).filter(|_| dist.sample(rng).norm() <= radius).count();
    Ok(inside as f64 / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    AntiConcentration,
    Concentration,
}

/// One line of the JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub cell_id: String,
    pub clause: Clause,
    pub estimate: f64,
    pub interval: [f64; 2],
    /// Claimed level (`p`, or `1 − δ`); `null` where nothing is claimed.
    pub bound: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Def1Report {
    pub entries: Vec<ReportEntry>,
}

impl Def1Report {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn clause_passes(&self, clause: Clause) -> bool {
        self.entries
            .iter()
            .filter(|e| e.clause == clause)
            .all(|e| e.pass)
    }
}

/// Settings of a verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub samples: usize,
    pub directions: usize,
    pub deltas: Vec<f64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            samples: 100_000,
            directions: 5,
            deltas: vec![0.1, 0.01],
        }
    }
}

/// Checks both clauses for one distribution.
///
/// The anti-concentration clause passes when the estimate exceeds the
/// claimed `p` minus three Wilson half-widths. Without a claimed `p` it
/// passes when the interval excludes 0, and the estimate is reported as the
/// empirical level.
pub fn verify_def1<R: Rng + ?Sized>(
    dist: &TsDistribution,
    opts: &VerifyOptions,
    rng: &mut R,
) -> Result<Def1Report> {
    let cell = format!("{}/d={}", dist.name(), dist.dim);
    let claimed_p = dist.constants().p;
    let mut entries = Vec::new();
    for k in 0..opts.directions {
        let u = unit_direction(dist.dim, rng);
        let w = mc_anticoncentration(dist, &u, opts.samples, rng)?;
        let pass = match claimed_p {
            Some(p) => w.estimate >= p - ANTI_SLACK_HALF_WIDTHS * w.half_width(),
            None => w.lo > 0.0,
        };
        entries.push(ReportEntry {
            cell_id: format!("{cell}/u{k}"),
            clause: Clause::AntiConcentration,
            estimate: w.estimate,
            interval: [w.lo, w.hi],
            bound: claimed_p,
            pass,
        });
    }
    for &delta in &opts.deltas {
        let radius = dist.concentration_radius(delta)?;
        let inside = (0..opts.samples)
            .filter(|_| dist.sample(rng).norm() <= radius)
            .count();
        let w = Wilson::ninety_nine(inside, opts.samples);
        entries.push(ReportEntry {
            cell_id: format!("{cell}/delta={delta}"),
            clause: Clause::Concentration,
            estimate: w.estimate,
            interval: [w.lo, w.hi],
            bound: Some(1.0 - delta),
            pass: w.estimate >= 1.0 - delta,
        });
    }
    Ok(Def1Report { entries })
}

/// Runs [`verify_def1`] over a grid of `(kind, d)` cells in parallel. Cell
/// `i` uses stream `i` of `master_seed`, so results do not depend on the
/// thread count.
pub fn verify_grid(
    kinds: &[DistKind],
    dims: &[usize],
    opts: &VerifyOptions,
    master_seed: u64,
) -> Result<Def1Report> {
    let cells: Vec<(usize, TsDistribution)> = kinds
        .iter()
        .flat_map(|k| dims.iter().map(move |&d| (k.clone(), d)))
        .enumerate()
        .map(|(i, (k, d))| {
            let kind = match k {
                DistKind::Constant(v) if v.len() != d => DistKind::Constant(vec![0.0; d]),
                other => other,
            };
            TsDistribution::new(kind, d).map(|dist| (i, dist))
        })
        .collect::<Result<_>>()?;
    let reports = cells
        .par_iter()
        .map(|(i, dist)| {
            let mut rng = lane_rng(master_seed, Purpose::Check, *i as u32, 0);
            verify_def1(dist, opts, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Def1Report {
        entries: reports.into_iter().flat_map(|r| r.entries).collect(),
    })
}
