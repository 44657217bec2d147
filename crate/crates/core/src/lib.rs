//! Frequentist Thompson sampling for stochastic linear bandits.
//!
//! The crate contains the randomized linear TS algorithm (and its GLM and
//! regularized-linear-optimization variants) together with the machinery
//! needed to audit it numerically:
//!
//! * [`linalg`]: incrementally maintained design matrix, inverse and inverse root.
//! * [`armsets`]: decision sets with their argmax oracle and support function.
//! * [`samplers`]: perturbation distributions and the special functions behind
//!   their concentration / anti-concentration constants.
//! * [`estimators`]: RLS and GLM estimators and the confidence radii.
//! * [`policies`]: TS, TS-GLM, TS-RLO and greedy baselines.
//! * [`simulator`]: environments, episodes and the regret ledger diagnostics.
//! * [`distcheck`]: Monte Carlo verification of the perturbation constants.
//! * [`experiment`]: config files, seeded sweeps and the CSV / JSON outputs.
//!
//! ```
//! use rand::SeedableRng;
//! use tslab::linalg::Vector;
//! use tslab::simulator::{run_episode, Objective};
//! use tslab::{ArmSet, ConfidenceParams, Environment, NoiseSpec, PolicySpec, TsDistribution};
//!
//! let set = ArmSet::unit_ball(2)?;
//! let theta = Vector::from_vec(vec![0.6, 0.8]);
//! let env = Environment::new(theta, Objective::Linear(set), NoiseSpec::gaussian(0.5), 1.0)?;
//! let policy = PolicySpec::LinTs { dist: TsDistribution::gaussian(2)? };
//! let params = ConfidenceParams::new(2, 0.5, 1.0, 1.0, 0.1, 500)?;
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
//! let record = run_episode(&env, &policy, &params, &mut rng)?;
//! assert_eq!(record.ledger.len(), 500);
//! assert!(record.summary.det_lemma.unwrap().ok);
//! # Ok::<(), tslab::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod armsets;
pub mod distcheck;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod linalg;
pub mod policies;
pub mod rng;
pub mod samplers;
pub mod simulator;
pub mod stats;

pub use armsets::ArmSet;
pub use error::{Error, Result};
pub use estimators::{ConfidenceParams, LinkFunction};
pub use experiment::{ExperimentConfig, SweepConfig};
pub use linalg::DesignState;
pub use policies::{PolicySpec, RloPenalty};
pub use rng::LaneRng;
pub use samplers::{DistKind, TsDistribution};
pub use simulator::{Environment, NoiseSpec, RegretLedger, StepRecord, TrajectoryRecord};
