//! Per-lane random streams.
//!
//! Every lane gets a ChaCha stream keyed by the master seed and addressed by
//! a 64-bit stream id, so streams never overlap and adding lanes does not
//! shift existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type LaneRng = ChaCha8Rng;

/// Stream purpose, so the instance draw and the episode draw of one lane
/// are independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Instance = 0,
    Episode = 1,
    Check = 2,
}

/// Generator for `(cell, seed)` under `master`.
pub fn lane_rng(master: u64, purpose: Purpose, cell: u32, seed: u32) -> LaneRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master ^ ((purpose as u64) << 62));
    rng.set_stream(((cell as u64) << 32) | seed as u64);
    rng
}
