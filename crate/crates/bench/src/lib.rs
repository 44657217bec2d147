//! Fixtures shared by the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tslab::linalg::{DesignState, Vector};
use tslab::samplers::unit_direction;
use tslab::ArmSet;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` arms uniform on the unit sphere in `R^d`.
pub fn random_arms(dim: usize, n: usize, seed: u64) -> ArmSet {
    let mut rng = rng(seed);
    ArmSet::finite((0..n).map(|_| unit_direction(dim, &mut rng)).collect()).expect("valid arms")
}

/// A design state after `t` random unit-norm updates.
pub fn warmed_state(dim: usize, t: usize, seed: u64) -> DesignState {
    let mut rng = rng(seed);
    let mut state = DesignState::new(dim, 1.0).expect("valid state");
    for _ in 0..t {
        let x: Vector = unit_direction(dim, &mut rng);
        state.absorb(&x, 0.5).expect("absorb");
    }
    state
}
