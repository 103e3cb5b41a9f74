//! Counter-based random stream derivation.
//!
//! Every resampling iteration draws from its own ChaCha8 stream. The key is
//! expanded from the master seed with `SeedableRng::seed_from_u64`, and the
//! 64-bit stream id is `(purpose << 40) | index`. Iteration `i` therefore sees
//! the same numbers whatever thread runs it and in whatever order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Disjoint stream families, one per resampling procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Permutation = 1,
    HoldoutSplit = 2,
    HoldoutPermutation = 3,
    Bootstrap = 4,
    SparseInit = 5,
    Ica = 6,
    Synth = 7,
}

pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    debug_assert!(index < 1 << 40);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 40) | index);
    rng
}
