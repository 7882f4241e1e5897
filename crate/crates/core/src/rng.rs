//! Deterministic random streams.
//!
//! Streams are addressed by a path of integers from a base seed, e.g.
//! `child_seed(child_seed(base, trial), stream)`. Derivation is a pure
//! function of the path, so results do not depend on which worker runs a
//! trial or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every stream in the crate.
pub type StreamRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th child of `parent`.
pub fn child_seed(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ splitmix64(index.wrapping_add(0x6A09_E667_F3BC_C909)))
}

/// Generator for a seed.
pub fn stream(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

/// Generator for the child stream `(parent, index)`.
pub fn child_stream(parent: u64, index: u64) -> StreamRng {
    stream(child_seed(parent, index))
}
