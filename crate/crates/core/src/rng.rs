//! Deterministic random streams.
//!
//! Every random stream in the crate is a ChaCha8 generator seeded from a
//! 64-bit stream seed, and stream seeds are derived from a master seed by a
//! pure function of `(master_seed, index, purpose tag)`:
//!
//! ```text
//! h0 = splitmix64(master_seed ^ 0x5155_4143_4b53_5552)
//! h1 = splitmix64(h0 ^ index)
//! h2 = splitmix64(h1 ^ fnv1a64(tag))
//! stream seed = h2
//! ```
//!
//! where `splitmix64` is the standard SplitMix64 output function and
//! `fnv1a64` the 64-bit FNV-1a hash of the tag bytes. The generator is then
//! `ChaCha8Rng::seed_from_u64(stream_seed)`. Because the derivation is pure,
//! replications can run on any thread in any order and still consume the
//! same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for all simulation streams.
pub type StreamRng = ChaCha8Rng;

/// Purpose tag for per-replication subject data.
pub const TAG_REPLICATION: &str = "replication";
/// Purpose tag for Monte Carlo null distributions of the pivot construction.
pub const TAG_PIVOT: &str = "mw-pivot";
/// Purpose tag for the per-study seeds of a sweep.
pub const TAG_SWEEP: &str = "sweep";
/// Purpose tag for synthetic dataset generation.
pub const TAG_DATASET: &str = "dataset";

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Stream seed for `(master_seed, index, tag)`.
pub fn derive_seed(master_seed: u64, index: u64, tag: &str) -> u64 {
    let h0 = splitmix64(master_seed ^ 0x5155_4143_4b53_5552);
    let h1 = splitmix64(h0 ^ index);
    splitmix64(h1 ^ fnv1a64(tag.as_bytes()))
}

/// Generator for `(master_seed, index, tag)`.
pub fn stream(master_seed: u64, index: u64, tag: &str) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master_seed, index, tag))
}
