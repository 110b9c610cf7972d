//! Seed handling.
//!
//! Every random draw in an experiment comes from one base seed. Independent
//! streams are obtained by selecting a ChaCha stream id, so draws for (say)
//! frame 17's coefficients never depend on how many values were pulled for
//! frame 16.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Stream namespaces. The low 48 bits of a stream id carry an index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Basis = 1,
    Coefficients = 2,
    Support = 3,
    SparseValues = 4,
    InitialEstimate = 5,
    Trial = 6,
    Probe = 7,
}

const INDEX_BITS: u32 = 48;

/// A ChaCha20 generator positioned on `(seed, kind, index)`.
pub fn stream_rng(seed: u64, kind: Stream, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((kind as u64) << INDEX_BITS) | (index & ((1 << INDEX_BITS) - 1)));
    rng
}

/// Derive a child seed (e.g. one per Monte Carlo trial) from a base seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
