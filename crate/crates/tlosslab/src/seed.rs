//! Deterministic derivation of independent RNG streams.
//!
//! Every randomized component owns a ChaCha stream seeded through
//! [`mix`], so sub-streams (per sample, per sweep cell, per noise pass)
//! are stable under reordering and parallel execution.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; decorrelates consecutive seeds.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `parts` into one well-mixed seed.
pub fn mix(parts: &[u64]) -> u64 {
    let mut acc = 0x243F_6A88_85A3_08D3; // pi fraction, arbitrary non-zero start
    for &p in parts {
        acc = splitmix(acc ^ p);
    }
    acc
}

/// Deterministic RNG for the stream identified by `parts`.
pub fn stream(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(parts))
}

/// Stable tag for labeling streams (e.g. "train", "test").
pub fn tag(name: &str) -> u64 {
    let mut acc = 0xcbf2_9ce4_8422_2325; // FNV-1a
    for b in name.bytes() {
        acc ^= b as u64;
        acc = acc.wrapping_mul(0x1000_0000_01b3);
    }
    acc
}
