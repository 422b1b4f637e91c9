//! Seed derivation and per-stream random generators.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] seeded through
//! [`mix64`], so a stream is identified by its parent seed plus a list of
//! stream labels (repeat index, iteration, horse index, fold index, ...).
//! Streams never depend on thread scheduling.
//!
//! The mixer is the SplitMix64 finalizer applied to
//! `parent ^ (label * 0x9E3779B97F4A7C15) + 0x9E3779B97F4A7C15`.
//! Named streams hash their name with 64-bit FNV-1a first.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Derives a child seed from a parent seed and a stream label.
pub fn mix64(parent: u64, label: u64) -> u64 {
    let mut z = (parent ^ label.wrapping_mul(GOLDEN)).wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a, used to turn stream names into labels.
pub fn label_of(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Folds a path of labels into a single seed.
pub fn derive(parent: u64, path: &[u64]) -> u64 {
    path.iter().fold(parent, |s, &l| mix64(s, l))
}

pub fn named(parent: u64, name: &str) -> u64 {
    mix64(parent, label_of(name))
}

pub fn stream(parent: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive(parent, path))
}
