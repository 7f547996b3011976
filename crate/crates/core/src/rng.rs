//! Seeded random streams and seed mixing.
//!
//! Every random quantity in the crate is drawn from a `Xoshiro256PlusPlus`
//! stream whose 256-bit state is expanded from a 64-bit seed by splitmix64.
//! Derived seeds are produced by [`mix`], a fold of splitmix64 finalizers over
//! the key words, so any (cell, realization) task can be reproduced in
//! isolation.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Rng = Xoshiro256PlusPlus;

pub fn rng(seed: u64) -> Rng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// The splitmix64 output function applied to `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash an ordered list of words into a single seed.
pub fn mix(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x6A09_E667_F3BC_C909, |acc, &w| splitmix64(acc ^ splitmix64(w)))
}

/// Stable 64-bit tag for a short string (FNV-1a).
pub fn tag(s: &str) -> u64 {
    s.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01B3)
    })
}
