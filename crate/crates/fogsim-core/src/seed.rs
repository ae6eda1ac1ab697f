//! Seed derivation and content hashing.
//!
//! All randomness in the crate flows from named seeds. Sub-seeds are derived
//! with splitmix64 so that independent components (subjects, folds, channels,
//! noise injections) get decorrelated streams from one experiment seed, and
//! the derivation is stable across runs and platforms.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One round of the splitmix64 output function.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a sub-seed from a base seed and a stream tag.
pub fn derive(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream.wrapping_add(0xA076_1D64_78BD_642F)))
}

/// Derive a sub-seed from a base seed and a label such as `"subject/3/emg"`.
pub fn derive_labeled(base: u64, label: &str) -> u64 {
    derive(base, fnv1a64(label.as_bytes()))
}

/// Deterministic RNG for a given seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// FNV-1a 64-bit hash. Used for artifact fingerprints and training-manifest
/// hashes; not a cryptographic hash.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}
