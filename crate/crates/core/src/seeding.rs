//! Seed derivation. All randomness in a run flows from one top-level seed;
//! each stage draws from its own named sub-seed so that changing one stage's
//! consumption pattern does not shift another stage's stream.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive the sub-seed for a named stage from the top-level seed.
pub fn derive_seed(seed: u64, stage: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(stage.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is at least 8 bytes"))
}

/// Seeded RNG for a named stage.
pub fn stage_rng(seed: u64, stage: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stage))
}
