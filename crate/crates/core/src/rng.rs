//! Deterministic randomness.
//!
//! Every random draw in the engine comes from a ChaCha8 stream seeded through
//! `SeedableRng::seed_from_u64`. ChaCha8 output is specified bit-for-bit, so a
//! seed reproduces the same draws on every platform. Independent stages take
//! sub-streams whose seeds are derived with [`derive_seed`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives a sub-seed from a parent seed and a list of labels: the first eight
/// bytes (little endian) of SHA-256 over the parent seed and the
/// length-prefixed labels.
pub fn derive_seed(seed: u64, labels: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for label in labels {
        hasher.update((label.len() as u64).to_le_bytes());
        hasher.update(label.as_bytes());
    }
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}
