//! Seed derivation and RNG construction.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a `u64`.
//! Child seeds are a SHA-256 digest of `(master, label, index)` so that
//! parallel trials get independent, reproducible streams regardless of
//! scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stable child seed for `(master, label, index)`.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn child_rng(master: u64, label: &str, index: u64) -> Rng {
    rng(derive_seed(master, label, index))
}
