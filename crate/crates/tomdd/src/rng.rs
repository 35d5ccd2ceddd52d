//! Seed-derived random streams.
//!
//! Every stochastic component draws from its own ChaCha stream derived from
//! `(seed, tag, index)` via SHA-256. Streams are independent by construction,
//! so e.g. generating volumes in any order, or skipping the target loader
//! entirely, never perturbs another component's draws. This is what makes
//! parallel and serial dataset generation byte-identical and training runs
//! reproducible.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// A deterministic stream for `(seed, tag, index)`.
pub fn stream(seed: u64, tag: &str, index: u64) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([0x1f]);
    hasher.update(tag.as_bytes());
    hasher.update([0x1f]);
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}
