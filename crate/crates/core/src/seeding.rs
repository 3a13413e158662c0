//! Seed derivation. Every random decision is drawn from a ChaCha8 stream keyed
//! by the master seed plus a purpose label and, where relevant, a record id, so
//! results never depend on iteration order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn derive_seed(master: u64, parts: &[&str]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    hasher.finalize().into()
}

pub fn derive_rng(master: u64, parts: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_seed(master, parts))
}
