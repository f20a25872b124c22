//! Keyed random streams.
//!
//! Every random draw in the crate comes from a ChaCha20 stream
//! (`rand_chacha::ChaCha20Rng`) whose 256-bit key is the SHA-256 digest of
//! the master seed (little-endian) followed by each key part, length-prefixed.
//! A stream therefore depends only on *what* it is for, never on the order in
//! which streams are requested, which keeps resumed and parallel runs
//! identical to sequential ones.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// Derives the 32-byte stream key for `(master, parts...)`.
pub fn derive_key(master: u64, parts: &[&[u8]]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"newsdisc/rng/v1");
    hasher.update(master.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    key
}

pub fn keyed_rng(master: u64, parts: &[&[u8]]) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(derive_key(master, parts))
}

/// Hex SHA-256 of arbitrary bytes; used for content hashes in manifests.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
