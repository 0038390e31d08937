//! Deterministic derivation of every random stream from a single 64-bit seed.
//!
//! All derivations go through SHA-256 over a domain tag followed by the
//! little-endian encoding of the seed and any indices. Streams are
//! ChaCha20 generators keyed with the resulting digest, so two processes that
//! agree on the master seed reproduce every draw bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// The random stream type used throughout the crate.
pub type Stream = ChaCha20Rng;

/// SHA-256 of `tag || seed || indices...`, all integers little-endian.
pub fn derive_key(tag: &str, seed: u64, indices: &[u64]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((tag.len() as u64).to_le_bytes());
    h.update(tag.as_bytes());
    h.update(seed.to_le_bytes());
    for i in indices {
        h.update(i.to_le_bytes());
    }
    h.finalize().into()
}

/// A fresh 64-bit seed for a sub-job, e.g. one sweep point of an experiment.
pub fn derive_seed(tag: &str, seed: u64, indices: &[u64]) -> u64 {
    let key = derive_key(tag, seed, indices);
    u64::from_le_bytes(key[..8].try_into().expect("8 bytes"))
}

/// A ChaCha20 stream keyed by `derive_key(tag, seed, indices)`.
pub fn stream(tag: &str, seed: u64, indices: &[u64]) -> Stream {
    ChaCha20Rng::from_seed(derive_key(tag, seed, indices))
}

/// The per-client stream for `client` in round `round`.
pub fn client_stream(master_seed: u64, round: u64, client: u64) -> Stream {
    stream("ddgauss/client", master_seed, &[round, client])
}
