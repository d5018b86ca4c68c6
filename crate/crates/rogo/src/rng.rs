//! Deterministic named RNG substreams.
//!
//! Every source of randomness in a run is derived from one master seed plus a
//! stream name and optional indices (task, epoch, round, ...). Streams are
//! independent of each other, so e.g. consuming probe batches never perturbs
//! the batch-order stream.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over the master seed, the stream name and the indices.
fn fold_seed(master: u64, name: &str, indices: &[u64]) -> u64 {
    const OFFSET: u64 = 0xcbf29ce484222325;
    const PRIME: u64 = 0x100000001b3;
    let mut h = OFFSET;
    let mut eat = |byte: u8| {
        h ^= u64::from(byte);
        h = h.wrapping_mul(PRIME);
    };
    for b in master.to_le_bytes() {
        eat(b);
    }
    for b in name.as_bytes() {
        eat(*b);
    }
    for idx in indices {
        for b in idx.to_le_bytes() {
            eat(b);
        }
    }
    h
}

/// A reproducible stream identified by `(master, name, indices)`.
pub fn substream(master: u64, name: &str, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(fold_seed(master, name, indices))
}
