//! Portable per-task random streams.
//!
//! Every (master seed, scenario, chain) triple maps to its own ChaCha8
//! stream through SHA-256, so adding scenarios or chains never perturbs
//! existing ones and results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn stream_seed(master: u64, scenario: u64, chain: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"spatial-nmix/stream");
    h.update(master.to_le_bytes());
    h.update(scenario.to_le_bytes());
    h.update(chain.to_le_bytes());
    h.finalize().into()
}

pub fn stream_rng(master: u64, scenario: u64, chain: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(stream_seed(master, scenario, chain))
}

/// A labelled sub-stream for non-chain randomness (data generation, scenario draws).
pub fn named_rng(master: u64, label: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(b"spatial-nmix/named");
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}
