//! Named, seed-keyed random streams.
//!
//! Every consumer (a robot's motion, a robot's decisions, the layout
//! generator, ...) draws from its own ChaCha stream whose key is a hash of
//! the master seed and the consumer name, so a replay is exact no matter in
//! which order consumers happen to be scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStreams {
    master_seed: u64,
}

impl RngStreams {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream(&self, name: &str) -> StreamRng {
        StreamRng::from_seed(key(self.master_seed, name))
    }

    pub fn robot_motion(&self, robot: u32) -> StreamRng {
        self.stream(&format!("robot/{robot}/motion"))
    }

    pub fn robot_decision(&self, robot: u32) -> StreamRng {
        self.stream(&format!("robot/{robot}/decision"))
    }

    pub fn layout(&self) -> StreamRng {
        self.stream("layout")
    }

    pub fn policy(&self) -> StreamRng {
        self.stream("policy")
    }
}

fn key(master_seed: u64, name: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update(name.as_bytes());
    h.finalize().into()
}

/// Derives a child seed from a parent seed and a label; used by seed ledgers.
pub fn derive_seed(parent: u64, label: &str) -> u64 {
    let k = key(parent, label);
    u64::from_le_bytes(k[..8].try_into().expect("8-byte prefix"))
}
