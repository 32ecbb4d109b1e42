//! Keyed random streams.
//!
//! Every random quantity is addressed by a key path such as
//! `(master_seed, replication, purpose)` or `(master_seed, replication, j, k)`.
//! Keys are folded with the SplitMix64 finalizer:
//!
//! ```text
//! h0     = mix(seed ^ 0x9E3779B97F4A7C15)
//! h(i+1) = mix(h(i) ^ mix(key(i) + (i + 1) * 0x9E3779B97F4A7C15))
//! ```
//!
//! Because nothing is drawn sequentially from a shared generator, results do
//! not depend on the order in which replications or matrix cells are
//! evaluated, or on how many workers evaluate them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a key path into a 64-bit stream identifier.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    let mut h = mix64(seed ^ GOLDEN);
    for (i, &key) in path.iter().enumerate() {
        let salt = (i as u64 + 1).wrapping_mul(GOLDEN);
        h = mix64(h ^ mix64(key.wrapping_add(salt)));
    }
    h
}

/// Maps 64 random bits to `[0, 1)` using the top 53 bits.
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// What a replication-level stream is used for. Distinct purposes never share
/// a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Data = 1,
    Split = 2,
    Coefficients = 3,
    Regions = 4,
    TieBreak = 5,
}

/// Deterministic generator for one (replication, purpose) pair.
pub fn substream(master_seed: u64, replication: u64, purpose: Purpose) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master_seed, &[replication, purpose as u64]))
}

/// Tie-breaking uniforms for the conformal p-values of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TieBreakStream {
    master_seed: u64,
    replication: u64,
    salt: u64,
    shared_across_conditions: bool,
}

impl TieBreakStream {
    pub fn new(master_seed: u64, replication: u64) -> Self {
        Self {
            master_seed,
            replication,
            salt: 0,
            shared_across_conditions: false,
        }
    }

    /// Independent stream for an auxiliary procedure run on the same
    /// replication, e.g. one branch of a baseline.
    pub fn salted(mut self, salt: u64) -> Self {
        self.salt = salt;
        self
    }

    /// One uniform per test sample, reused for every condition.
    pub fn shared(mut self, shared: bool) -> Self {
        self.shared_across_conditions = shared;
        self
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn replication(&self) -> u64 {
        self.replication
    }

    /// Uniform in `[0, 1)` for test sample `j` and condition `k`.
    pub fn u(&self, j: usize, k: usize) -> f64 {
        let k = if self.shared_across_conditions { 0 } else { k as u64 + 1 };
        unit_f64(derive(
            self.master_seed,
            &[self.replication, Purpose::TieBreak as u64, self.salt, j as u64, k],
        ))
    }
}
