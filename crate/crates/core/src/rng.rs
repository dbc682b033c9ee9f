//! Keyed random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream whose key is the
//! tuple `(master seed, domain, a, b)`. Streams for different devices, iterations
//! or replications are therefore independent of the order in which they are
//! consumed, which keeps parallel runs bit-identical to serial ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Separates the purposes a stream can be used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    ClusterParams = 1,
    DeviceSamples = 2,
    Corruption = 3,
    MiniBatch = 4,
    Availability = 5,
    CrossValidation = 6,
    Experiment = 7,
    Split = 8,
    Test = 9,
}

pub fn stream(master: u64, domain: Domain, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Derive a child seed, e.g. for one (cell, replication) of a sweep.
pub fn derive_seed(master: u64, domain: Domain, a: u64, b: u64) -> u64 {
    use rand::RngCore;
    stream(master, domain, a, b).next_u64()
}
