//! Counter-based random streams.
//!
//! Every frame draws from its own ChaCha stream keyed by the master seed and a
//! small coordinate tuple, so results never depend on how frames are split
//! across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. Distinct domains never share a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Frame = 1,
    VirtualNoise = 2,
    Collect = 3,
}

/// Stream for `(master_seed, domain, major, minor)`.
pub fn stream(master_seed: u64, domain: Domain, major: u64, minor: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    key[16..24].copy_from_slice(&major.to_le_bytes());
    key[24..].copy_from_slice(&minor.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
