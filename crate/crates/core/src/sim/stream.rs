//! Counter-based random streams.
//!
//! Every draw is addressed by (seed, replicate, domain, subject, gene): the
//! first three form the ChaCha key and the last two the stream id. Any draw
//! can be regenerated without replaying earlier ones, so output does not
//! depend on thread scheduling or on how many replicates were requested.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub(crate) enum Domain {
    Exposure = 1,
    Coefficients = 2,
    Cells = 3,
    Noise = 4,
}

pub(crate) fn stream(seed: u64, replicate: u64, domain: Domain, subject: u32, gene: u32) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&replicate.to_le_bytes());
    key[16..24].copy_from_slice(&(domain as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream((u64::from(subject) << 32) | u64::from(gene));
    rng
}
