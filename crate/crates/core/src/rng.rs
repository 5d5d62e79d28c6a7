//! Deterministic pseudo-random streams for the randomised checks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_SEED: u64 = 0x6732_f10e;

/// Seed from `G2FLOW_SEED` if it parses as an integer, else [`DEFAULT_SEED`].
pub fn seed_from_env() -> u64 {
    std::env::var("G2FLOW_SEED")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_SEED)
}

pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn env_stream() -> ChaCha8Rng {
    stream(seed_from_env())
}
