use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream roles used when deriving per-replicate seeds.
pub mod role {
    pub const DATA: u64 = 1;
    pub const CONTAMINATION: u64 = 2;
    pub const HOLDOUT: u64 = 3;
    pub const HOLDOUT_CONTAMINATION: u64 = 4;
}

/// ChaCha stream keyed by `(seed, replicate)` and numbered by `role`.
///
/// Streams for different keys or roles never overlap, and each is a pure
/// function of its three inputs, so draws do not depend on which thread runs
/// a replicate.
pub fn stream_rng(seed: u64, replicate: u64, role: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&replicate.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(role);
    rng
}

/// First word of [`stream_rng`]; a compact seed for one simulation.
pub fn derive_seed(seed: u64, replicate: u64, role: u64) -> u64 {
    stream_rng(seed, replicate, role).next_u64()
}

/// Generator behind every `seed: u64` argument in the simulators.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    stream_rng(seed, 0, 0)
}
