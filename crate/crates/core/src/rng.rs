//! Seeded random streams. Every stochastic step draws from a stream named by
//! `(seed, purpose, index)` so runs replay exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const WEIGHT_INIT: u64 = 1;
pub const PRETRAIN: u64 = 2;
pub const EPOCH: u64 = 3;
pub const GMM_INIT: u64 = 4;
pub const KMEANS: u64 = 5;
pub const SYNTHETIC: u64 = 6;
pub const NOISE: u64 = 7;
pub const SHUFFLE: u64 = 8;

pub fn stream(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}
