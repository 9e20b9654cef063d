//! Seed plumbing. A run has one seed; each stochastic stage draws from a stream
//! derived from it by stage name, so adding a stage never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StageRng = ChaCha8Rng;

pub fn rng(seed: u64) -> StageRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the stage called `stage`.
pub fn derive(seed: u64, stage: &str) -> u64 {
    splitmix(seed ^ splitmix(fnv1a(stage.as_bytes())))
}

/// Seed for the `index`-th repetition of a stage (e.g. one per planning step).
pub fn derive_indexed(seed: u64, stage: &str, index: u64) -> u64 {
    splitmix(derive(seed, stage) ^ splitmix(index.wrapping_add(1)))
}
