//! Counter-based seed derivation.
//!
//! Every random stream in the crate is keyed by a root seed plus a path of
//! integers (purpose, task, objective, restart...). Streams for different paths
//! are independent, so adding a task or an objective never shifts the draws of
//! another one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream purposes. Values are part of the determinism contract: do not renumber.
pub mod purpose {
    pub const RESTART: u64 = 1;
    pub const META_TASK: u64 = 2;
    pub const BENCHMARK_ALPHA: u64 = 3;
    pub const BENCHMARK_EPSILON: u64 = 4;
    pub const META_DATA: u64 = 5;
    pub const MC_BASE: u64 = 6;
    pub const ACQ_INIT: u64 = 7;
    pub const ACQ_DISCRETE: u64 = 8;
    pub const POSTERIOR_SAMPLES: u64 = 9;
    pub const BO_INITIAL: u64 = 10;
    pub const BO_ITERATION: u64 = 11;
    pub const TARGET_FIT: u64 = 12;
    pub const WEIGHT_INIT: u64 = 13;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `root` with each element of `path` into a new 64-bit seed.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    let mut h = splitmix64(root ^ 0x5EED_0F5E_ED00_0001);
    for &p in path {
        h = splitmix64(h ^ splitmix64(p.wrapping_add(0x1234_5678_9ABC_DEF1)));
    }
    h
}

/// A ChaCha8 generator for the stream identified by `root` and `path`.
pub fn rng_for(root: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, path))
}
