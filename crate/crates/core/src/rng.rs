//! Reproducible random streams.
//!
//! Every random draw in the crate comes from a ChaCha12 generator keyed by a
//! 64-bit master seed. A stream is addressed by `(seed, domain, index)`: the
//! domain constant separates unrelated consumers (row network, noise, ...) and
//! the index selects a per-node, per-slice or per-replicate sub-stream via the
//! ChaCha stream counter. Streams never overlap, so work can be spread across
//! threads without changing the numbers drawn.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

pub mod domain {
    pub const ROW_NETWORK: u64 = 0x01;
    pub const COL_NETWORK: u64 = 0x02;
    pub const ROW_LABELS: u64 = 0x03;
    pub const COL_LABELS: u64 = 0x04;
    pub const ROW_COVARIATES: u64 = 0x05;
    pub const COL_COVARIATES: u64 = 0x06;
    pub const NOISE: u64 = 0x07;
    pub const SBM_BLOCKS: u64 = 0x08;
    pub const SBM_EDGES: u64 = 0x09;
    pub const POWERLAW: u64 = 0x0a;
    pub const KMEANS: u64 = 0x0b;
    pub const FIT_RESTART: u64 = 0x0c;
    pub const REPLICATE: u64 = 0x0d;
    pub const GRID_CELL: u64 = 0x0e;
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for `(domain, index)` under `seed`.
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    mix64(mix64(seed ^ mix64(domain)) ^ index)
}

/// Generator for sub-stream `index` of `domain` under `seed`.
pub fn stream(seed: u64, domain: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha12Rng::seed_from_u64(mix64(seed ^ mix64(domain)));
    rng.set_stream(index);
    rng
}
