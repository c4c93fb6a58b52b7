//! Seeded random streams.
//!
//! Every stochastic operation takes a caller-owned generator. Parallel work
//! derives an independent substream from a master seed and a tuple of
//! indices, so results never depend on how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type PrismRng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes a master seed with a path of indices into a single 64-bit seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Generator seeded from `master` alone.
pub fn seeded(master: u64) -> PrismRng {
    PrismRng::seed_from_u64(master)
}

/// Independent generator for the substream identified by `path`.
pub fn substream(master: u64, path: &[u64]) -> PrismRng {
    PrismRng::seed_from_u64(derive_seed(master, path))
}
