//! Seeded random substreams. Every consumer derives its generator from
//! (root seed, domain, index) so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub(crate) mod domain {
    pub const SPLIT: u64 = 1;
    pub const TREE: u64 = 2;
    pub const FOLDS: u64 = 3;
    pub const SEARCH: u64 = 4;
    pub const GENERATOR: u64 = 5;
    pub const CART: u64 = 6;
}

/// Independent generator for `(seed, domain, index)`.
pub fn substream(seed: u64, domain: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}
