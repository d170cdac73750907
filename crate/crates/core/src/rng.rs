//! Counter-based random streams.
//!
//! Every draw is addressed by `(master seed, domain, replicate, cell)`, so cells
//! can be generated in any order, or in parallel, with identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Words of keystream reserved per cell.
const CELL_SHIFT: u32 = 20;

/// Stream domains keep unrelated consumers of one master seed apart.
pub mod domain {
    pub const FIELD: u64 = 1;
    pub const VERIFY: u64 = 2;
    pub const GENERATOR: u64 = 3;
    pub const CALIBRATION: u64 = 4;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent master seed, e.g. for a second ensemble.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

pub fn stream(seed: u64, domain: u64, replicate: u64, cell: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, domain));
    rng.set_stream(replicate);
    rng.set_word_pos((cell as u128) << CELL_SHIFT);
    rng
}

/// Moves an existing replicate stream to the start of `cell`'s block.
pub fn seek(rng: &mut ChaCha8Rng, cell: u64) {
    rng.set_word_pos((cell as u128) << CELL_SHIFT);
}
