//! Deterministic random streams.
//!
//! Every consumer derives a ChaCha8 key from `(seed, domain)` and selects a
//! stream by index (chain, node, ...). ChaCha is counter-based, so stream
//! `i` is independent of how many other streams were used or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Stream domains. Distinct domains never share a key for the same seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Noise = 1,
    Chains = 2,
    PathKl = 3,
    Target = 4,
    Reversal = 5,
    Evaluation = 6,
    Shifts = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = seed;
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        state = splitmix64(state ^ (domain as u64).rotate_left(17 * i as u32 + 1));
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

pub fn fill_normal(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    for v in out {
        *v = StandardNormal.sample(rng);
    }
}
