//! Deterministic random streams keyed by a base seed and a list of indices.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `keys` into `seed`. Distinct key lists give unrelated seeds.
pub fn stream_seed(seed: u64, keys: &[u64]) -> u64 {
    let mut s = splitmix(seed);
    for &k in keys {
        s = splitmix(s ^ splitmix(k.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    s
}

pub fn stream(seed: u64, keys: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, keys))
}
