//! Seeded randomness shared by every training routine.
//!
//! All generators are ChaCha8 so streams are identical across platforms and
//! releases of `rand`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent sub-seed from a base seed and a path of stream ids.
pub fn derive(seed: u64, stream: &[u64]) -> u64 {
    let mut state = splitmix(seed ^ 0x6d65_6474_6578_7400);
    for &s in stream {
        state = splitmix(state ^ splitmix(s.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    state
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over a token sequence; used to key per-sentence streams.
pub fn hash_tokens<S: AsRef<str>>(tokens: &[S]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for t in tokens {
        for b in t.as_ref().bytes().chain(std::iter::once(0xff)) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}
