//! Seeded counter-based random streams.
//!
//! A stream is ChaCha keyed by a mixed `(seed, label)` pair, with the
//! ChaCha stream id selecting a sub-stream; streams with distinct labels or
//! ids never overlap.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, label: u64) -> u64 {
    splitmix(seed ^ splitmix(label))
}

pub fn stream(seed: u64, label: u64) -> StreamRng {
    ChaCha12Rng::seed_from_u64(derive_seed(seed, label))
}

/// Sub-stream `id` of the `(seed, label)` stream.
pub fn substream(seed: u64, label: u64, id: u64) -> StreamRng {
    let mut r = stream(seed, label);
    r.set_stream(id);
    r
}
