//! Named random substreams derived from a single run seed.
//!
//! Each consumer draws from its own ChaCha8 generator seeded with
//! `splitmix64(seed ^ fnv1a64(name))`, so adding draws in one consumer never
//! shifts the sequence seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Substream {
    Mobility,
    Fading,
    Arrivals,
    ZoneSeed,
}

impl Substream {
    pub const ALL: [Substream; 4] = [
        Substream::Mobility,
        Substream::Fading,
        Substream::Arrivals,
        Substream::ZoneSeed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Substream::Mobility => "mobility",
            Substream::Fading => "fading",
            Substream::Arrivals => "arrivals",
            Substream::ZoneSeed => "zone-seed-pick",
        }
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of substream `stream` for run seed `seed`.
pub fn substream_seed(seed: u64, stream: Substream) -> u64 {
    splitmix64(seed ^ fnv1a64(stream.name().as_bytes()))
}

pub fn substream_rng(seed: u64, stream: Substream) -> StreamRng {
    StreamRng::seed_from_u64(substream_seed(seed, stream))
}
