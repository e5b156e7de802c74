//! Seed derivation. Every random stream in the crate is keyed by position
//! (base seed, item index, purpose), never by scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags for derived streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    ChannelNoise = 1,
    Drift = 2,
    TimerJitter = 3,
    NoiseCapture = 4,
    MonteCarlo = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent 64-bit seed for `(base, index, stream)`.
pub fn derive_seed(base: u64, index: u64, stream: Stream) -> u64 {
    splitmix64(
        splitmix64(base ^ splitmix64(index)) ^ (stream as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93),
    )
}

pub fn rng_for(base: u64, index: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, index, stream))
}
