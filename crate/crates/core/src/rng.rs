//! Seed plumbing. Every random draw in the crate comes from a ChaCha8 stream
//! keyed by a `u64`, so results are reproducible across runs and platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer; used to derive independent child seeds.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for a `(parent, stream, index)` triple, e.g. the latents of batch `index`.
pub fn derive(parent: u64, stream: u64, index: u64) -> u64 {
    mix(mix(parent ^ mix(stream)) ^ index)
}

pub(crate) const STREAM_LATENTS: u64 = 0x4c41_5445_4e54; // "LATENT"
pub(crate) const STREAM_EVAL: u64 = 0x4556_414c; // "EVAL"
