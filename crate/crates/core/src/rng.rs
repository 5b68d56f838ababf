//! Named, seed-derived randomness streams.
//!
//! Every random draw in a run comes from a ChaCha stream whose seed is a
//! stable hash of the run seed, a stream label, and stream-specific keys.
//! Streams never share state, so changing one stage (say, the assignment
//! policy) leaves every other stage's draws untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type StreamRng = ChaCha8Rng;

/// Stream labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Workload = 0x574f_524b,
    Assignment = 0x4153_5347,
    Anneal = 0x414e_4e4c,
    Noise = 0x4e4f_4953,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a seed, a stream label and keys.
pub fn derive_seed(seed: u64, stream: Stream, keys: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ splitmix64(stream as u64));
    for &k in keys {
        h = splitmix64(h ^ k);
    }
    h
}

pub fn stream(seed: u64, stream: Stream, keys: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, stream, keys))
}

/// Standard normal draw keyed by `(task, model, steps)`, independent of strategy.
pub fn task_noise(seed: u64, task_id: u64, model_id: u32, steps: u32) -> f64 {
    let mut rng = stream(
        seed,
        Stream::Noise,
        &[task_id, u64::from(model_id), u64::from(steps)],
    );
    StandardNormal.sample(&mut rng)
}
