//! Seed derivation for independent random streams.
//!
//! Every random decision in a run draws from a ChaCha12 stream whose 64-bit seed is
//! derived from `(master, purpose, machine, round)` by chained SplitMix64 mixing. The
//! derivation is pure integer arithmetic, so a stream is identical on every platform
//! and does not depend on which thread consumes it.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

/// What a random stream is used for. The discriminant is mixed into the seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    /// Training examples.
    Data = 1,
    /// Held-out examples for population error.
    Holdout = 2,
    /// Permutation that assigns examples to machines.
    Partition = 3,
    /// Per-round subsets in the limited-access modes.
    Subset = 4,
    /// Sample choices of a DANE local solver within one round.
    LocalSteps = 5,
    /// Sample choices of plain or distributed SGD (one stream per machine for the whole run).
    Sgd = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_seed(master: u64, purpose: Purpose, machine: u64, round: u64) -> u64 {
    let mut h = splitmix64(master);
    for word in [purpose as u64, machine, round] {
        h = splitmix64(h ^ word);
    }
    h
}

pub fn stream(master: u64, purpose: Purpose, machine: u64, round: u64) -> StreamRng {
    StreamRng::seed_from_u64(stream_seed(master, purpose, machine, round))
}

pub fn from_seed(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

/// Uniform index in `0..n`, drawn through `u64` so the result is independent of pointer width.
pub fn uniform_index<R: rand::Rng>(rng: &mut R, n: usize) -> usize {
    rng.random_range(0..n as u64) as usize
}
