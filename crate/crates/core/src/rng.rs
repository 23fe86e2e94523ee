//! Seeding rules.
//!
//! Every run seed is split into independent ChaCha8 streams, one per purpose.
//! A stream is `ChaCha8Rng::seed_from_u64(run_seed)` with its stream id set to
//! the purpose constant below, so drawing from one stream never shifts another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type RunRng = ChaCha8Rng;

/// Network initialization seeds.
pub const STREAM_INIT: u64 = 1;
/// Action noise, warmup actions, mini-batch sampling and target smoothing.
pub const STREAM_TRAIN: u64 = 2;
/// Reset seeds for training episodes.
pub const STREAM_ENV: u64 = 3;
/// Evaluation rollouts.
pub const STREAM_EVAL: u64 = 4;
/// Bias probe rollouts.
pub const STREAM_PROBE: u64 = 5;

pub fn stream(run_seed: u64, stream_id: u64) -> RunRng {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    rng.set_stream(stream_id);
    rng
}

/// A single derived integer seed, e.g. for `Env::reset` or network init.
pub fn derive_seed(run_seed: u64, stream_id: u64) -> u64 {
    stream(run_seed, stream_id).random()
}
