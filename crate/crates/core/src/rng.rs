//! Seeded random streams.
//!
//! Every stochastic routine takes either an explicit generator or a `u64`
//! seed. Independent tasks derived from one master seed use
//! [`task_rng`]: a ChaCha12 generator keyed by the master seed and
//! positioned on stream `task_index`. ChaCha is counter based, so the
//! stream a task draws from depends only on `(master_seed, task_index)` and
//! never on scheduling or the number of worker threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

pub fn seeded_rng(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

/// Generator for task `task_index` of a run keyed by `master_seed`.
pub fn task_rng(master_seed: u64, task_index: u64) -> StreamRng {
    let mut rng = StreamRng::seed_from_u64(master_seed);
    rng.set_stream(task_index);
    rng
}

/// The per-task seed reported in outputs: the first 64-bit word of the
/// task's stream. Reseeding [`seeded_rng`] with it reproduces that task.
pub fn derive_seed(master_seed: u64, task_index: u64) -> u64 {
    task_rng(master_seed, task_index).next_u64()
}
