//! Seeded, thread-count independent Monte Carlo runs.
//!
//! Run `r` of a campaign with seed `s` draws from ChaCha8 seeded with `s` on
//! stream `r`. Each run owns its stream, so results do not depend on how runs
//! are spread over worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Generator for run `run_id` of the campaign seeded with `seed`.
pub fn run_rng(seed: u64, run_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_id);
    rng
}

/// Evaluates `f(run_id, rng)` for `run_id in 0..runs` on `threads` workers
/// (0 picks the rayon default) and returns the results in run order.
pub fn par_map<T, F>(seed: u64, runs: u64, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
    pool.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|id| {
                let mut rng = run_rng(seed, id);
                f(id, &mut rng)
            })
            .collect()
    })
}
