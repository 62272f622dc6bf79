//! Deterministic fan-out over independent trials.
//!
//! Work is always split by trial index and merged in index order, so results
//! are bit-identical whether the `parallel` feature is enabled or not and
//! for any worker-thread count. Random trials derive their stream from the
//! trial index ([`trial_rng`]), never from execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluate `f` for every index in `0..n`, in parallel when the `parallel`
/// feature is enabled, returning results in index order.
pub fn run_trials<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    #[cfg(feature = "parallel")]
    {
        (0..n as usize)
            .into_par_iter()
            .with_min_len(16)
            .map(|i| f(i as u64))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_trials_seq(n, f)
    }
}

/// Sequential counterpart of [`run_trials`]; the bench suite compares the
/// two on identical workloads.
pub fn run_trials_seq<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    (0..n).map(f).collect()
}

/// Independent random stream for one trial: a single global seed fanned out
/// by stream index, so the trial count and thread count never reshuffle
/// the randomness.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
