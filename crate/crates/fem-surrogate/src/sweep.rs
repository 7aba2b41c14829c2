//! Frequency sweeps spread across a rayon pool.
//!
//! Each grid frequency is an independent complex solve against the same
//! immutable assembled system, so rows come back in grid order and match the
//! sequential sweep exactly regardless of thread count.

use std::env;

use fem_surrogate_core::beam::{BeamError, HarmonicSystem, ResponseTable};
use fem_surrogate_core::{BeamSpec, FrequencyGrid, RayleighDamping};
use rayon::prelude::*;

/// Caps the worker count when set to a positive integer.
pub const THREADS_ENV: &str = "FEM_SURROGATE_THREADS";

fn pool() -> Option<rayon::ThreadPool> {
    let threads: usize = env::var(THREADS_ENV)
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .ok()
}

pub fn parallel_frequency_sweep(
    spec: &BeamSpec,
    grid: &FrequencyGrid,
    damping: RayleighDamping,
) -> Result<ResponseTable, BeamError> {
    let system = HarmonicSystem::new(spec, damping)?;
    let run = || -> Vec<_> {
        grid.values()
            .par_iter()
            .map(|&f| (f, system.response_at(f)))
            .collect()
    };
    let results = match pool() {
        Some(p) => p.install(run),
        None => run(),
    };
    HarmonicSystem::collect_rows(results)
}
