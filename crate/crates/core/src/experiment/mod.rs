//! Simulation studies, benchmarks and their file formats.

pub mod bench;
pub mod design;
pub mod io;
pub mod scatter;
pub mod simulate;

use rayon::prelude::*;

/// Environment variable capping the worker pool; `0` runs jobs serially.
pub const THREADS_ENV: &str = "LOO_GP_THREADS";

fn configured_threads() -> Option<usize> {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok())
}

/// Runs `job(0..count)` on the worker pool and returns results in index order.
pub fn map_jobs<T, F>(count: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match configured_threads() {
        Some(0) => (0..count).map(job).collect(),
        threads => {
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(t) = threads {
                builder = builder.num_threads(t);
            }
            match builder.build() {
                Ok(pool) => pool.install(|| (0..count).into_par_iter().map(&job).collect()),
                Err(_) => (0..count).map(job).collect(),
            }
        }
    }
}
