//! Worker-count policy shared by the campaign and sweep runners.

use crate::error::{Error, Result};

pub const THREADS_ENV: &str = "CQ_THREADS";

/// Worker count from `CQ_THREADS`, falling back to the available parallelism.
pub fn worker_count() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(raw) => match raw.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got {raw:?}"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)),
    }
}

/// Runs `f` inside a rayon pool with `workers` threads.
pub fn install<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}
