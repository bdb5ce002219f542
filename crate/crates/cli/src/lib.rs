//! Command-line front end of the `accv` segmentation crate.

pub mod commands;
pub mod config;
pub mod error;
pub mod imaging;

pub use config::{Overrides, RunConfig};
pub use error::CliError;

/// Environment variable holding the worker thread count.
pub const THREADS_VAR: &str = "SEG_THREADS";

/// Sizes the global thread pool from [`THREADS_VAR`] when it is set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        CliError::Config(format!(
            "{THREADS_VAR} must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot start {threads} threads: {e}")))
}
