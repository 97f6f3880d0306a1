//! Config-driven runner for the Picard operator experiments.

pub mod config;
pub mod error;
pub mod output;
pub mod scenarios;

use std::path::{Path, PathBuf};

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use output::Outcome;
pub use scenarios::{run, SCENARIOS};

/// `--out` wins over `OUTPUT_DIR`, which wins over the config's `output_dir`.
pub fn resolve_output_dir(cli: Option<&Path>, env: Option<&str>, cfg: &ExperimentConfig) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| env.filter(|s| !s.is_empty()).map(PathBuf::from))
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Parses `a,b,c`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|e| HarnessError::Config(format!("bad seed `{s}`: {e}")))
        })
        .collect()
}
