//! Configuration files, parameter sweeps and CSV output around the
//! `a2p-core` simulator. The `a2p-sim` binary is a thin clap front end over
//! this library.

use std::path::PathBuf;

pub mod config;
pub mod output;
pub mod sweep;

pub use config::RunConfig;
pub use output::{read_summary, SummaryRow};
pub use sweep::{run_one, run_sweep, run_sweep_to_dir, RunRecord, SweepSpec};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {msg}")]
    Value { key: String, msg: String },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error(transparent)]
    Sim(#[from] a2p_core::ConfigError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("summary line {line}: {msg}")]
    Format { line: u64, msg: String },
}
