//! File formats, evaluation runner, remote grounder client and command line
//! for `navground-core`.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod remote;
pub mod report;
pub mod scene_file;

pub use error::{CliError, ErrorKind};
