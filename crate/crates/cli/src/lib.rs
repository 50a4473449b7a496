//! Library side of the `rsstitch` command-line tool.

pub mod cli;
pub mod commands;
pub mod corrfile;
pub mod pipeline;

pub use cli::Cli;
pub use corrfile::{CorrespondenceFile, ParseError};
pub use pipeline::{build_warp, estimate, Estimate, Mode, RunConfig};
