//! Command-line front end for the `arsvd-core` library.
//!
//! Every command reads and writes tab-separated text, records a JSON manifest
//! of what it did in its output directory, and maps failures to exit codes:
//! 2 for usage errors, 3 for bad input data and 4 for numerical failures.

pub mod args;
pub mod commands;
pub mod error;
pub mod io;
pub mod manifest;

pub use args::Cli;
pub use commands::{run, run_from};
pub use error::{CliError, CliResult};
pub use manifest::{RunManifest, MANIFEST_NAME};
