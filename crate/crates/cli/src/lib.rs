//! Library side of the `cavity-bell` command-line tool, split out so the
//! subcommands can be driven from tests without spawning processes.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{cmd_chsh, cmd_collapse, cmd_evolve, cmd_frames, cmd_sample};
pub use config::RunConfig;
pub use error::CliError;
pub use output::Artifacts;
