//! Scenario files, CSV/JSON output, parameter sweeps and the bundled
//! figure suite for the `soliton` command.

pub mod error;
pub mod run;
pub mod scenario;
pub mod suite;
pub mod sweep;

pub use error::{CliError, CliResult};
pub use run::{execute, RunOutput, Summary};
pub use scenario::Scenario;
