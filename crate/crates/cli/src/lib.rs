//! Batch pipelines of the `loglab` command-line tool: a JSON experiment
//! config goes in, deterministic CSV/JSON/SVG/FLD1 artifacts come out.

pub mod config;
pub mod plot;
pub mod run;

pub use config::{ExperimentConfig, Overrides};
pub use run::{exit_code, run, Artifacts, Command, VERSION};
