//! holobeam-cli: experiment harness around `holobeam-core`.
//!
//! Three entry points, mirrored by the `holobeam` binary:
//!
//! * [`harness::run_experiment`] — a resumable sweep (results.csv plus one
//!   report JSON per solved scheme and point);
//! * [`harness::run_single_eu_study`] — near-field focusing artifacts for a
//!   single receiver (pattern maps, exact-versus-paraxial harvest, focus
//!   scans);
//! * [`harness::emit_current_maps`] — per-stream aperture amplitude/phase
//!   maps recovered from a saved report.

pub mod config;
pub mod error;
pub mod harness;

pub use config::{load_config, validate, ExperimentConfig, Profile, SchemeId};
pub use error::{Error, Result};
pub use harness::{
    emit_current_maps, resolve, run_experiment, run_single_eu_study, CliOverrides, ResolvedRun,
};
