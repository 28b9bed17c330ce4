//! Configuration-driven command surface.

mod commands;
mod config;

pub use commands::{analyze, cmd_classify, quotient, synthesize, verify, Outcome, Provenance, StoredControl, StoredDistributed};
pub use config::{preset_config, tuned_coupling, ControlMode, Overrides, RunConfig, Tolerances, PRESETS};
