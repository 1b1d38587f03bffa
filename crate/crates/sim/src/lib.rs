//! File formats, parallel sweeps and the command-line runner for
//! [`v2v_core`].

pub mod cli;
pub mod config;
pub mod dump;
pub mod output;
pub mod report;
pub mod sweep;

pub use config::{load_scenario, load_with_overrides, save_scenario, ConfigLoadError};
