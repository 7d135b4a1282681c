//! Configuration-driven experiments for the `rotorqc` simulator.
//!
//! A scenario document ([`config::ScenarioConfig`]) names one experiment: a
//! Rabi run, a Cirac-Zoller or Sørensen-Mølmer gate, a readout Monte Carlo, a
//! Ramsey dephasing comparison, or a sweep over any of these. [`runner`] turns
//! it into a [`record::ResultRecord`] and [`output`] writes that atomically.

pub mod config;
pub mod output;
pub mod presets;
pub mod record;
pub mod runner;
pub mod sweep;

use presets::PresetError;
use runner::RunError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const SIMULATION: i32 = 3;
    pub const IO: i32 = 4;
}

/// Exit code for a runner error.
pub fn exit_code(e: &RunError) -> i32 {
    match e {
        RunError::Config(_) => exit::CONFIG,
        RunError::Simulation(_) | RunError::Invariant(_) => exit::SIMULATION,
        RunError::Io(_) => exit::IO,
    }
}

/// Exit code for a config-loading error.
pub fn preset_exit_code(e: &PresetError) -> i32 {
    match e {
        PresetError::Config(_) => exit::CONFIG,
        PresetError::Io(..) => exit::IO,
    }
}
