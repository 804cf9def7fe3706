//! Scripted experiments: configuration, drivers and CSV result tables.

pub mod config;
mod drivers;
pub mod table;

pub use config::{Experiment, ExperimentConfig, Overrides};
pub use drivers::{
    config_from_metadata, pulse_schedule, rerun_from_metadata, run, run_coupling_sweep, run_noise_sweep,
    run_pulse_gate, run_splittings, J_WINDOW_CAP, RESONANT_FLAG,
};
pub use table::{Cell, Column, ResultTable};
