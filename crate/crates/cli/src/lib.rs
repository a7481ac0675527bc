//! Experiment files, run and sweep drivers, and CSV/SVG reporting for the DANE benchmark.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod plot;

pub use commands::{cmd_plot, cmd_run, cmd_sweep, exit_code, SweepAxis};
pub use config::ExperimentFile;
pub use manifest::Manifest;
pub use plot::{XAxis, YAxis};
