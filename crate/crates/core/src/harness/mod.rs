//! Experiment plumbing: random inputs, the worked example, the sweep, CSV and SVG output.

pub mod commands;
pub mod config;
pub mod generate;
pub mod plot;
pub mod sweep;

pub use commands::{cmd_alpha, cmd_example, cmd_pipeline, ExampleOptions, ExampleReport};
pub use generate::{exact_instance, random_lowrank, random_spectral, ExactInstance};
pub use plot::{emit_plot, render_svg};
pub use sweep::{run_sweep, write_csv, ExperimentRecord, SweepConfig, SweepSummary, TauPolicy};
