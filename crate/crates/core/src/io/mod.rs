//! Scenario files, result files and the run pipeline behind the CLI.

pub mod config;
pub mod output;
pub mod plot;
pub mod run;

pub use config::{BodySpec, EnsembleSpec, Mode, NumericsSpec, OutputSpec, PhysicsSpec, RegionSpec, Scenario, TableFormat};
pub use output::{fmt17, to_json_string, write_csv, write_json};
pub use plot::{emit_plot_data, Axis, FieldSamples, PlotSource, PlotSpec};
pub use run::{run_scenario, run_scenario_file, Overrides, RunSummary, Stage};
