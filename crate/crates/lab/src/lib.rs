//! Config-driven experiments on top of [`regnoise`]: one named experiment
//! per acceptance criterion, reproducible run directories keyed by a digest
//! of all numeric outputs, and plot-ready tables.

mod catalog;
mod config;
mod error;
mod experiments;
mod outcome;
mod plot;
mod run;

pub use catalog::{default_config, find, list_experiments, CatalogEntry};
pub use config::{ExperimentConfig, ExperimentSection, PARAMETER_KEYS};
pub use error::{LabError, LabResult};
pub use experiments::{enumerate_p_variation, FLOW_TOLERANCE};
pub use outcome::{Outcome, Point};
pub use plot::{emit_plot_data, PlotKind};
pub use run::{output_root, run_digest, run_experiment, run_experiment_in, validate, FileRecord, Manifest, RunSummary, OUTPUT_ROOT_ENV};
