//! Orchestration behind the `medtext` binary: feature pipelines for the
//! five methods, training dispatch, comparison reports, grid search and
//! the command-line front end.

mod cli;
mod grid;
mod pipeline;
mod report;

pub use cli::{run, EXIT_INPUT, EXIT_INVARIANT, EXIT_OK};
pub use grid::{grid_search, GridOutcome, GridPoint, GridResult, GridSpec, SkippedPoint};
pub use pipeline::{train_method, Artifacts, Classifier, MethodTag, Pipeline, PipelineOptions, TrainSettings};
pub use report::{dataset_fingerprint, ComparisonReport, MethodRow};
