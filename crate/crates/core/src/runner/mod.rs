//! Experiment configuration, orchestration and result files.

pub mod chart;
pub mod config;
pub mod experiment;
pub mod results;

pub use chart::render_charts;
pub use config::{
    BackendKind, DatasetEntry, Depth, ExperimentConfig, ForestGridConfig, LinearGridConfig, SetFitConfig,
    TechniqueConfig,
};
pub use experiment::{
    evaluate, read_meta, run_experiment, write_atomic, write_outputs, write_report, BackendRecord, FailureRecord,
    RunMeta, RunSummary, AUC_MODE, RESULTS_CSV, RESULTS_MD, RUN_META,
};
pub use results::{FoldLabel, ResultRow, ResultsTable, CSV_HEADER, MEAN_TOLERANCE, METRIC_TITLES};
