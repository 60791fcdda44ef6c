//! Security bug report classification: text preparation, classical
//! baselines, a contrastive few-shot pipeline, and the evaluation harness
//! that compares them.

pub mod baselines;
pub mod corpus;
pub mod error;
pub mod evalkit;
pub mod fewshot;
pub mod runner;
pub mod textprep;

pub use baselines::{grid_search, Hyperparams, ParamGrid, Technique, TrainedModel};
pub use corpus::{load_dataset, BugReport, DataFormat, DatasetStats, Label, LabeledDataset};
pub use error::{Error, Result};
pub use evalkit::{run_cv, CvOptions, CvOutcome, MetricsReport, TechniqueSpec};
pub use fewshot::{EncoderBackend, FewShotConfig, HashEncoder, PretrainedConfig, PretrainedEncoder};
pub use runner::{ExperimentConfig, ResultsTable};
pub use textprep::{clean_text, preprocess, SparseVector, TfidfModel};
