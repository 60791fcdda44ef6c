//! Measurement: stratified folds, the five reported metrics, and the
//! cross-validation loop that produces per-fold and averaged results.

mod cv;
mod folds;
mod metrics;

pub use cv::{run_cv, BackendSpec, CvOptions, CvOutcome, CvTechnique, FoldResult, TechniqueSpec};
pub use folds::{stratified_folds, FoldAssignment};
pub use metrics::{confusion, mcc, precision_recall_f, roc_auc, roc_curve, ConfusionMatrix, MetricsReport};
