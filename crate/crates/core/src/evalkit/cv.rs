use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::stratified_folds;
use super::metrics::MetricsReport;
use crate::baselines::{self, grid_search, ParamGrid, Technique, DEFAULT_INNER_K, DEFAULT_THRESHOLD};
use crate::corpus::{BugReport, Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::fewshot::{
    self, EncoderBackend, FewShotConfig, HashEncoder, PretrainedConfig, PretrainedEncoder,
    DEFAULT_HASH_DIMENSION,
};
use crate::textprep::{fit_tfidf, preprocess, transform_tfidf};

/// Something that can be trained on one split and score another.
///
/// Only descriptions of the held-out examples are passed in, so labels of
/// the test fold cannot reach training.
pub trait CvTechnique: Sync {
    fn name(&self) -> String;

    fn fit_score(&self, train: &[BugReport], test: &[&str], seed: u64) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "lowercase")]
pub enum BackendSpec {
    Hash {
        #[serde(default = "default_hash_dimension")]
        dimension: usize,
    },
    Pretrained(PretrainedConfig),
}

fn default_hash_dimension() -> usize {
    DEFAULT_HASH_DIMENSION
}

impl BackendSpec {
    pub fn build(&self) -> Result<Box<dyn EncoderBackend>> {
        Ok(match self {
            BackendSpec::Hash { dimension } => Box::new(HashEncoder::new(*dimension)?),
            BackendSpec::Pretrained(cfg) => Box::new(PretrainedEncoder::load(cfg.clone())?),
        })
    }

    /// Identifier of the untrained backend, known without loading it.
    pub fn identifier(&self) -> String {
        match self {
            BackendSpec::Hash { dimension } => format!("hash-{dimension}"),
            BackendSpec::Pretrained(cfg) => format!("pretrained:{}", cfg.model_id),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TechniqueSpec {
    /// TF-IDF features, inner grid search, then a final fit with the winner.
    Baseline { grid: ParamGrid, inner_k: usize },
    /// Few-shot pipeline; the per-fold seed replaces `config.seed`.
    SetFit { config: FewShotConfig, backend: BackendSpec },
}

impl TechniqueSpec {
    pub fn baseline(technique: Technique) -> Self {
        TechniqueSpec::Baseline {
            grid: ParamGrid::default_for(technique),
            inner_k: DEFAULT_INNER_K,
        }
    }

    pub fn setfit_hash(dimension: usize) -> Self {
        TechniqueSpec::SetFit {
            config: FewShotConfig::hash_defaults(),
            backend: BackendSpec::Hash { dimension },
        }
    }
}

impl CvTechnique for TechniqueSpec {
    fn name(&self) -> String {
        match self {
            TechniqueSpec::Baseline { grid, .. } => grid.technique().to_string(),
            TechniqueSpec::SetFit { .. } => "setfit".to_string(),
        }
    }

    fn fit_score(&self, train: &[BugReport], test: &[&str], seed: u64) -> Result<Vec<f64>> {
        match self {
            TechniqueSpec::Baseline { grid, inner_k } => {
                let train_docs: Vec<Vec<String>> = train.iter().map(|r| preprocess(&r.description)).collect();
                let model = fit_tfidf(&train_docs)?;
                let x: Vec<_> = train_docs.iter().map(|d| transform_tfidf(&model, d)).collect();
                let y: Vec<Label> = train.iter().map(|r| r.label).collect();
                let hp = grid_search(grid.technique(), grid, &x, &y, *inner_k, seed)?;
                let trained = baselines::train(&x, &y, &hp, seed)?;
                let test_x: Vec<_> = test.iter().map(|t| transform_tfidf(&model, &preprocess(t))).collect();
                baselines::score(&trained, &test_x)
            }
            TechniqueSpec::SetFit { config, backend } => {
                let encoder = backend.build()?;
                let cfg = FewShotConfig {
                    seed,
                    ..config.clone()
                };
                let model = fewshot::fewshot_train(train, encoder.as_ref(), &cfg)?;
                fewshot::fewshot_score(&model, test)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            k: 5,
            seed: 0,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub metrics: MetricsReport,
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub folds: Vec<FoldResult>,
    /// Per-metric arithmetic mean over folds.
    pub summary: MetricsReport,
}

/// Stratified k-fold cross-validation. Fold `f` trains with seed `seed + f`;
/// folds run in parallel and are reported in fold order.
pub fn run_cv(dataset: &LabeledDataset, technique: &dyn CvTechnique, opts: &CvOptions) -> Result<CvOutcome> {
    let labels = dataset.labels();
    let folds = stratified_folds(&labels, opts.k, opts.seed)?;
    let results: Vec<FoldResult> = (0..opts.k)
        .into_par_iter()
        .map(|fold| {
            let fold_err = |message: String| Error::Fold { fold, message };
            let train: Vec<BugReport> = folds
                .train_indices(fold)
                .into_iter()
                .map(|i| dataset.reports[i].clone())
                .collect();
            let test_idx = folds.test_indices(fold);
            let positives = train.iter().filter(|r| r.label.is_security()).count();
            if positives == 0 || positives == train.len() {
                return Err(fold_err("training split lost a class entirely".into()));
            }
            let test_texts: Vec<&str> = test_idx
                .iter()
                .map(|&i| dataset.reports[i].description.as_str())
                .collect();
            let truth: Vec<Label> = test_idx.iter().map(|&i| labels[i]).collect();

            let scores = technique
                .fit_score(&train, &test_texts, opts.seed.wrapping_add(fold as u64))
                .map_err(|e| fold_err(e.to_string()))?;
            if scores.len() != truth.len() {
                return Err(fold_err(format!("{} scores for {} test examples", scores.len(), truth.len())));
            }
            let predicted = baselines::predict_labels(&scores, opts.threshold)?;
            let metrics = MetricsReport::from_predictions(&truth, &scores, &predicted)
                .map_err(|e| fold_err(e.to_string()))?;
            Ok(FoldResult {
                fold,
                metrics,
                n_train: train.len(),
                n_test: truth.len(),
            })
        })
        .collect::<Result<_>>()?;

    let per_fold: Vec<MetricsReport> = results.iter().map(|r| r.metrics).collect();
    let summary = MetricsReport::mean(&per_fold).expect("k >= 2 folds");
    Ok(CvOutcome {
        folds: results,
        summary,
    })
}
