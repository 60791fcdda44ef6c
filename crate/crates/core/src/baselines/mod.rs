//! Classical TF-IDF classifiers: logistic regression, linear SVM, random
//! forest, plus inner-CV grid search.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::evalkit::{roc_auc, stratified_folds};
use crate::textprep::SparseVector;

pub mod forest;
pub mod linear;

pub use forest::{fit_forest, ForestParams, RandomForest};
pub use linear::{fit_hinge, fit_logistic, LinearModel, SolveSummary};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_C_GRID: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];
pub const DEFAULT_TREE_GRID: [usize; 3] = [100, 200, 500];
pub const DEFAULT_DEPTH_GRID: [Option<usize>; 3] = [None, Some(10), Some(50)];
pub const DEFAULT_INNER_K: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Technique {
    Lr,
    Svm,
    Rf,
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Technique::Lr => "lr",
            Technique::Svm => "svm",
            Technique::Rf => "rf",
        })
    }
}

impl FromStr for Technique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lr" => Ok(Technique::Lr),
            "svm" => Ok(Technique::Svm),
            "rf" => Ok(Technique::Rf),
            other => Err(Error::invalid(format!("unknown technique `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "technique", rename_all = "lowercase")]
pub enum Hyperparams {
    Lr { c: f64 },
    Svm { c: f64 },
    Rf(ForestParams),
}

impl Hyperparams {
    pub fn technique(&self) -> Technique {
        match self {
            Hyperparams::Lr { .. } => Technique::Lr,
            Hyperparams::Svm { .. } => Technique::Svm,
            Hyperparams::Rf(_) => Technique::Rf,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Hyperparams::Lr { c } | Hyperparams::Svm { c } if !(c > 0.0 && c.is_finite()) => {
                Err(Error::invalid(format!("regularization C must be positive, got {c}")))
            }
            Hyperparams::Rf(p) if p.trees == 0 => Err(Error::invalid("tree count must be at least 1")),
            Hyperparams::Rf(ForestParams {
                max_depth: Some(0), ..
            }) => Err(Error::invalid("max depth must be at least 1")),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Hyperparams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hyperparams::Lr { c } | Hyperparams::Svm { c } => write!(f, "{} C={c}", self.technique()),
            Hyperparams::Rf(p) => {
                write!(f, "rf trees={} depth=", p.trees)?;
                match p.max_depth {
                    Some(d) => write!(f, "{d}"),
                    None => f.write_str("unbounded"),
                }
            }
        }
    }
}

/// Non-empty list of candidates sharing one technique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    technique: Technique,
    candidates: Vec<Hyperparams>,
}

impl ParamGrid {
    pub fn new(technique: Technique, candidates: Vec<Hyperparams>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::invalid("empty parameter grid"));
        }
        for c in &candidates {
            if c.technique() != technique {
                return Err(Error::invalid(format!(
                    "grid for {technique} contains a {} candidate",
                    c.technique()
                )));
            }
            c.validate()?;
        }
        Ok(Self {
            technique,
            candidates,
        })
    }

    /// Grid over regularization strengths for `lr` or `svm`.
    pub fn linear(technique: Technique, cs: &[f64]) -> Result<Self> {
        let candidates = cs
            .iter()
            .map(|&c| match technique {
                Technique::Lr => Ok(Hyperparams::Lr { c }),
                Technique::Svm => Ok(Hyperparams::Svm { c }),
                Technique::Rf => Err(Error::invalid("rf has no C grid")),
            })
            .collect::<Result<_>>()?;
        Self::new(technique, candidates)
    }

    /// Cartesian product trees × depths.
    pub fn forest(trees: &[usize], depths: &[Option<usize>]) -> Result<Self> {
        let candidates = trees
            .iter()
            .flat_map(|&t| depths.iter().map(move |&d| Hyperparams::Rf(ForestParams::new(t, d))))
            .collect();
        Self::new(Technique::Rf, candidates)
    }

    pub fn default_for(technique: Technique) -> Self {
        match technique {
            Technique::Lr | Technique::Svm => Self::linear(technique, &DEFAULT_C_GRID),
            Technique::Rf => Self::forest(&DEFAULT_TREE_GRID, &DEFAULT_DEPTH_GRID),
        }
        .expect("default grids are valid")
    }

    pub fn technique(&self) -> Technique {
        self.technique
    }

    pub fn candidates(&self) -> &[Hyperparams] {
        &self.candidates
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Learned {
    Linear(LinearModel),
    Forest(RandomForest),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub hyperparams: Hyperparams,
    pub learned: Learned,
    dimension: usize,
}

impl TrainedModel {
    pub fn technique(&self) -> Technique {
        self.hyperparams.technique()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Signed margin for the linear models; `None` for forests.
    pub fn margin(&self, x: &SparseVector) -> Option<f64> {
        match &self.learned {
            Learned::Linear(m) => Some(m.margin(x)),
            Learned::Forest(_) => None,
        }
    }
}

fn check_rows(x: &[SparseVector], dimension: usize) -> Result<()> {
    for row in x {
        if row.dimension() != dimension {
            return Err(Error::DimensionMismatch {
                expected: dimension,
                found: row.dimension(),
            });
        }
        if row.entries().iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid("non-finite feature value"));
        }
    }
    Ok(())
}

/// Trains one model. Deterministic in `(x, y, hp, seed)`.
pub fn train(x: &[SparseVector], y: &[Label], hp: &Hyperparams, seed: u64) -> Result<TrainedModel> {
    hp.validate()?;
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "{} feature rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::invalid("need at least two training examples"));
    }
    let positives = y.iter().filter(|l| l.is_security()).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::SingleClass);
    }
    let dimension = x[0].dimension();
    check_rows(x, dimension)?;

    let learned = match *hp {
        Hyperparams::Lr { c } => {
            let (m, summary) = fit_logistic(x, y, c, linear::DEFAULT_TOLERANCE, linear::DEFAULT_MAX_ITER);
            if !summary.converged {
                tracing::debug!(c, iterations = summary.iterations, "logistic solver hit its iteration budget");
            }
            Learned::Linear(m)
        }
        Hyperparams::Svm { c } => {
            let (m, summary) = fit_hinge(x, y, c, seed, linear::DEFAULT_TOLERANCE, linear::DEFAULT_MAX_ITER);
            if !summary.converged {
                tracing::debug!(c, iterations = summary.iterations, "svm solver hit its epoch budget");
            }
            Learned::Linear(m)
        }
        Hyperparams::Rf(params) => Learned::Forest(fit_forest(x, y, &params, seed)),
    };
    Ok(TrainedModel {
        hyperparams: *hp,
        learned,
        dimension,
    })
}

/// Scores in `[0, 1]`: logistic probability, sigmoid of the SVM margin, or
/// the forest's positive vote fraction.
pub fn score(model: &TrainedModel, x: &[SparseVector]) -> Result<Vec<f64>> {
    check_rows(x, model.dimension)?;
    Ok(match &model.learned {
        Learned::Linear(m) => x.iter().map(|xi| linear::sigmoid(m.margin(xi))).collect(),
        Learned::Forest(f) => x.iter().map(|xi| f.vote_fraction(xi)).collect(),
    })
}

/// Label 1 iff `score >= threshold`.
pub fn predict_labels(scores: &[f64], threshold: f64) -> Result<Vec<Label>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid(format!("threshold {threshold} outside [0, 1]")));
    }
    Ok(scores.iter().map(|&s| Label::from_bool(s >= threshold)).collect())
}

/// Picks the candidate with the highest mean inner-CV ROC-AUC; ties go to the
/// earliest grid position. Inner folds whose test part holds a single class
/// have no AUC and are skipped.
pub fn grid_search(
    technique: Technique,
    grid: &ParamGrid,
    x: &[SparseVector],
    y: &[Label],
    inner_k: usize,
    seed: u64,
) -> Result<Hyperparams> {
    if grid.technique() != technique {
        return Err(Error::invalid(format!(
            "grid is for {}, requested {technique}",
            grid.technique()
        )));
    }
    if inner_k < 2 {
        return Err(Error::invalid("inner fold count must be at least 2"));
    }
    if grid.candidates().len() == 1 {
        return Ok(grid.candidates()[0]);
    }
    let folds = stratified_folds(y, inner_k, seed)?;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..inner_k)
        .map(|f| (folds.train_indices(f), folds.test_indices(f)))
        .collect();

    let means: Vec<Option<f64>> = grid
        .candidates()
        .par_iter()
        .map(|hp| -> Result<Option<f64>> {
            let aucs: Vec<Option<f64>> = splits
                .par_iter()
                .enumerate()
                .map(|(f, (train_idx, test_idx))| {
                    let pick = |idx: &[usize]| -> (Vec<SparseVector>, Vec<Label>) {
                        idx.iter().map(|&i| (x[i].clone(), y[i])).unzip()
                    };
                    let (xtr, ytr) = pick(train_idx);
                    let (xte, yte) = pick(test_idx);
                    let model = train(&xtr, &ytr, hp, seed.wrapping_add(f as u64))?;
                    match roc_auc(&yte, &score(&model, &xte)?) {
                        Ok(auc) => Ok(Some(auc)),
                        Err(Error::AucUndefined) => Ok(None),
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<_>>()?;
            let usable: Vec<f64> = aucs.into_iter().flatten().collect();
            Ok((!usable.is_empty()).then(|| usable.iter().sum::<f64>() / usable.len() as f64))
        })
        .collect::<Result<_>>()?;

    let mut best: Option<(usize, f64)> = None;
    for (i, m) in means.iter().enumerate() {
        if let Some(m) = *m {
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((i, m));
            }
        }
    }
    let (i, auc) = best.ok_or_else(|| Error::invalid("no inner fold had both classes in its test part"))?;
    tracing::debug!(chosen = %grid.candidates()[i], inner_auc = auc, "grid search");
    Ok(grid.candidates()[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 20 points: positives around e0, negatives around e1.
    fn separable() -> (Vec<SparseVector>, Vec<Label>) {
        (0..20)
            .map(|i| {
                let t = 0.02 * i as f64;
                if i % 2 == 0 {
                    (SparseVector::new(2, vec![(0, 1.0 - t), (1, t)]).unwrap(), Label::Security)
                } else {
                    (SparseVector::new(2, vec![(0, t), (1, 1.0 - t)]).unwrap(), Label::NonSecurity)
                }
            })
            .unzip()
    }

    #[test]
    fn lr_scores_training_points_on_correct_side() {
        let (x, y) = separable();
        let m = train(&x, &y, &Hyperparams::Lr { c: 1.0 }, 0).unwrap();
        let s = score(&m, &x).unwrap();
        for (si, yi) in s.iter().zip(&y) {
            assert_eq!(*si > 0.5, yi.is_security(), "score {si}");
        }
    }

    #[test]
    fn training_errors() {
        let (x, _) = separable();
        let zeros = vec![Label::NonSecurity; x.len()];
        assert!(matches!(train(&x, &zeros, &Hyperparams::Lr { c: 1.0 }, 0), Err(Error::SingleClass)));

        let (mut x, y) = separable();
        x[3] = SparseVector::zeros(5);
        assert!(matches!(
            train(&x, &y, &Hyperparams::Svm { c: 1.0 }, 0),
            Err(Error::DimensionMismatch { .. })
        ));

        let (mut x, y) = separable();
        x[0] = SparseVector::new(2, vec![(0, f64::NAN)]).unwrap();
        assert!(train(&x, &y, &Hyperparams::Lr { c: 1.0 }, 0).is_err());
        assert!(train(&x, &y, &Hyperparams::Lr { c: -1.0 }, 0).is_err());
    }

    #[test]
    fn score_semantics() {
        let lr = TrainedModel {
            hyperparams: Hyperparams::Lr { c: 1.0 },
            learned: Learned::Linear(LinearModel {
                weights: vec![2.0, -2.0],
                bias: 0.0,
            }),
            dimension: 2,
        };
        let on_boundary = SparseVector::new(2, vec![(0, 0.5), (1, 0.5)]).unwrap();
        assert_eq!(score(&lr, &[on_boundary]).unwrap(), vec![0.5]);
        assert!(score(&lr, &[SparseVector::zeros(3)]).is_err());

        let svm = TrainedModel {
            hyperparams: Hyperparams::Svm { c: 1.0 },
            learned: Learned::Linear(LinearModel {
                weights: vec![0.0],
                bias: 0.0,
            }),
            dimension: 1,
        };
        assert_eq!(score(&svm, &[SparseVector::zeros(1)]).unwrap(), vec![0.5]);
    }

    #[test]
    fn forest_vote_fraction() {
        // Four stumps on feature 0; three of them put x=1 on the positive side.
        let (x, y) = separable();
        let m = train(&x, &y, &Hyperparams::Rf(ForestParams::new(4, Some(1))), 1).unwrap();
        let s = score(&m, &x).unwrap();
        for v in s {
            assert!((v * 4.0).fract() == 0.0 && (0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn predict_label_examples() {
        let l = |b: &[u8]| b.iter().map(|&v| Label::from_bool(v == 1)).collect::<Vec<_>>();
        assert_eq!(predict_labels(&[0.4, 0.5, 0.9], 0.5).unwrap(), l(&[0, 1, 1]));
        assert!(predict_labels(&[], 0.5).unwrap().is_empty());
        assert_eq!(predict_labels(&[0.7], 1.0).unwrap(), l(&[0]));
        assert!(predict_labels(&[0.7], 1.5).is_err());
    }

    #[test]
    fn grid_search_examples() {
        let (x, y) = separable();
        let single = ParamGrid::linear(Technique::Lr, &[3.0]).unwrap();
        assert_eq!(grid_search(Technique::Lr, &single, &x, &y, 3, 0).unwrap(), Hyperparams::Lr { c: 3.0 });

        let two = ParamGrid::linear(Technique::Lr, &[0.01, 100.0]).unwrap();
        assert_eq!(grid_search(Technique::Lr, &two, &x, &y, 3, 0).unwrap(), Hyperparams::Lr { c: 0.01 });

        assert!(ParamGrid::new(
            Technique::Lr,
            vec![Hyperparams::Lr { c: 1.0 }, Hyperparams::Svm { c: 1.0 }]
        )
        .is_err());
        assert!(grid_search(Technique::Svm, &two, &x, &y, 3, 0).is_err());
    }

    #[test]
    fn default_grids() {
        assert_eq!(ParamGrid::default_for(Technique::Lr).candidates().len(), 5);
        assert_eq!(ParamGrid::default_for(Technique::Rf).candidates().len(), 9);
    }
}
