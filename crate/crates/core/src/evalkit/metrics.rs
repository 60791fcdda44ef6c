use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn tpr(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn fpr(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }
}

/// The five reported scores for one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auc: f64,
    pub mcc: f64,
    pub f_score: f64,
    pub precision: f64,
    pub recall: f64,
}

impl MetricsReport {
    pub const NAMES: [&'static str; 5] = ["auc", "mcc", "f_score", "precision", "recall"];

    pub fn from_predictions(truth: &[Label], scores: &[f64], predicted: &[Label]) -> Result<Self> {
        let cm = confusion(truth, predicted)?;
        let (precision, recall, f_score) = precision_recall_f(&cm);
        Ok(Self {
            auc: roc_auc(truth, scores)?,
            mcc: mcc(&cm),
            f_score,
            precision,
            recall,
        })
    }

    pub fn values(&self) -> [f64; 5] {
        [self.auc, self.mcc, self.f_score, self.precision, self.recall]
    }

    pub fn from_values(v: [f64; 5]) -> Self {
        Self {
            auc: v[0],
            mcc: v[1],
            f_score: v[2],
            precision: v[3],
            recall: v[4],
        }
    }

    /// Arithmetic mean of each metric; `None` for an empty slice.
    pub fn mean(reports: &[MetricsReport]) -> Option<Self> {
        if reports.is_empty() {
            return None;
        }
        // Shifted by the first report so equal inputs average to themselves exactly.
        let base = reports[0].values();
        let mut deltas = [0.0; 5];
        for r in reports {
            for ((d, v), b) in deltas.iter_mut().zip(r.values()).zip(base) {
                *d += v - b;
            }
        }
        let n = reports.len() as f64;
        let mut out = base;
        for (o, d) in out.iter_mut().zip(deltas) {
            *o += d / n;
        }
        Some(Self::from_values(out))
    }
}

pub fn confusion(truth: &[Label], predicted: &[Label]) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} truth labels, {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::invalid("confusion matrix of empty input"));
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in truth.iter().zip(predicted) {
        match (t.is_security(), p.is_security()) {
            (true, true) => cm.tp += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (true, false) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

/// Matthews correlation; 0.0 whenever a marginal of the denominator is zero.
pub fn mcc(cm: &ConfusionMatrix) -> f64 {
    let (tp, fp, tn, fn_) = (cm.tp as f64, cm.fp as f64, cm.tn as f64, cm.fn_ as f64);
    let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if denom == 0.0 {
        return 0.0;
    }
    (tp * tn - fp * fn_) / denom.sqrt()
}

/// `(precision, recall, f_score)`, each 0.0 when its denominator is zero.
pub fn precision_recall_f(cm: &ConfusionMatrix) -> (f64, f64, f64) {
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// ROC-AUC as the Mann-Whitney statistic: the fraction of (positive,
/// negative) pairs where the positive scores higher, ties counting one half.
pub fn roc_auc(truth: &[Label], scores: &[f64]) -> Result<f64> {
    if truth.len() != scores.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} truth labels, {} scores",
            truth.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    let mut ranked: Vec<(f64, bool)> = scores
        .iter()
        .zip(truth)
        .map(|(&s, l)| (s, l.is_security()))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0));

    let positives = ranked.iter().filter(|(_, p)| *p).count();
    let negatives = ranked.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::AucUndefined);
    }

    // Ascending sweep over tie groups, counting wins in half-units so the
    // sum stays an exact integer.
    let mut negatives_below = 0u64;
    let mut half_wins = 0u64;
    let mut start = 0;
    while start < ranked.len() {
        let mut end = start;
        while end < ranked.len() && ranked[end].0 == ranked[start].0 {
            end += 1;
        }
        let group_pos = ranked[start..end].iter().filter(|(_, p)| *p).count() as u64;
        let group_neg = (end - start) as u64 - group_pos;
        half_wins += 2 * group_pos * negatives_below + group_pos * group_neg;
        negatives_below += group_neg;
        start = end;
    }
    Ok(half_wins as f64 / (2.0 * positives as f64 * negatives as f64))
}

/// Points of the empirical ROC curve, `(fpr, tpr)`, from threshold +inf downwards.
pub fn roc_curve(truth: &[Label], scores: &[f64]) -> Result<Vec<(f64, f64)>> {
    if truth.len() != scores.len() {
        return Err(Error::invalid("length mismatch"));
    }
    let mut ranked: Vec<(f64, bool)> = scores
        .iter()
        .zip(truth)
        .map(|(&s, l)| (s, l.is_security()))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    let positives = ranked.iter().filter(|(_, p)| *p).count();
    let negatives = ranked.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::AucUndefined);
    }
    let mut cm = ConfusionMatrix::new(0, 0, negatives as u64, positives as u64);
    let mut points = vec![(0.0, 0.0)];
    let mut i = 0;
    while i < ranked.len() {
        let threshold = ranked[i].0;
        while i < ranked.len() && ranked[i].0 == threshold {
            if ranked[i].1 {
                cm.tp += 1;
                cm.fn_ -= 1;
            } else {
                cm.fp += 1;
                cm.tn -= 1;
            }
            i += 1;
        }
        points.push((cm.fpr(), cm.tpr()));
    }
    Ok(points)
}
