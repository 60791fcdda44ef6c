use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalkit::{CvOutcome, MetricsReport};

pub const CSV_HEADER: [&str; 8] = [
    "dataset",
    "technique",
    "fold",
    "auc",
    "mcc",
    "f_score",
    "precision",
    "recall",
];

/// Column titles used in the markdown table and chart captions.
pub const METRIC_TITLES: [&str; 5] = ["AUC", "MCC", "F-Score", "Precision", "Recall"];

/// Tolerance for the mean-row invariant on in-memory tables.
pub const MEAN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FoldLabel {
    Index(usize),
    Mean,
    /// The whole (dataset, technique) cell failed.
    Error(String),
}

impl fmt::Display for FoldLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FoldLabel::Index(i) => write!(f, "{i}"),
            FoldLabel::Mean => f.write_str("mean"),
            FoldLabel::Error(m) => write!(f, "error: {m}"),
        }
    }
}

impl FoldLabel {
    fn parse(s: &str) -> Result<Self> {
        if s == "mean" {
            Ok(FoldLabel::Mean)
        } else if let Some(m) = s.strip_prefix("error:") {
            Ok(FoldLabel::Error(m.trim_start().to_string()))
        } else {
            s.parse()
                .map(FoldLabel::Index)
                .map_err(|_| Error::Results(format!("bad fold value `{s}`")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub technique: String,
    pub fold: FoldLabel,
    /// `None` only for error rows.
    pub metrics: Option<MetricsReport>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    rows: Vec<ResultRow>,
}

impl ResultsTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Fold rows followed by their mean row.
    pub fn push_outcome(&mut self, dataset: &str, technique: &str, outcome: &CvOutcome) {
        for f in &outcome.folds {
            self.rows.push(ResultRow {
                dataset: dataset.to_string(),
                technique: technique.to_string(),
                fold: FoldLabel::Index(f.fold),
                metrics: Some(f.metrics),
            });
        }
        self.rows.push(ResultRow {
            dataset: dataset.to_string(),
            technique: technique.to_string(),
            fold: FoldLabel::Mean,
            metrics: Some(outcome.summary),
        });
    }

    pub fn push_error(&mut self, dataset: &str, technique: &str, message: &str) {
        // Keep the csv one line per row.
        let message = message.replace(['\n', '\r'], " ");
        self.rows.push(ResultRow {
            dataset: dataset.to_string(),
            technique: technique.to_string(),
            fold: FoldLabel::Error(message),
            metrics: None,
        });
    }

    pub fn mean_rows(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(|r| r.fold == FoldLabel::Mean)
    }

    pub fn error_rows(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(|r| matches!(r.fold, FoldLabel::Error(_)))
    }

    /// Dataset names in first-appearance order.
    pub fn datasets(&self) -> Vec<&str> {
        first_seen(self.rows.iter().map(|r| r.dataset.as_str()))
    }

    /// Technique names in first-appearance order.
    pub fn techniques(&self) -> Vec<&str> {
        first_seen(self.rows.iter().map(|r| r.technique.as_str()))
    }

    /// Every (dataset, technique) pair with fold rows has exactly one mean
    /// row, equal to the fold average within `tol`.
    pub fn check_mean_rows(&self, tol: f64) -> Result<()> {
        // (fold rows, mean rows) per pair
        let mut groups: BTreeMap<(&str, &str), [Vec<MetricsReport>; 2]> = BTreeMap::new();
        for r in &self.rows {
            let key = (r.dataset.as_str(), r.technique.as_str());
            let Some(m) = r.metrics else { continue };
            let entry = groups.entry(key).or_default();
            match r.fold {
                FoldLabel::Index(_) => entry[0].push(m),
                FoldLabel::Mean => entry[1].push(m),
                FoldLabel::Error(_) => {}
            }
        }
        for ((d, t), [folds, means]) in groups {
            if means.len() != 1 {
                return Err(Error::Results(format!("{d}/{t}: {} mean rows", means.len())));
            }
            let expected = MetricsReport::mean(&folds)
                .ok_or_else(|| Error::Results(format!("{d}/{t}: mean row without fold rows")))?;
            for ((name, got), want) in MetricsReport::NAMES.iter().zip(means[0].values()).zip(expected.values()) {
                if (got - want).abs() > tol {
                    return Err(Error::Results(format!("{d}/{t}: mean {name} {got} != {want}")));
                }
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.dataset.clone(), r.technique.clone(), r.fold.to_string()];
            match r.metrics {
                Some(m) => rec.extend(m.values().iter().map(|v| format!("{v:.6}"))),
                None => rec.extend(std::iter::repeat_n(String::new(), 5)),
            }
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| Error::Results(e.to_string()))?.clone();
        let cols: Vec<&str> = header.iter().collect();
        if cols != CSV_HEADER {
            let unknown: Vec<&str> = cols.iter().copied().filter(|c| !CSV_HEADER.contains(c)).collect();
            let missing: Vec<&str> = CSV_HEADER.iter().copied().filter(|c| !cols.contains(c)).collect();
            return Err(Error::Results(format!(
                "unknown metric columns {unknown:?}, missing {missing:?}; expected header `{}`",
                CSV_HEADER.join(",")
            )));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::Results(format!("line {line}: {e}")))?;
            let fold = FoldLabel::parse(&rec[2]).map_err(|e| Error::Results(format!("line {line}: {e}")))?;
            let metrics = if matches!(fold, FoldLabel::Error(_)) {
                None
            } else {
                let mut v = [0.0; 5];
                for (j, slot) in v.iter_mut().enumerate() {
                    let field = &rec[3 + j];
                    *slot = field.parse().map_err(|_| {
                        Error::Results(format!("line {line}: bad {} value `{field}`", MetricsReport::NAMES[j]))
                    })?;
                }
                Some(MetricsReport::from_values(v))
            };
            rows.push(ResultRow {
                dataset: rec[0].to_string(),
                technique: rec[1].to_string(),
                fold,
                metrics,
            });
        }
        Ok(Self { rows })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text)
    }

    /// Mean rows as a markdown table grouped by dataset, 3 decimals, with
    /// the per-dataset maximum of each metric in bold (ties all bold).
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Dataset | Technique |");
        for t in METRIC_TITLES {
            out.push_str(&format!(" {t} |"));
        }
        out.push_str("\n|---|---|");
        out.push_str(&"---:|".repeat(5));
        out.push('\n');

        for dataset in self.datasets() {
            let cells: Vec<&ResultRow> = self
                .rows
                .iter()
                .filter(|r| r.dataset == dataset && !matches!(r.fold, FoldLabel::Index(_)))
                .collect();
            let rounded = |m: &MetricsReport| m.values().map(|v| format!("{v:.3}"));
            let mut best: [Option<f64>; 5] = [None; 5];
            for m in cells.iter().filter_map(|r| r.metrics.as_ref()) {
                for (b, s) in best.iter_mut().zip(rounded(m)) {
                    let v: f64 = s.parse().expect("formatted float");
                    *b = Some(b.map_or(v, |b| b.max(v)));
                }
            }
            for (i, r) in cells.iter().enumerate() {
                let name = if i == 0 { dataset } else { "" };
                out.push_str(&format!("| {name} | {} |", r.technique));
                match &r.metrics {
                    Some(m) => {
                        for (s, b) in rounded(m).iter().zip(best) {
                            if Some(s.parse::<f64>().expect("formatted float")) == b {
                                out.push_str(&format!(" **{s}** |"));
                            } else {
                                out.push_str(&format!(" {s} |"));
                            }
                        }
                    }
                    None => out.push_str(&" n/a |".repeat(5)),
                }
                out.push('\n');
            }
        }
        let errors: Vec<&ResultRow> = self.error_rows().collect();
        if !errors.is_empty() {
            out.push_str("\nFailed cells:\n\n");
            for r in errors {
                out.push_str(&format!("- {} / {}: {}\n", r.dataset, r.technique, r.fold));
            }
        }
        out
    }
}

fn first_seen<'a>(names: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = Vec::new();
    for n in names {
        if !seen.contains(&n) {
            seen.push(n);
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalkit::FoldResult;

    fn report(v: f64) -> MetricsReport {
        MetricsReport::from_values([v; 5])
    }

    fn outcome(values: &[f64]) -> CvOutcome {
        let folds: Vec<FoldResult> = values
            .iter()
            .enumerate()
            .map(|(fold, &v)| FoldResult {
                fold,
                metrics: report(v),
                n_train: 8,
                n_test: 2,
            })
            .collect();
        let per: Vec<_> = folds.iter().map(|f| f.metrics).collect();
        CvOutcome {
            summary: MetricsReport::mean(&per).unwrap(),
            folds,
        }
    }

    #[test]
    fn csv_round_trip_and_header() {
        let mut t = ResultsTable::new();
        t.push_outcome("camel", "lr", &outcome(&[0.5, 0.75]));
        t.push_error("camel", "setfit", "backend\nfailed");
        let csv = t.to_csv_string();
        assert!(csv.starts_with("dataset,technique,fold,auc,mcc,f_score,precision,recall\n"));
        assert!(csv.contains("camel,lr,1,0.750000,"));
        assert!(csv.contains("camel,lr,mean,0.625000,"));
        assert!(csv.contains("camel,setfit,error: backend failed,,,,,"));
        let back = ResultsTable::from_csv_str(&csv).unwrap();
        assert_eq!(back, t);
        back.check_mean_rows(1e-6).unwrap();
    }

    #[test]
    fn unknown_columns_rejected() {
        let err = ResultsTable::from_csv_str("dataset,technique,fold,auc,accuracy\n").unwrap_err();
        assert!(err.to_string().contains("unknown metric columns"), "{err}");
    }

    #[test]
    fn mean_invariant_detects_tampering() {
        let mut t = ResultsTable::new();
        t.push_outcome("d", "lr", &outcome(&[0.1, 0.2, 0.3]));
        t.check_mean_rows(MEAN_TOLERANCE).unwrap();
        if let Some(m) = t.rows.last_mut().unwrap().metrics.as_mut() {
            m.auc += 1e-9;
        }
        assert!(t.check_mean_rows(MEAN_TOLERANCE).is_err());
    }

    #[test]
    fn markdown_bolds_ties() {
        let mut t = ResultsTable::new();
        t.push_outcome("d", "lr", &outcome(&[0.9]));
        t.push_outcome("d", "svm", &outcome(&[0.9]));
        t.push_outcome("d", "rf", &outcome(&[0.4]));
        let md = t.to_markdown();
        assert_eq!(md.matches("**0.900**").count(), 10, "{md}");
        assert!(md.contains("| d | lr |"));
        assert!(md.contains("|  | svm |"));
        assert!(!md.contains("**0.400**"));
    }
}
