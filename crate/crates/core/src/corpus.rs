//! Labeled bug-report datasets in the normalized `{id, text, label}` schema.
//!
//! Both csv (header `id,text,label`, extra columns ignored) and jsonl (one
//! object per line) are accepted. Rows keep file order, and every load
//! error names the offending line.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod toy;

/// Binary security label. Serialized as `0` / `1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    NonSecurity,
    Security,
}

impl Label {
    pub fn from_bool(security: bool) -> Self {
        if security {
            Label::Security
        } else {
            Label::NonSecurity
        }
    }

    pub fn is_security(self) -> bool {
        self == Label::Security
    }

    pub fn as_u8(self) -> u8 {
        self.is_security() as u8
    }

    /// `+1.0` for security, `-1.0` otherwise; the sign convention of the linear models.
    pub fn signed(self) -> f64 {
        if self.is_security() {
            1.0
        } else {
            -1.0
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let token = s.trim();
        match token.to_ascii_lowercase().as_str() {
            "1" | "security" => Ok(Label::Security),
            "0" | "nonsecurity" => Ok(Label::NonSecurity),
            _ => Err(format!("unknown label token `{token}`")),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_u8())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BugReport {
    pub id: String,
    pub description: String,
    pub label: Label,
}

impl BugReport {
    pub fn new(id: impl Into<String>, description: impl Into<String>, label: Label) -> Self {
        Self {
            id: id.into(),
            description: description.into(),
            label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Jsonl,
}

impl DataFormat {
    /// Guess from the file extension; anything other than `.jsonl`/`.json` is csv.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("jsonl") || ext.eq_ignore_ascii_case("json") => {
                DataFormat::Jsonl
            }
            _ => DataFormat::Csv,
        }
    }
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(DataFormat::Csv),
            "jsonl" => Ok(DataFormat::Jsonl),
            other => Err(Error::invalid(format!("unknown dataset format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDataset {
    pub name: String,
    pub reports: Vec<BugReport>,
}

impl LabeledDataset {
    /// Builds a dataset, enforcing unique non-empty ids and non-blank descriptions.
    pub fn new(name: impl Into<String>, reports: Vec<BugReport>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(reports.len());
        for (i, r) in reports.iter().enumerate() {
            if r.id.is_empty() {
                return Err(Error::invalid(format!("report {i}: empty id")));
            }
            if r.description.trim().is_empty() {
                return Err(Error::invalid(format!("report `{}`: empty description", r.id)));
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::invalid(format!("duplicate id `{}`", r.id)));
            }
        }
        Ok(Self {
            name: name.into(),
            reports,
        })
    }

    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.reports.iter().map(|r| r.label).collect()
    }

    pub fn stats(&self) -> DatasetStats {
        dataset_stats(self)
    }

    /// Training operations require at least one report of each class.
    pub fn ensure_both_classes(&self) -> Result<()> {
        let stats = self.stats();
        if stats.positives == 0 || stats.positives == stats.total {
            return Err(Error::SingleClass);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DatasetStats {
    pub total: usize,
    pub positives: usize,
    pub positive_ratio: f64,
}

pub fn dataset_stats(ds: &LabeledDataset) -> DatasetStats {
    let total = ds.reports.len();
    let positives = ds.reports.iter().filter(|r| r.label.is_security()).count();
    let positive_ratio = if total == 0 {
        0.0
    } else {
        positives as f64 / total as f64
    };
    DatasetStats {
        total,
        positives,
        positive_ratio,
    }
}

/// Loads a dataset; its name is the file stem (e.g. `camel.csv` → `camel`).
pub fn load_dataset(path: impl AsRef<Path>, format: DataFormat) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let rows = match format {
        DataFormat::Csv => read_csv_rows(path, file)?,
        DataFormat::Jsonl => read_jsonl_rows(path, file)?,
    };
    if rows.is_empty() {
        return Err(Error::EmptyDataset {
            path: path.to_path_buf(),
        });
    }

    let mut seen = HashSet::with_capacity(rows.len());
    let mut reports = Vec::with_capacity(rows.len());
    for RawRow { line, id, text, label } in rows {
        let row_err = |message: String| Error::Row {
            path: path.to_path_buf(),
            row: line,
            message,
        };
        if id.is_empty() {
            return Err(row_err("empty id".into()));
        }
        if text.trim().is_empty() {
            return Err(row_err("empty description".into()));
        }
        let label: Label = label.parse().map_err(row_err)?;
        if !seen.insert(id.clone()) {
            return Err(row_err(format!("duplicate id `{id}`")));
        }
        reports.push(BugReport {
            id,
            description: text,
            label,
        });
    }
    Ok(LabeledDataset { name, reports })
}

struct RawRow {
    line: usize,
    id: String,
    text: String,
    label: String,
}

fn read_csv_rows(path: &Path, file: File) -> Result<Vec<RawRow>> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(file);
    let header_err = |message: String| Error::Row {
        path: path.to_path_buf(),
        row: 1,
        message,
    };
    let headers = reader
        .headers()
        .map_err(|e| header_err(e.to_string()))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| header_err(format!("missing column `{name}`")))
    };
    let (id_col, text_col, label_col) = (column("id")?, column("text")?, column("label")?);

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            let message = match e.kind() {
                csv::ErrorKind::UnequalLengths {
                    expected_len, len, ..
                } => format!("expected {expected_len} columns, found {len}"),
                _ => e.to_string(),
            };
            Error::Row {
                path: path.to_path_buf(),
                row: line,
                message,
            }
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        rows.push(RawRow {
            line,
            id: record[id_col].trim().to_string(),
            text: record[text_col].to_string(),
            label: record[label_col].to_string(),
        });
    }
    Ok(rows)
}

fn read_jsonl_rows(path: &Path, file: File) -> Result<Vec<RawRow>> {
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let row_err = |message: String| Error::Row {
            path: path.to_path_buf(),
            row: line_no,
            message,
        };
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| row_err(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| row_err("expected a json object".into()))?;
        let field = |key: &str| -> Result<String> {
            match obj.get(key) {
                Some(serde_json::Value::String(s)) => Ok(s.clone()),
                Some(serde_json::Value::Number(n)) => Ok(n.to_string()),
                Some(other) => Err(row_err(format!("key `{key}` has unsupported value {other}"))),
                None => Err(row_err(format!("missing key `{key}`"))),
            }
        };
        rows.push(RawRow {
            line: line_no,
            id: field("id")?.trim().to_string(),
            text: field("text")?,
            label: field("label")?,
        });
    }
    Ok(rows)
}

/// Writes the dataset in the normalized csv schema.
pub fn write_csv(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(["id", "text", "label"])
        .map_err(|e| csv_io(path, e))?;
    for r in &ds.reports {
        w.write_record([r.id.as_str(), r.description.as_str(), &r.label.to_string()])
            .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_jsonl(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = std::io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for r in &ds.reports {
        let line = serde_json::json!({ "id": r.id, "text": r.description, "label": r.label.as_u8() });
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::io(PathBuf::from(path), std::io::Error::other(e))
}
