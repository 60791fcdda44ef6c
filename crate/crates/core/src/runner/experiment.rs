use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::chart::render_charts;
use super::config::{ExperimentConfig, TechniqueConfig};
use super::results::ResultsTable;
use crate::corpus::load_dataset;
use crate::error::{Error, Result};
use crate::evalkit::{run_cv, TechniqueSpec};

pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_MD: &str = "results.md";
pub const RUN_META: &str = "run_meta.json";
pub const AUC_MODE: &str = "score-based ROC-AUC";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendRecord {
    pub technique: String,
    pub backend: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub dataset: String,
    pub technique: String,
    pub message: String,
}

/// Provenance written next to the results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub backends: Vec<BackendRecord>,
    pub auc_mode: String,
    pub tool_version: String,
    pub failures: Vec<FailureRecord>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub table: ResultsTable,
    pub meta: RunMeta,
    pub out_dir: PathBuf,
}

impl RunSummary {
    pub fn succeeded(&self) -> bool {
        self.meta.failures.is_empty()
    }
}

/// Cross-validates every (dataset, technique) cell and returns the table.
/// Relative dataset paths resolve against `base_dir`. A failed cell becomes
/// an error row; the remaining cells still run.
pub fn evaluate(cfg: &ExperimentConfig, base_dir: &Path) -> Result<(ResultsTable, Vec<FailureRecord>)> {
    cfg.validate()?;
    let specs: Vec<(String, TechniqueSpec)> = cfg
        .techniques
        .iter()
        .map(|t| Ok((t.label(), t.to_spec()?)))
        .collect::<Result<_>>()?;
    let opts = cfg.cv_options();
    let mut table = ResultsTable::new();
    let mut failures = Vec::new();

    for entry in &cfg.datasets {
        let path = base_dir.join(&entry.path);
        let dataset = load_dataset(&path, entry.format()).map(|mut d| {
            d.name = entry.name.clone();
            d
        });
        for (label, spec) in &specs {
            let started = std::time::Instant::now();
            let outcome = match &dataset {
                Ok(d) => run_cv(d, spec, &opts).map_err(|e| e.to_string()),
                Err(e) => Err(e.to_string()),
            };
            match outcome {
                Ok(o) => {
                    tracing::info!(
                        dataset = %entry.name,
                        technique = %label,
                        auc = o.summary.auc,
                        secs = started.elapsed().as_secs_f64(),
                        "cell done"
                    );
                    table.push_outcome(&entry.name, label, &o);
                }
                Err(message) => {
                    tracing::error!(dataset = %entry.name, technique = %label, %message, "cell failed");
                    table.push_error(&entry.name, label, &message);
                    failures.push(FailureRecord {
                        dataset: entry.name.clone(),
                        technique: label.clone(),
                        message,
                    });
                }
            }
        }
    }
    Ok((table, failures))
}

/// Runs the experiment and writes `results.csv`, `results.md` and
/// `run_meta.json` into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, base_dir: &Path, out_dir: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let started_at = Utc::now();
    let (table, failures) = evaluate(cfg, base_dir)?;
    let meta = RunMeta {
        config: cfg.clone(),
        seed: cfg.seed,
        started_at,
        finished_at: Utc::now(),
        backends: cfg
            .techniques
            .iter()
            .map(|t| BackendRecord {
                technique: t.label(),
                backend: backend_id(t),
            })
            .collect(),
        auc_mode: AUC_MODE.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        failures,
    };
    write_outputs(&table, &meta, out_dir)?;
    Ok(RunSummary {
        table,
        meta,
        out_dir: out_dir.to_path_buf(),
    })
}

fn backend_id(t: &TechniqueConfig) -> String {
    match t {
        TechniqueConfig::Setfit(c) => c.backend_spec().identifier(),
        _ => "tfidf".to_string(),
    }
}

pub fn write_outputs(table: &ResultsTable, meta: &RunMeta, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_atomic(&out_dir.join(RESULTS_CSV), table.to_csv_string().as_bytes())?;
    write_atomic(&out_dir.join(RESULTS_MD), table.to_markdown().as_bytes())?;
    let json = serde_json::to_string_pretty(meta).expect("run meta serializes");
    write_atomic(&out_dir.join(RUN_META), format!("{json}\n").as_bytes())
}

pub fn read_meta(path: impl AsRef<Path>) -> Result<RunMeta> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Results(format!("{}: {e}", path.display())))
}

/// Reads a results file and writes one `<metric>.svg` per metric.
pub fn write_report(results: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let table = ResultsTable::read(results)?;
    let charts = render_charts(&table)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for (name, svg) in charts {
        let path = out_dir.join(format!("{name}.svg"));
        write_atomic(&path, svg.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// Writes through a temp file in the target directory, then renames, so
/// readers see either the old file or the complete new one.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
