//! Experiment declaration, read from TOML.
//!
//! ```toml
//! k = 5
//! seed = 42
//!
//! [[datasets]]
//! name = "Camel"
//! path = "data/camel.csv"
//!
//! [[techniques]]
//! kind = "lr"
//! c = [0.01, 0.1, 1, 10, 100]
//!
//! [[techniques]]
//! kind = "rf"
//! depths = ["unbounded", 10, 50]
//!
//! [[techniques]]
//! kind = "setfit"
//! backend = "hash"
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{
    ParamGrid, Technique, DEFAULT_C_GRID, DEFAULT_DEPTH_GRID, DEFAULT_INNER_K, DEFAULT_THRESHOLD,
    DEFAULT_TREE_GRID,
};
use crate::baselines::{ForestParams, Hyperparams};
use crate::corpus::DataFormat;
use crate::error::{Error, Result};
use crate::evalkit::{BackendSpec, CvOptions, TechniqueSpec};
use crate::fewshot::{FewShotConfig, PretrainedConfig, DEFAULT_HASH_DIMENSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetEntry>,
    pub techniques: Vec<TechniqueConfig>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_k() -> usize {
    5
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub name: String,
    pub path: PathBuf,
    /// Inferred from the extension when absent.
    #[serde(default)]
    pub format: Option<DataFormat>,
}

impl DatasetEntry {
    pub fn format(&self) -> DataFormat {
        self.format.unwrap_or_else(|| DataFormat::from_path(&self.path))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TechniqueConfig {
    Lr(LinearGridConfig),
    Svm(LinearGridConfig),
    Rf(ForestGridConfig),
    Setfit(SetFitConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearGridConfig {
    pub label: Option<String>,
    pub c: Vec<f64>,
    pub inner_k: usize,
}

impl Default for LinearGridConfig {
    fn default() -> Self {
        Self {
            label: None,
            c: DEFAULT_C_GRID.to_vec(),
            inner_k: DEFAULT_INNER_K,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Depth {
    Limited(usize),
    Unbounded(Unbounded),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unbounded {
    Unbounded,
}

impl Depth {
    pub fn as_option(self) -> Option<usize> {
        match self {
            Depth::Limited(d) => Some(d),
            Depth::Unbounded(_) => None,
        }
    }

    pub fn from_option(d: Option<usize>) -> Self {
        d.map_or(Depth::Unbounded(Unbounded::Unbounded), Depth::Limited)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestGridConfig {
    pub label: Option<String>,
    pub trees: Vec<usize>,
    pub depths: Vec<Depth>,
    pub bootstrap: bool,
    pub inner_k: usize,
}

impl Default for ForestGridConfig {
    fn default() -> Self {
        Self {
            label: None,
            trees: DEFAULT_TREE_GRID.to_vec(),
            depths: DEFAULT_DEPTH_GRID.iter().map(|&d| Depth::from_option(d)).collect(),
            bootstrap: true,
            inner_k: DEFAULT_INNER_K,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Hash,
    Pretrained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SetFitConfig {
    pub label: Option<String>,
    pub backend: BackendKind,
    /// Hash backend width.
    pub dimension: usize,
    /// Pretrained backend model id.
    pub model_id: String,
    pub cache_dir: Option<PathBuf>,
    pub offline: bool,
    pub frozen: bool,
    pub pairs_per_example: usize,
    pub epochs: usize,
    /// Defaults to 0.05 for the hash backend and 2e-5 for the pretrained one.
    pub learning_rate: Option<f64>,
    pub batch_size: usize,
    pub head_c: f64,
}

impl Default for SetFitConfig {
    fn default() -> Self {
        let d = FewShotConfig::hash_defaults();
        Self {
            label: None,
            backend: BackendKind::Hash,
            dimension: DEFAULT_HASH_DIMENSION,
            model_id: PretrainedConfig::default().model_id,
            cache_dir: None,
            offline: false,
            frozen: false,
            pairs_per_example: d.pairs_per_example,
            epochs: d.epochs,
            learning_rate: None,
            batch_size: d.batch_size,
            head_c: d.head_c,
        }
    }
}

impl SetFitConfig {
    pub fn fewshot_config(&self) -> FewShotConfig {
        let base = match self.backend {
            BackendKind::Hash => FewShotConfig::hash_defaults(),
            BackendKind::Pretrained => FewShotConfig::pretrained_defaults(),
        };
        FewShotConfig {
            pairs_per_example: self.pairs_per_example,
            epochs: self.epochs,
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            batch_size: self.batch_size,
            head_c: self.head_c,
            seed: 0,
        }
    }

    /// Backend settings, with the cache/offline env vars layered on top.
    pub fn backend_spec(&self) -> BackendSpec {
        match self.backend {
            BackendKind::Hash => BackendSpec::Hash {
                dimension: self.dimension,
            },
            BackendKind::Pretrained => {
                let mut cfg = PretrainedConfig {
                    model_id: self.model_id.clone(),
                    cache_dir: self.cache_dir.clone(),
                    offline: self.offline,
                    frozen: self.frozen,
                    ..PretrainedConfig::default()
                };
                cfg.apply_env();
                BackendSpec::Pretrained(cfg)
            }
        }
    }
}

impl TechniqueConfig {
    /// Name used in result files: the explicit label or the kind.
    pub fn label(&self) -> String {
        let (label, kind) = match self {
            TechniqueConfig::Lr(c) => (&c.label, "lr"),
            TechniqueConfig::Svm(c) => (&c.label, "svm"),
            TechniqueConfig::Rf(c) => (&c.label, "rf"),
            TechniqueConfig::Setfit(c) => (&c.label, "setfit"),
        };
        label.clone().unwrap_or_else(|| kind.to_string())
    }

    pub fn to_spec(&self) -> Result<TechniqueSpec> {
        let linear = |technique: Technique, c: &LinearGridConfig| -> Result<TechniqueSpec> {
            Ok(TechniqueSpec::Baseline {
                grid: ParamGrid::linear(technique, &c.c)?,
                inner_k: c.inner_k,
            })
        };
        match self {
            TechniqueConfig::Lr(c) => linear(Technique::Lr, c),
            TechniqueConfig::Svm(c) => linear(Technique::Svm, c),
            TechniqueConfig::Rf(c) => {
                let candidates = c
                    .trees
                    .iter()
                    .flat_map(|&trees| {
                        c.depths.iter().map(move |d| {
                            Hyperparams::Rf(ForestParams {
                                trees,
                                max_depth: d.as_option(),
                                bootstrap: c.bootstrap,
                            })
                        })
                    })
                    .collect();
                Ok(TechniqueSpec::Baseline {
                    grid: ParamGrid::new(Technique::Rf, candidates)?,
                    inner_k: c.inner_k,
                })
            }
            TechniqueConfig::Setfit(c) => {
                let config = c.fewshot_config();
                config.validate()?;
                Ok(TechniqueSpec::SetFit {
                    config,
                    backend: c.backend_spec(),
                })
            }
        }
    }

    fn inner_k(&self) -> Option<usize> {
        match self {
            TechniqueConfig::Lr(c) | TechniqueConfig::Svm(c) => Some(c.inner_k),
            TechniqueConfig::Rf(c) => Some(c.inner_k),
            TechniqueConfig::Setfit(_) => None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn cv_options(&self) -> CvOptions {
        CvOptions {
            k: self.k,
            seed: self.seed,
            threshold: self.threshold,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.datasets.is_empty() {
            return bad("at least one dataset is required".into());
        }
        if self.techniques.is_empty() {
            return bad("at least one technique is required".into());
        }
        if self.k < 2 {
            return bad(format!("k must be at least 2, got {}", self.k));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold {} outside [0, 1]", self.threshold));
        }
        let mut paths = HashSet::new();
        let mut names = HashSet::new();
        for d in &self.datasets {
            if !paths.insert(&d.path) {
                return bad(format!("dataset path {} listed twice", d.path.display()));
            }
            if !names.insert(&d.name) {
                return bad(format!("dataset name `{}` listed twice", d.name));
            }
        }
        let mut labels = HashSet::new();
        for t in &self.techniques {
            let label = t.label();
            if !labels.insert(label.clone()) {
                return bad(format!("technique `{label}` listed twice; set distinct labels"));
            }
            if let Some(inner_k) = t.inner_k() {
                if inner_k < 2 {
                    return bad(format!("{label}: inner_k must be at least 2"));
                }
            }
            t.to_spec().map_err(|e| Error::Config(format!("{label}: {e}")))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
        seed = 42

        [[datasets]]
        name = "Camel"
        path = "data/camel.csv"

        [[techniques]]
        kind = "lr"

        [[techniques]]
        kind = "rf"
        trees = [10]
        depths = ["unbounded", 5]

        [[techniques]]
        kind = "setfit"
        backend = "hash"
        dimension = 64
    "#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.k, 5);
        assert_eq!(cfg.threshold, 0.5);
        assert_eq!(cfg.datasets[0].format(), DataFormat::Csv);
        match &cfg.techniques[0] {
            TechniqueConfig::Lr(c) => assert_eq!(c.c, DEFAULT_C_GRID.to_vec()),
            other => panic!("{other:?}"),
        }
        match cfg.techniques[1].to_spec().unwrap() {
            TechniqueSpec::Baseline { grid, .. } => assert_eq!(grid.candidates().len(), 2),
            other => panic!("{other:?}"),
        }
        match cfg.techniques[2].to_spec().unwrap() {
            TechniqueSpec::SetFit { config, backend } => {
                assert_eq!(config.learning_rate, 0.05);
                assert_eq!(backend, BackendSpec::Hash { dimension: 64 });
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn toml_and_json_round_trip() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&json).unwrap(), cfg);
    }

    #[test]
    fn validation_errors() {
        let k1 = SAMPLE.replace("seed = 42", "seed = 42\nk = 1");
        assert!(ExperimentConfig::from_toml(&k1).unwrap_err().to_string().contains("k must be"));

        let dup = format!("{SAMPLE}\n[[techniques]]\nkind = \"lr\"\n");
        assert!(ExperimentConfig::from_toml(&dup).is_err());

        let odd = SAMPLE.replace("dimension = 64", "dimension = 64\npairs_per_example = 3");
        assert!(ExperimentConfig::from_toml(&odd).is_err());

        let no_ds = "techniques = [{ kind = \"lr\" }]\ndatasets = []\n";
        assert!(ExperimentConfig::from_toml(no_ds).is_err());

        let bad_c = SAMPLE.replace("kind = \"lr\"", "kind = \"lr\"\nc = [0.0]");
        assert!(ExperimentConfig::from_toml(&bad_c).is_err());
    }

    #[test]
    fn pretrained_learning_rate_default() {
        let c = SetFitConfig {
            backend: BackendKind::Pretrained,
            ..Default::default()
        };
        assert_eq!(c.fewshot_config().learning_rate, 2e-5);
    }
}
