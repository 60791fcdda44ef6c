//! Pretrained sentence encoder served by the Python `sentence-transformers`
//! package through a short-lived subprocess per call.
//!
//! Fine-tuned weights are saved to a temporary directory owned by the
//! returned backend; later calls load from there.

use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{batch_schedule, ContrastivePair, EncoderBackend, FewShotConfig, FineTuneReport};
use crate::error::{Error, Result};

pub const DEFAULT_MODEL_ID: &str = "sentence-transformers/all-mpnet-base-v2";
/// Model cache directory.
pub const CACHE_DIR_ENV: &str = "SBRFEW_ENCODER_CACHE";
/// Any value other than empty/`0`/`false` forbids network access.
pub const OFFLINE_ENV: &str = "SBRFEW_OFFLINE";
/// Python interpreter to run the bridge with (default `python3`).
pub const PYTHON_ENV: &str = "SBRFEW_PYTHON";

const BRIDGE: &str = include_str!("st_bridge.py");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainedConfig {
    pub model_id: String,
    pub cache_dir: Option<PathBuf>,
    pub offline: bool,
    /// Frozen encoders refuse fine-tuning; use `epochs = 0` with them.
    pub frozen: bool,
    pub python: String,
}

impl Default for PretrainedConfig {
    fn default() -> Self {
        Self {
            model_id: DEFAULT_MODEL_ID.to_string(),
            cache_dir: None,
            offline: false,
            frozen: false,
            python: "python3".to_string(),
        }
    }
}

impl PretrainedConfig {
    /// Defaults overridden by the cache, offline and interpreter env vars.
    pub fn from_env() -> Self {
        let mut cfg = Self::default();
        cfg.apply_env();
        cfg
    }

    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(CACHE_DIR_ENV).filter(|v| !v.is_empty()) {
            self.cache_dir = Some(dir.into());
        }
        if let Ok(v) = std::env::var(OFFLINE_ENV) {
            let v = v.trim().to_ascii_lowercase();
            if !(v.is_empty() || v == "0" || v == "false") {
                self.offline = true;
            }
        }
        if let Ok(py) = std::env::var(PYTHON_ENV) {
            if !py.is_empty() {
                self.python = py;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct PretrainedEncoder {
    config: PretrainedConfig,
    dimension: usize,
    max_seq_length: Option<usize>,
    tuned: Option<Arc<tempfile::TempDir>>,
}

#[derive(Deserialize)]
struct InfoResponse {
    dimension: usize,
    max_seq_length: Option<usize>,
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f64>>,
    truncated: usize,
}

#[derive(Deserialize)]
struct FineTuneResponse {
    epoch_losses: Vec<f64>,
}

impl PretrainedEncoder {
    /// Loads the model once to learn its embedding width; fails fast when the
    /// model is unavailable (for example offline with an empty cache).
    pub fn load(config: PretrainedConfig) -> Result<Self> {
        let mut enc = Self {
            config,
            dimension: 0,
            max_seq_length: None,
            tuned: None,
        };
        let info: InfoResponse = enc.call("info", json!({}))?;
        enc.dimension = info.dimension;
        enc.max_seq_length = info.max_seq_length;
        Ok(enc)
    }

    pub fn config(&self) -> &PretrainedConfig {
        &self.config
    }

    pub fn max_seq_length(&self) -> Option<usize> {
        self.max_seq_length
    }

    fn model_path(&self) -> String {
        match &self.tuned {
            Some(dir) => dir.path().display().to_string(),
            None => self.config.model_id.clone(),
        }
    }

    fn backend_err(&self, message: impl Into<String>) -> Error {
        Error::Backend {
            backend: self.identifier(),
            message: message.into(),
        }
    }

    fn call<T: for<'de> Deserialize<'de>>(&self, command: &str, mut request: serde_json::Value) -> Result<T> {
        request["model"] = json!(self.model_path());
        if let Some(dir) = &self.config.cache_dir {
            request["cache_dir"] = json!(dir);
        }
        let mut cmd = Command::new(&self.config.python);
        cmd.arg("-c")
            .arg(BRIDGE)
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        if self.config.offline {
            cmd.env("HF_HUB_OFFLINE", "1").env("TRANSFORMERS_OFFLINE", "1");
        }
        if let Some(dir) = &self.config.cache_dir {
            cmd.env("SENTENCE_TRANSFORMERS_HOME", dir);
        }
        let mut child = cmd
            .spawn()
            .map_err(|e| self.backend_err(format!("cannot start `{}`: {e}", self.config.python)))?;
        let payload = serde_json::to_vec(&request).expect("request serializes");
        child
            .stdin
            .take()
            .expect("stdin is piped")
            .write_all(&payload)
            .map_err(|e| self.backend_err(format!("writing request: {e}")))?;
        let out = child
            .wait_with_output()
            .map_err(|e| self.backend_err(format!("waiting for bridge: {e}")))?;
        if !out.status.success() {
            let stderr = String::from_utf8_lossy(&out.stderr);
            let tail: Vec<&str> = stderr.lines().rev().take(3).collect();
            let tail: Vec<&str> = tail.into_iter().rev().collect();
            return Err(self.backend_err(format!("`{command}` failed ({}): {}", out.status, tail.join(" | "))));
        }
        serde_json::from_slice(&out.stdout).map_err(|e| self.backend_err(format!("bad `{command}` response: {e}")))
    }
}

impl EncoderBackend for PretrainedEncoder {
    fn identifier(&self) -> String {
        if self.tuned.is_some() {
            format!("pretrained:{}+finetuned", self.config.model_id)
        } else {
            format!("pretrained:{}", self.config.model_id)
        }
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let resp: EmbedResponse = self.call("embed", json!({ "texts": texts }))?;
        if resp.truncated > 0 {
            tracing::info!(
                backend = %self.identifier(),
                truncated = resp.truncated,
                limit = ?self.max_seq_length,
                "inputs truncated to the encoder's token limit"
            );
        }
        if resp.embeddings.len() != texts.len() || resp.embeddings.iter().any(|r| r.len() != self.dimension) {
            return Err(self.backend_err("embedding shape mismatch"));
        }
        Ok(resp.embeddings)
    }

    fn supports_training(&self) -> bool {
        !self.config.frozen
    }

    fn train_pairs(&mut self, pairs: &[ContrastivePair], cfg: &FewShotConfig) -> Result<FineTuneReport> {
        let out_dir = tempfile::tempdir().map_err(|e| self.backend_err(format!("temp dir: {e}")))?;
        let triples: Vec<(&str, &str, f64)> = pairs
            .iter()
            .map(|p| (p.text_a.as_str(), p.text_b.as_str(), p.target))
            .collect();
        let resp: FineTuneResponse = self.call(
            "fine_tune",
            json!({
                "pairs": triples,
                "schedule": batch_schedule(pairs.len(), cfg),
                "learning_rate": cfg.learning_rate,
                "seed": cfg.seed,
                "out_dir": out_dir.path(),
            }),
        )?;
        self.tuned = Some(Arc::new(out_dir));
        Ok(FineTuneReport {
            epoch_losses: resp.epoch_losses,
        })
    }

    fn box_clone(&self) -> Box<dyn EncoderBackend> {
        Box::new(self.clone())
    }
}
