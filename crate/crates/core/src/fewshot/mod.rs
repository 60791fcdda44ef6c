//! Few-shot classification: contrastive pairs fine-tune a sentence encoder,
//! then a logistic head is fit on the resulting embeddings.
//!
//! Raw descriptions go to the encoder; the TF-IDF cleaning rules are not applied here.

use std::fmt;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, Hyperparams, Learned, LinearModel};
use crate::corpus::{BugReport, Label};
use crate::error::{Error, Result};
use crate::textprep::SparseVector;

pub mod hash;
pub mod pretrained;

pub use hash::{HashEncoder, DEFAULT_HASH_DIMENSION};
pub use pretrained::{PretrainedConfig, PretrainedEncoder};

const PAIR_STREAM: u64 = 0;
const SHUFFLE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContrastivePair {
    pub id_a: String,
    pub text_a: String,
    pub id_b: String,
    pub text_b: String,
    /// 1.0 for same-class pairs, 0.0 otherwise.
    pub target: f64,
}

impl ContrastivePair {
    pub fn new(
        id_a: impl Into<String>,
        text_a: impl Into<String>,
        id_b: impl Into<String>,
        text_b: impl Into<String>,
        target: f64,
    ) -> Self {
        Self {
            id_a: id_a.into(),
            text_a: text_a.into(),
            id_b: id_b.into(),
            text_b: text_b.into(),
            target,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FewShotConfig {
    /// Pairs generated per training example; even, half same-class.
    pub pairs_per_example: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Regularization strength C of the logistic head.
    pub head_c: f64,
    pub seed: u64,
}

impl Default for FewShotConfig {
    fn default() -> Self {
        Self::hash_defaults()
    }
}

impl FewShotConfig {
    pub fn hash_defaults() -> Self {
        Self {
            pairs_per_example: 20,
            epochs: 1,
            learning_rate: 0.05,
            batch_size: 16,
            head_c: 1.0,
            seed: 0,
        }
    }

    pub fn pretrained_defaults() -> Self {
        Self {
            learning_rate: 2e-5,
            ..Self::hash_defaults()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pairs_per_example < 2 || !self.pairs_per_example.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "pairs per example must be an even number >= 2, got {}",
                self.pairs_per_example
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        if !(self.head_c > 0.0 && self.head_c.is_finite()) {
            return Err(Error::invalid("head C must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct FineTuneReport {
    /// Mean pair loss per epoch, accumulated over the epoch's batches.
    pub epoch_losses: Vec<f64>,
}

/// A sentence encoder producing unit-norm rows of width `dimension()`.
pub trait EncoderBackend: Send + Sync + fmt::Debug {
    fn identifier(&self) -> String;

    fn dimension(&self) -> usize;

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>>;

    fn supports_training(&self) -> bool;

    /// One contrastive training run over `pairs`, in place.
    fn train_pairs(&mut self, pairs: &[ContrastivePair], cfg: &FewShotConfig) -> Result<FineTuneReport>;

    fn box_clone(&self) -> Box<dyn EncoderBackend>;
}

impl Clone for Box<dyn EncoderBackend> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

/// Seeded mini-batch order: one shuffled list of batches per epoch.
pub fn batch_schedule(n_pairs: usize, cfg: &FewShotConfig) -> Vec<Vec<Vec<usize>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..n_pairs).collect();
    (0..cfg.epochs)
        .map(|_| {
            order.shuffle(&mut rng);
            order.chunks(cfg.batch_size.max(1)).map(<[usize]>::to_vec).collect()
        })
        .collect()
}

/// For every example, `r / 2` same-class and `r / 2` other-class partners.
///
/// Partners are distinct when the pool is large enough, otherwise drawn with
/// replacement. An example is never paired with itself.
pub fn generate_pairs(examples: &[BugReport], r: usize, seed: u64) -> Result<Vec<ContrastivePair>> {
    if r < 2 || !r.is_multiple_of(2) {
        return Err(Error::invalid(format!("pairs per example must be even and >= 2, got {r}")));
    }
    let members = |class: Label| -> Vec<usize> {
        examples
            .iter()
            .enumerate()
            .filter(|(_, e)| e.label == class)
            .map(|(i, _)| i)
            .collect()
    };
    let by_class = [members(Label::NonSecurity), members(Label::Security)];
    for (class, m) in by_class.iter().enumerate() {
        if m.len() < 2 {
            return Err(Error::invalid(format!("cannot form positive pairs for class {class}")));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PAIR_STREAM);
    let half = r / 2;
    let mut pairs = Vec::with_capacity(examples.len() * r);
    for (i, ex) in examples.iter().enumerate() {
        let own = ex.label.as_u8() as usize;
        let same: Vec<usize> = by_class[own].iter().copied().filter(|&j| j != i).collect();
        let other = &by_class[1 - own];
        for (pool, target) in [(same.as_slice(), 1.0), (other.as_slice(), 0.0)] {
            for j in draw(pool, half, &mut rng) {
                let partner = &examples[j];
                pairs.push(ContrastivePair::new(
                    &ex.id,
                    &ex.description,
                    &partner.id,
                    &partner.description,
                    target,
                ));
            }
        }
    }
    Ok(pairs)
}

fn draw(pool: &[usize], count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if pool.len() >= count {
        index::sample(rng, pool.len(), count)
            .into_iter()
            .map(|k| pool[k])
            .collect()
    } else {
        (0..count).map(|_| pool[rng.gen_range(0..pool.len())]).collect()
    }
}

pub fn embed(backend: &dyn EncoderBackend, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
    backend.embed(texts)
}

/// Returns a fine-tuned copy of `backend`; the input is left untouched.
/// With zero epochs the copy is identical.
pub fn fine_tune(
    backend: &dyn EncoderBackend,
    pairs: &[ContrastivePair],
    cfg: &FewShotConfig,
) -> Result<(Box<dyn EncoderBackend>, FineTuneReport)> {
    if pairs.is_empty() {
        return Err(Error::invalid("no contrastive pairs to train on"));
    }
    let mut tuned = backend.box_clone();
    if cfg.epochs == 0 {
        return Ok((tuned, FineTuneReport::default()));
    }
    if !backend.supports_training() {
        return Err(Error::Backend {
            backend: backend.identifier(),
            message: "backend does not support training".into(),
        });
    }
    let report = tuned.train_pairs(pairs, cfg)?;
    Ok((tuned, report))
}

/// L2-regularized logistic regression over embeddings, solved exactly as the
/// `lr` baseline.
pub fn train_head(embeddings: &[Vec<f64>], labels: &[Label], c: f64) -> Result<LinearModel> {
    let rows: Vec<SparseVector> = embeddings.iter().map(|e| SparseVector::from_dense(e)).collect();
    let model = baselines::train(&rows, labels, &Hyperparams::Lr { c }, 0)?;
    match model.learned {
        Learned::Linear(head) => Ok(head),
        Learned::Forest(_) => unreachable!("lr hyperparameters train a linear model"),
    }
}

#[derive(Debug, Clone)]
pub struct FewShotModel {
    pub encoder: Box<dyn EncoderBackend>,
    pub head: LinearModel,
    pub fine_tune: FineTuneReport,
}

/// `generate_pairs` → `fine_tune` → `embed` → `train_head`.
pub fn fewshot_train(
    train_set: &[BugReport],
    backend: &dyn EncoderBackend,
    cfg: &FewShotConfig,
) -> Result<FewShotModel> {
    cfg.validate()?;
    let pairs = generate_pairs(train_set, cfg.pairs_per_example, cfg.seed)?;
    let (encoder, report) = fine_tune(backend, &pairs, cfg)?;
    let texts: Vec<&str> = train_set.iter().map(|r| r.description.as_str()).collect();
    let embeddings = encoder.embed(&texts)?;
    let labels: Vec<Label> = train_set.iter().map(|r| r.label).collect();
    let head = train_head(&embeddings, &labels, cfg.head_c)?;
    Ok(FewShotModel {
        encoder,
        head,
        fine_tune: report,
    })
}

pub fn fewshot_score(model: &FewShotModel, texts: &[&str]) -> Result<Vec<f64>> {
    if texts.is_empty() {
        return Ok(Vec::new());
    }
    let embeddings = model.encoder.embed(texts)?;
    Ok(embeddings
        .iter()
        .map(|e| {
            let margin: f64 = e.iter().zip(&model.head.weights).map(|(a, w)| a * w).sum::<f64>() + model.head.bias;
            baselines::linear::sigmoid(margin)
        })
        .collect())
}
