//! Offline reference encoder: signed feature hashing of word unigrams, a
//! trainable square projection (identity at start), then L2 normalization.

use super::{batch_schedule, ContrastivePair, EncoderBackend, FewShotConfig, FineTuneReport};
use crate::error::{Error, Result};

pub const DEFAULT_HASH_DIMENSION: usize = 256;

/// Stand-in token for texts with no word characters.
const EMPTY_TOKEN: &str = "\u{0}empty";

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Dot product of unit vectors, exactly 1 for identical embeddings.
fn cosine(a: &[f64], b: &[f64]) -> f64 {
    if a == b {
        return 1.0;
    }
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HashEncoder {
    dimension: usize,
    /// Row-major `dimension × dimension`.
    projection: Vec<f64>,
}

impl HashEncoder {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("hash encoder dimension must be positive"));
        }
        let mut projection = vec![0.0; dimension * dimension];
        for i in 0..dimension {
            projection[i * dimension + i] = 1.0;
        }
        Ok(Self {
            dimension,
            projection,
        })
    }

    pub fn projection(&self) -> &[f64] {
        &self.projection
    }

    pub fn projection_mut(&mut self) -> &mut [f64] {
        &mut self.projection
    }

    /// Sparse signed bucket counts, sorted by bucket.
    pub fn features(&self, text: &str) -> Vec<(usize, f64)> {
        let lowered = text.to_lowercase();
        let mut tokens: Vec<&str> = lowered
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .collect();
        if tokens.is_empty() {
            tokens.push(EMPTY_TOKEN);
        }
        let mut acc: Vec<(usize, f64)> = tokens
            .iter()
            .map(|t| {
                let h = fnv1a(t.as_bytes());
                let sign = if splitmix64(h) & 1 == 0 { 1.0 } else { -1.0 };
                ((h % self.dimension as u64) as usize, sign)
            })
            .collect();
        acc.sort_by_key(|&(i, _)| i);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(acc.len());
        for (i, v) in acc {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => merged.push((i, v)),
            }
        }
        merged
    }

    /// Unnormalized projection `W x`.
    fn project(&self, features: &[(usize, f64)]) -> Vec<f64> {
        let d = self.dimension;
        let mut z = vec![0.0; d];
        for (r, zr) in z.iter_mut().enumerate() {
            let row = &self.projection[r * d..(r + 1) * d];
            *zr = features.iter().map(|&(j, v)| row[j] * v).sum();
        }
        z
    }

    fn encode(&self, features: &[(usize, f64)]) -> Result<(Vec<f64>, f64)> {
        let z = self.project(features);
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 1e-12 && norm.is_finite()) {
            return Err(Error::Backend {
                backend: self.identifier(),
                message: format!("degenerate embedding (norm {norm})"),
            });
        }
        Ok((z.into_iter().map(|v| v / norm).collect(), norm))
    }

    /// Mean squared error between pair cosine and target.
    pub fn pair_loss(&self, pairs: &[ContrastivePair]) -> Result<f64> {
        let mut total = 0.0;
        for p in pairs {
            let (ea, _) = self.encode(&self.features(&p.text_a))?;
            let (eb, _) = self.encode(&self.features(&p.text_b))?;
            let cos = cosine(&ea, &eb);
            total += (cos - p.target).powi(2);
        }
        Ok(total / pairs.len().max(1) as f64)
    }

    /// Mean pair loss and its gradient with respect to the projection (row-major).
    pub fn pair_loss_gradient(&self, pairs: &[ContrastivePair]) -> Result<(f64, Vec<f64>)> {
        let d = self.dimension;
        let mut grad = vec![0.0; d * d];
        let mut total = 0.0;
        let scale = 1.0 / pairs.len().max(1) as f64;
        for p in pairs {
            let xa = self.features(&p.text_a);
            let xb = self.features(&p.text_b);
            let (ea, na) = self.encode(&xa)?;
            let (eb, nb) = self.encode(&xb)?;
            let cos = cosine(&ea, &eb);
            total += (cos - p.target).powi(2);
            let dcos = 2.0 * (cos - p.target) * scale;
            if dcos == 0.0 {
                continue;
            }
            // d cos / d z_a = (e_b - cos e_a) / |z_a|, and symmetrically for b.
            for (own, other, norm, x) in [(&ea, &eb, na, &xa), (&eb, &ea, nb, &xb)] {
                for r in 0..d {
                    let dz = dcos * (other[r] - cos * own[r]) / norm;
                    if dz == 0.0 {
                        continue;
                    }
                    let row = &mut grad[r * d..(r + 1) * d];
                    for &(j, v) in x.iter() {
                        row[j] += dz * v;
                    }
                }
            }
        }
        Ok((total * scale, grad))
    }
}

impl EncoderBackend for HashEncoder {
    fn identifier(&self) -> String {
        format!("hash-{}", self.dimension)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        texts
            .iter()
            .map(|t| self.encode(&self.features(t)).map(|(e, _)| e))
            .collect()
    }

    fn supports_training(&self) -> bool {
        true
    }

    /// Mini-batch gradient descent on the projection.
    fn train_pairs(&mut self, pairs: &[ContrastivePair], cfg: &FewShotConfig) -> Result<FineTuneReport> {
        let mut epoch_losses = Vec::with_capacity(cfg.epochs);
        for epoch in batch_schedule(pairs.len(), cfg) {
            let mut weighted = 0.0;
            for batch in epoch {
                let chunk: Vec<ContrastivePair> = batch.iter().map(|&i| pairs[i].clone()).collect();
                let (loss, grad) = self.pair_loss_gradient(&chunk)?;
                weighted += loss * chunk.len() as f64;
                for (w, g) in self.projection.iter_mut().zip(&grad) {
                    *w -= cfg.learning_rate * g;
                }
            }
            epoch_losses.push(weighted / pairs.len() as f64);
        }
        Ok(FineTuneReport { epoch_losses })
    }

    fn box_clone(&self) -> Box<dyn EncoderBackend> {
        Box::new(self.clone())
    }
}
