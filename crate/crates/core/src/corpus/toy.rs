//! Synthetic, lexically separable bug-report corpus for offline runs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BugReport, Label, LabeledDataset};

const SECURITY_TERMS: &[&str] = &[
    "overflow", "injection", "xss", "csrf", "exploit", "vulnerability", "privilege",
    "escalation", "bypass", "unauthenticated", "credential", "leak", "traversal",
    "deserialization", "cve", "sanitize", "attacker", "malicious",
];

const ORDINARY_TERMS: &[&str] = &[
    "layout", "typo", "slow", "render", "button", "dialog", "refactor", "logging",
    "deprecated", "timeout", "upgrade", "dependency", "formatting", "locale",
    "tooltip", "pagination", "rename", "cleanup",
];

const FILLER: &[&str] = &[
    "the", "when", "component", "fails", "after", "request", "server", "page",
    "user", "with", "error", "module", "config", "version", "in", "on", "is",
    "handler", "query", "session",
];

#[derive(Debug, Clone)]
pub struct ToyCorpusSpec {
    pub size: usize,
    pub positive_ratio: f64,
    /// Class-specific terms per report.
    pub signal_terms: usize,
    /// Shared filler words per report.
    pub filler_terms: usize,
    pub seed: u64,
}

impl Default for ToyCorpusSpec {
    fn default() -> Self {
        Self {
            size: 40,
            positive_ratio: 0.5,
            signal_terms: 3,
            filler_terms: 6,
            seed: 7,
        }
    }
}

/// Generates `size` reports of which `round(size * positive_ratio)` are
/// security reports, in seeded random order.
pub fn toy_corpus(spec: &ToyCorpusSpec) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let positives = (spec.size as f64 * spec.positive_ratio).round() as usize;
    let mut labels: Vec<Label> = (0..spec.size)
        .map(|i| Label::from_bool(i < positives))
        .collect();
    labels.shuffle(&mut rng);

    let reports = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let vocab = if label.is_security() {
                SECURITY_TERMS
            } else {
                ORDINARY_TERMS
            };
            let mut words: Vec<&str> = Vec::with_capacity(spec.signal_terms + spec.filler_terms);
            for _ in 0..spec.signal_terms {
                words.push(vocab[rng.gen_range(0..vocab.len())]);
            }
            for _ in 0..spec.filler_terms {
                words.push(FILLER[rng.gen_range(0..FILLER.len())]);
            }
            words.shuffle(&mut rng);
            let mut text = words.join(" ");
            // Some noise for the cleaning rules to strip.
            if rng.gen_bool(0.3) {
                text.push_str(&format!(" (see https://issues.example.org/{})", rng.gen_range(100..999)));
            }
            if rng.gen_bool(0.3) {
                text.insert_str(0, &format!("[v{}.{}] ", rng.gen_range(1..4), rng.gen_range(0..10)));
            }
            BugReport::new(format!("TOY-{:04}", i + 1), text, label)
        })
        .collect();
    LabeledDataset::new("toy", reports).expect("generated ids are unique and texts non-empty")
}
