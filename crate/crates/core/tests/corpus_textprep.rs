use std::collections::{BTreeSet, HashSet};

use proptest::prelude::*;
use sbrfew_core::corpus::{load_dataset, write_csv, write_jsonl, BugReport, DataFormat, Label, LabeledDataset};
use sbrfew_core::textprep::{clean_text, fit_tfidf, preprocess, transform_tfidf};

fn dataset_strategy() -> impl Strategy<Value = LabeledDataset> {
    prop::collection::vec(("[A-Z]{1,4}-[0-9]{1,5}", "\\PC{0,60}", any::<bool>()), 1..40).prop_map(|rows| {
        let mut seen = HashSet::new();
        let reports = rows
            .into_iter()
            .filter(|(id, _, _)| seen.insert(id.clone()))
            .map(|(id, text, pos)| {
                // Descriptions must be non-blank.
                let text = if text.trim().is_empty() { format!("x{text}") } else { text };
                BugReport::new(id, text, Label::from_bool(pos))
            })
            .collect();
        LabeledDataset::new("roundtrip", reports).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn write_then_load_is_identity(ds in dataset_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        for (file, format) in [("roundtrip.csv", DataFormat::Csv), ("roundtrip.jsonl", DataFormat::Jsonl)] {
            let path = dir.path().join(file);
            match format {
                DataFormat::Csv => write_csv(&ds, &path).unwrap(),
                DataFormat::Jsonl => write_jsonl(&ds, &path).unwrap(),
            }
            let back = load_dataset(&path, format).unwrap();
            prop_assert_eq!(&back, &ds);
            let stats = back.stats();
            prop_assert_eq!(stats.total, back.len());
            prop_assert_eq!(stats.positives, back.labels().iter().filter(|l| l.is_security()).count());
        }
    }

    #[test]
    fn tfidf_matches_definition(docs in prop::collection::vec(prop::collection::vec("[a-e]{1,2}", 0..8), 1..12)) {
        let docs: Vec<Vec<String>> = docs;
        prop_assume!(docs.iter().any(|d| !d.is_empty()));
        let model = fit_tfidf(&docs).unwrap();
        let vocab: BTreeSet<&String> = docs.iter().flatten().collect();
        prop_assert_eq!(model.dimension(), vocab.len());
        let n = docs.len() as f64;
        for (col, token) in vocab.iter().enumerate() {
            prop_assert_eq!(model.vocabulary()[*token], col);
            let df = docs.iter().filter(|d| d.contains(token)).count() as f64;
            let idf = ((1.0 + n) / (1.0 + df)).ln() + 1.0;
            prop_assert!((model.idf(token).unwrap() - idf).abs() < 1e-12);
        }
        for doc in &docs {
            let v = transform_tfidf(&model, doc);
            let raw: Vec<f64> = vocab
                .iter()
                .map(|t| doc.iter().filter(|d| d == t).count() as f64 * model.idf(t).unwrap())
                .collect();
            let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            for (col, r) in raw.iter().enumerate() {
                let want = if norm > 0.0 { r / norm } else { 0.0 };
                prop_assert!((v.get(col) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cleaned_text_alphabet(raw in "\\PC{0,80}") {
        let c = clean_text(&raw);
        prop_assert!(c.as_str().chars().all(|ch| ch.is_ascii_lowercase() || ch == ' '));
        prop_assert!(!c.as_str().contains("  "));
        prop_assert_eq!(c.as_str(), c.as_str().trim());
        prop_assert_eq!(clean_text(c.as_str()), c);
    }
}

#[test]
fn urls_go_before_punctuation_mapping() {
    assert_eq!(
        preprocess("See https://x.org/a-b?c=1 and www.site.com/p, fixed in 2.4!"),
        vec!["see", "and", "fixed", "in"]
    );
}

#[test]
fn unseen_tokens_are_dropped() {
    let docs = vec![vec!["xss".to_string()], vec!["typo".to_string()]];
    let model = fit_tfidf(&docs).unwrap();
    let v = transform_tfidf(&model, &["csrf".to_string()]);
    assert_eq!(v.nnz(), 0);
    assert_eq!(v.dimension(), 2);
}
