//! Text cleaning and TF-IDF features for the classical baselines.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};

const URL_PREFIXES: [&str; 3] = ["http://", "https://", "www."];

/// Lowercase text made only of `a-z` words separated by single spaces.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct CleanText(String);

impl CleanText {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl AsRef<str> for CleanText {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Applies, in order: lowercase; delete URL spans (`http://`, `https://` or
/// `www.` up to the next whitespace); delete digits; map everything outside
/// `a-z` and space to a space; collapse and trim whitespace.
pub fn clean_text(raw: &str) -> CleanText {
    let lowered = raw.to_lowercase();
    let without_urls = strip_urls(&lowered);
    let mapped: String = without_urls
        .chars()
        .filter(|c| !c.is_numeric())
        .map(|c| if c.is_ascii_lowercase() { c } else { ' ' })
        .collect();
    CleanText(mapped.split_whitespace().collect::<Vec<_>>().join(" "))
}

fn strip_urls(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if URL_PREFIXES.iter().any(|p| rest.starts_with(p)) {
            let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
            rest = &rest[end..];
            continue;
        }
        out.push(c);
        rest = &rest[c.len_utf8()..];
    }
    out
}

pub fn tokenize(text: &CleanText) -> Vec<String> {
    if text.0.is_empty() {
        return Vec::new();
    }
    text.0.split(' ').map(str::to_owned).collect()
}

/// `clean_text` followed by `tokenize`.
pub fn preprocess(raw: &str) -> Vec<String> {
    tokenize(&clean_text(raw))
}

/// Sparse row vector with strictly increasing column indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
    dimension: usize,
}

impl SparseVector {
    /// Sorts and validates the entries; duplicate or out-of-range indices are rejected.
    pub fn new(dimension: usize, mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.sort_by_key(|&(i, _)| i);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::invalid(format!("duplicate index {}", w[0].0)));
            }
        }
        if let Some(&(i, _)) = entries.last() {
            if i >= dimension {
                return Err(Error::invalid(format!(
                    "index {i} out of range for dimension {dimension}"
                )));
            }
        }
        Ok(Self { entries, dimension })
    }

    pub fn zeros(dimension: usize) -> Self {
        Self {
            entries: Vec::new(),
            dimension,
        }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        Self {
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, &v)| (i, v))
                .collect(),
            dimension: values.len(),
        }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| v * dense[i]).sum()
    }

    pub fn norm_squared(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    vocabulary: BTreeMap<String, usize>,
    idf: Vec<f64>,
    n_docs: usize,
}

impl TfidfModel {
    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    pub fn idf(&self, token: &str) -> Option<f64> {
        self.vocabulary.get(token).map(|&i| self.idf[i])
    }

    pub fn idf_weights(&self) -> &[f64] {
        &self.idf
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn dimension(&self) -> usize {
        self.idf.len()
    }
}

/// Fits the vocabulary (all distinct tokens, lexicographic order) and smoothed
/// idf weights `ln((1 + N) / (1 + df)) + 1`.
pub fn fit_tfidf<D: AsRef<[String]>>(docs: &[D]) -> Result<TfidfModel> {
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in docs {
        let distinct: BTreeSet<&str> = doc.as_ref().iter().map(String::as_str).collect();
        for t in distinct {
            *df.entry(t).or_default() += 1;
        }
    }
    if df.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let n = docs.len() as f64;
    let mut vocabulary = BTreeMap::new();
    let mut idf = Vec::with_capacity(df.len());
    for (index, (token, count)) in df.into_iter().enumerate() {
        vocabulary.insert(token.to_owned(), index);
        idf.push(((1.0 + n) / (1.0 + count as f64)).ln() + 1.0);
    }
    Ok(TfidfModel {
        vocabulary,
        idf,
        n_docs: docs.len(),
    })
}

/// Term count × idf per in-vocabulary token, L2-normalized unless all zero.
pub fn transform_tfidf(model: &TfidfModel, doc: &[String]) -> SparseVector {
    let mut counts: HashMap<usize, f64> = HashMap::new();
    for token in doc {
        if let Some(&col) = model.vocabulary.get(token) {
            *counts.entry(col).or_default() += 1.0;
        }
    }
    let mut entries: Vec<(usize, f64)> = counts
        .into_iter()
        .map(|(col, tf)| (col, tf * model.idf[col]))
        .collect();
    entries.sort_by_key(|&(i, _)| i);
    let norm = entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for e in &mut entries {
            e.1 /= norm;
        }
    }
    SparseVector {
        entries,
        dimension: model.dimension(),
    }
}
