//! Documents, vocabulary and the L2-normalised TF-IDF feature space.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default minimum document frequency for a retained term.
pub const DEFAULT_MIN_DF: usize = 3;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("no documents given")]
    Empty,
    #[error("no term reaches the minimum document frequency of {min_df}")]
    AllTermsFiltered { min_df: usize },
    #[error("query shares no term with the vocabulary")]
    EmptyAfterVectorize,
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("document `{id}` has non-positive stratum weight {weight}")]
    BadStratumWeight { id: String, weight: f64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<String, u8>,
    #[serde(default = "default_weight")]
    pub stratum_weight: f64,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            labels: BTreeMap::new(),
            stratum_weight: 1.0,
        }
    }

    pub fn with_label(mut self, topic: impl Into<String>, label: u8) -> Self {
        self.labels.insert(topic.into(), label);
        self
    }

    pub fn is_relevant(&self, topic: &str) -> bool {
        self.labels.get(topic).copied().unwrap_or(0) == 1
    }
}

/// A validated document collection: ids unique, stratum weights positive.
#[derive(Debug, Clone)]
pub struct Corpus {
    docs: Vec<Document>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(docs: Vec<Document>) -> Result<Self, CorpusError> {
        if docs.is_empty() {
            return Err(CorpusError::Empty);
        }
        let mut index = HashMap::with_capacity(docs.len());
        for (row, doc) in docs.iter().enumerate() {
            if !(doc.stratum_weight > 0.0 && doc.stratum_weight.is_finite()) {
                return Err(CorpusError::BadStratumWeight {
                    id: doc.id.clone(),
                    weight: doc.stratum_weight,
                });
            }
            if index.insert(doc.id.clone(), row).is_some() {
                return Err(CorpusError::DuplicateId(doc.id.clone()));
            }
        }
        Ok(Self { docs, index })
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.index.get(id).map(|&row| &self.docs[row])
    }

    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Sorted list of every topic that appears in some document's labels.
    pub fn topics(&self) -> Vec<String> {
        let mut topics: Vec<String> = self
            .docs
            .iter()
            .flat_map(|d| d.labels.keys().cloned())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        topics.sort();
        topics
    }

    /// Ground-truth labels for one topic, aligned with document order.
    pub fn labels_for(&self, topic: &str) -> Vec<bool> {
        self.docs.iter().map(|d| d.is_relevant(topic)).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.docs.iter().map(|d| d.stratum_weight).collect()
    }
}

/// Lowercased runs of unicode alphanumerics, in order, duplicates kept.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    df: Vec<usize>,
    idf: Vec<f64>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from `(term, df, idf)` entries. Entries are sorted
    /// by term so indices are always lexicographic.
    pub fn from_entries(mut entries: Vec<(String, usize, f64)>) -> Self {
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        entries.dedup_by(|a, b| a.0 == b.0);
        let mut terms = Vec::with_capacity(entries.len());
        let mut df = Vec::with_capacity(entries.len());
        let mut idf = Vec::with_capacity(entries.len());
        for (term, d, i) in entries {
            terms.push(term);
            df.push(d);
            idf.push(i);
        }
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            terms,
            df,
            idf,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn df(&self, index: usize) -> usize {
        self.df[index]
    }

    pub fn idf(&self, index: usize) -> f64 {
        self.idf[index]
    }

    /// `(term, index, df, idf)` in index order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, usize, usize, f64)> + '_ {
        self.terms
            .iter()
            .enumerate()
            .map(move |(i, t)| (t.as_str(), i, self.df[i], self.idf[i]))
    }
}

/// Keeps every term present in at least `min_df` distinct documents, with
/// `idf = ln(n / df)`.
pub fn build_vocabulary(docs: &[Document], min_df: usize) -> Result<Vocabulary, CorpusError> {
    if docs.is_empty() {
        return Err(CorpusError::Empty);
    }
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for doc in docs {
        let distinct: HashSet<String> = tokenize(&doc.text).into_iter().collect();
        for term in distinct {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    let n = docs.len() as f64;
    let entries: Vec<(String, usize, f64)> = df
        .into_iter()
        .filter(|&(_, d)| d >= min_df)
        .map(|(t, d)| (t, d, (n / d as f64).ln()))
        .collect();
    if entries.is_empty() {
        return Err(CorpusError::AllTermsFiltered { min_df });
    }
    Ok(Vocabulary::from_entries(entries))
}

/// Sparse row with strictly increasing indices and no stored zeros.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sorts, sums duplicate indices and drops zeros.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_by_key(|&(i, _)| i);
        let mut indices: Vec<u32> = Vec::with_capacity(pairs.len());
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if indices.last() == Some(&i) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(i);
                values.push(v);
            }
        }
        let (indices, values) = indices
            .into_iter()
            .zip(values)
            .filter(|&(_, v)| v != 0.0)
            .unzip();
        Self { indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_zero(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| (i as usize, v))
    }

    pub fn get(&self, index: u32) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let norm = self.norm();
        if norm > 0.0 {
            for v in &mut self.values {
                *v /= norm;
            }
        }
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut a, mut b, mut acc) = (0, 0, 0.0);
        while a < self.indices.len() && b < other.indices.len() {
            match self.indices[a].cmp(&other.indices[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[a] * other.values[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        acc
    }

    pub fn max_index(&self) -> Option<usize> {
        self.indices.last().map(|&i| i as usize)
    }
}

/// Row-per-document TF-IDF matrix over a fixed vocabulary.
#[derive(Debug, Clone)]
pub struct CorpusMatrix {
    rows: Vec<SparseVector>,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    vocab: Vocabulary,
}

impl CorpusMatrix {
    pub fn from_rows(
        ids: Vec<String>,
        rows: Vec<SparseVector>,
        vocab: Vocabulary,
    ) -> Result<Self, CorpusError> {
        assert_eq!(ids.len(), rows.len(), "one id per row");
        let mut index = HashMap::with_capacity(ids.len());
        for (row, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), row).is_some() {
                return Err(CorpusError::DuplicateId(id.clone()));
            }
        }
        if let Some(bad) = rows
            .iter()
            .position(|r| r.max_index().is_some_and(|m| m >= vocab.len()))
        {
            return Err(CorpusError::Parse {
                line: bad + 1,
                message: "column index outside the vocabulary".into(),
            });
        }
        Ok(Self {
            rows,
            ids,
            index,
            vocab,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.vocab.len()
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn row(&self, row: usize) -> &SparseVector {
        &self.rows[row]
    }

    pub fn rows(&self) -> &[SparseVector] {
        &self.rows
    }

    pub fn id(&self, row: usize) -> &str {
        &self.ids[row]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }
}

fn vectorize_text(text: &str, vocab: &Vocabulary) -> SparseVector {
    let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
    for term in tokenize(text) {
        if let Some(i) = vocab.index_of(&term) {
            *counts.entry(i as u32).or_insert(0.0) += 1.0;
        }
    }
    let pairs = counts
        .into_iter()
        .map(|(i, tf)| (i, tf * vocab.idf(i as usize)))
        .collect();
    let mut v = SparseVector::from_pairs(pairs);
    v.normalize();
    v
}

/// TF-IDF weights, then L2 row normalisation. Out-of-vocabulary terms are
/// dropped; documents with no surviving weight stay zero rows.
pub fn vectorize(docs: &[Document], vocab: &Vocabulary) -> CorpusMatrix {
    let rows = docs.iter().map(|d| vectorize_text(&d.text, vocab)).collect();
    let ids = docs.iter().map(|d| d.id.clone()).collect();
    CorpusMatrix::from_rows(ids, rows, vocab.clone()).expect("document ids already validated")
}

/// Vectorises a free-text query exactly like a document so it can serve as
/// a synthetic positive seed.
pub fn synthetic_positive(query: &str, vocab: &Vocabulary) -> Result<SparseVector, CorpusError> {
    let v = vectorize_text(query, vocab);
    if v.is_zero() {
        return Err(CorpusError::EmptyAfterVectorize);
    }
    Ok(v)
}
