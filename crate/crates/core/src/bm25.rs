//! Okapi BM25 over an in-memory inverted index.
//!
//! Citation markers are indexed as ordinary terms (their text is the cited
//! id) so document lengths match the training text, while queries never
//! carry markers and therefore never match them.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::TrainingDocument;
use crate::error::{Error, Result};
use crate::jsonl;
use crate::ranking::{RankedList, Recommender};

const INDEX_FORMAT: &str = "citerec-bm25-index";
const INDEX_VERSION: u32 = 1;

/// Default depth of a component list fed to fusion.
pub const DEFAULT_TOP_K: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bm25Params {
    /// Term-frequency saturation.
    pub k1: f64,
    /// Length normalization, in `[0, 1]`.
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self> {
        let p = Bm25Params { k1, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k1 >= 0.0 && self.k1.is_finite()) {
            return Err(Error::Config(format!("bm25 k1 must be >= 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Config(format!("bm25 b must be in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertedIndex {
    doc_ids: Vec<String>,
    doc_lengths: Vec<u32>,
    avg_doc_length: f64,
    /// Postings sorted by document position; `df(t)` is the list length.
    postings: BTreeMap<String, Vec<Posting>>,
    #[serde(skip)]
    lookup: std::collections::HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    format: String,
    version: u32,
    index: InvertedIndex,
}

/// Robertson–Spärck-Jones IDF with the `+1` inside the log, never negative.
pub fn idf(doc_count: usize, df: usize) -> f64 {
    let n = doc_count as f64;
    let df = df as f64;
    ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
}

/// Saturated, length-normalized term-frequency factor.
pub fn tf_component(params: &Bm25Params, tf: u32, doc_len: u32, avg_doc_length: f64) -> f64 {
    let tf = tf as f64;
    let norm = 1.0 - params.b + params.b * doc_len as f64 / avg_doc_length;
    tf * (params.k1 + 1.0) / (tf + params.k1 * norm)
}

impl InvertedIndex {
    pub fn build(docs: &[TrainingDocument]) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::InvalidInput("cannot index an empty corpus".into()));
        }
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_ids = Vec::with_capacity(docs.len());
        let mut doc_lengths = Vec::with_capacity(docs.len());
        for (pos, doc) in docs.iter().enumerate() {
            let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
            for tok in &doc.tokens {
                *tf.entry(tok.text()).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term.to_string()).or_default().push(Posting {
                    doc: pos as u32,
                    tf: count,
                });
            }
            doc_ids.push(doc.id.clone());
            doc_lengths.push(doc.tokens.len() as u32);
        }
        let total: u64 = doc_lengths.iter().map(|&l| l as u64).sum();
        let mut index = InvertedIndex {
            avg_doc_length: total as f64 / docs.len() as f64,
            doc_ids,
            doc_lengths,
            postings,
            lookup: Default::default(),
        };
        index.rebuild_lookup()?;
        Ok(index)
    }

    fn rebuild_lookup(&mut self) -> Result<()> {
        self.lookup = self
            .doc_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
        if self.lookup.len() != self.doc_ids.len() {
            return Err(Error::InvalidInput("duplicate document id in index".into()));
        }
        Ok(())
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_length(&self, doc_id: &str) -> Option<u32> {
        self.lookup.get(doc_id).map(|&i| self.doc_lengths[i as usize])
    }

    pub fn doc_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn term_frequency(&self, term: &str, doc_id: &str) -> u32 {
        let Some(&pos) = self.lookup.get(doc_id) else {
            return 0;
        };
        let list = self.postings(term);
        list.binary_search_by_key(&pos, |p| p.doc)
            .map_or(0, |i| list[i].tf)
    }

    /// BM25 score of one document. Repeated query terms count once per occurrence.
    pub fn score(&self, params: &Bm25Params, query: &[String], doc_id: &str) -> Result<f64> {
        let &pos = self
            .lookup
            .get(doc_id)
            .ok_or_else(|| Error::UnknownDocument(doc_id.to_string()))?;
        let len = self.doc_lengths[pos as usize];
        let n = self.doc_count();
        let mut score = 0.0;
        for term in query {
            let list = self.postings(term);
            if let Ok(i) = list.binary_search_by_key(&pos, |p| p.doc) {
                score += idf(n, list.len())
                    * tf_component(params, list[i].tf, len, self.avg_doc_length);
            }
        }
        Ok(score)
    }

    /// The `k` best documents with a positive score; ties go to the smaller id.
    pub fn top_k(&self, params: &Bm25Params, query: &[String], k: usize) -> Vec<(String, f64)> {
        let n = self.doc_count();
        let mut acc = vec![0.0f64; n];
        let mut touched = vec![false; n];
        for term in query {
            let list = self.postings(term);
            if list.is_empty() {
                continue;
            }
            let weight = idf(n, list.len());
            for p in list {
                let d = p.doc as usize;
                acc[d] += weight
                    * tf_component(params, p.tf, self.doc_lengths[d], self.avg_doc_length);
                touched[d] = true;
            }
        }
        let mut hits: Vec<(usize, f64)> = (0..n)
            .filter(|&d| touched[d] && acc[d] > 0.0)
            .map(|d| (d, acc[d]))
            .collect();
        hits.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then_with(|| self.doc_ids[a.0].cmp(&self.doc_ids[b.0]))
        });
        hits.truncate(k);
        hits.into_iter()
            .map(|(d, s)| (self.doc_ids[d].clone(), s))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        jsonl::write_json(
            path,
            &IndexFile {
                format: INDEX_FORMAT.into(),
                version: INDEX_VERSION,
                index: self.clone(),
            },
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: IndexFile = jsonl::read_json(path)?;
        if file.format != INDEX_FORMAT {
            return Err(Error::format(path, format!("not a BM25 index ({})", file.format)));
        }
        if file.version != INDEX_VERSION {
            return Err(Error::Version {
                kind: "bm25 index",
                found: file.version,
                expected: INDEX_VERSION,
            });
        }
        let mut index = file.index;
        index.rebuild_lookup()?;
        Ok(index)
    }
}

/// BM25 as a [`Recommender`].
#[derive(Debug, Clone)]
pub struct Bm25Recommender {
    pub label: String,
    pub index: InvertedIndex,
    pub params: Bm25Params,
}

impl Recommender for Bm25Recommender {
    fn label(&self) -> &str {
        &self.label
    }

    fn recommend(&self, query: &[String], k: usize) -> Result<RankedList> {
        Ok(RankedList::new(
            self.label.clone(),
            self.index.top_k(&self.params, query, k),
        ))
    }
}
