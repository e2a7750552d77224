//! Dual document embeddings (hyperdoc2vec) and plain paragraph vectors.
//!
//! Every paper gets an IN vector (its role as a citing document) and an OUT
//! vector (its role as a cited document). Training interleaves two
//! negative-sampling objectives while walking each document's token stream:
//!
//! * at a word, `h = mean(d_I(doc), word_in(window))` predicts the word's
//!   output vector against sampled word negatives;
//! * at a marker naming `t`, `h = mean(d_I(doc), word_in(window))` predicts
//!   `d_O(t)` against documents sampled by citation frequency^0.75.
//!
//! Doc2vec runs the word objective only and copies `d_I` into `d_O`.
//!
//! All arithmetic is `f64` and single-threaded; a fixed seed gives a
//! bitwise-identical model.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::TrainingDocument;
use crate::error::{Error, Result};
use crate::jsonl;
use crate::ranking::{RankedList, Recommender};
use crate::textproc::Token;

const MODEL_FORMAT: &str = "citerec-embedding";
const MODEL_VERSION: u32 = 1;
/// Offset applied to the seed for doc2vec query inference.
const INFER_SEED_OFFSET: u64 = 0x5eed_0001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub dim: usize,
    /// Words taken on each side of a center word or marker.
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    /// word2vec-style frequent-word subsampling threshold; 0 disables it.
    pub subsample: f64,
    pub seed: u64,
    /// Weight of the OUT cosine in INOUT scoring (the IN cosine gets the rest).
    pub inout_weight: f64,
    /// Passes over the query when fitting a doc2vec context vector.
    pub infer_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            lr_start: 0.025,
            lr_end: 0.0001,
            subsample: 0.0,
            seed: 1,
            inout_weight: 0.5,
            infer_epochs: 20,
        }
    }
}

impl TrainConfig {
    /// `epochs = 0` is accepted and yields the initialization.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("embedding config: {m}")));
        if self.dim < 2 {
            return bad("dim must be >= 2");
        }
        if self.window < 1 {
            return bad("window must be >= 1");
        }
        if self.negatives < 1 {
            return bad("negatives must be >= 1");
        }
        if !(self.lr_start > 0.0 && self.lr_end >= 0.0 && self.lr_end <= self.lr_start) {
            return bad("learning rate must satisfy 0 <= lr_end <= lr_start, lr_start > 0");
        }
        if self.subsample < 0.0 {
            return bad("subsample must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.inout_weight) {
            return bad("inout_weight must be in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Hd2v,
    Doc2vec,
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn fill_uniform(&mut self, rng: &mut impl Rng, half_width: f64) {
        for v in &mut self.data {
            *v = rng.random_range(-half_width..half_width);
        }
    }

    fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// A trainable parameter row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Param {
    WordIn(usize),
    WordOut(usize),
    DocIn(usize),
    DocOut(usize),
}

/// Input rows averaged into the hidden vector `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Input {
    Word(usize),
    Doc(usize),
}

/// Output rows scored against `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Output {
    Word(usize),
    Doc(usize),
}

/// One negative-sampling example: positive `target`, label-0 `negatives`.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub inputs: Vec<Input>,
    pub target: Output,
    pub negatives: Vec<Output>,
}

/// Sparse gradient of one example's loss.
#[derive(Debug, Clone, Default)]
pub struct Gradient {
    pub loss: f64,
    pub entries: Vec<(Param, Vec<f64>)>,
}

/// Word objective at `center` of `words`: the doc vector plus up to
/// `window` words each side predict the center word.
pub fn content_example(
    doc: usize,
    words: &[usize],
    center: usize,
    window: usize,
    negatives: Vec<usize>,
) -> Example {
    let lo = center.saturating_sub(window);
    let hi = (center + window + 1).min(words.len());
    let mut inputs = vec![Input::Doc(doc)];
    inputs.extend((lo..hi).filter(|&j| j != center).map(|j| Input::Word(words[j])));
    Example {
        inputs,
        target: Output::Word(words[center]),
        negatives: negatives.into_iter().map(Output::Word).collect(),
    }
}

/// Citation objective for a marker sitting before `words[pos]`: the citing
/// doc vector plus `window` words each side predict the cited doc's OUT vector.
pub fn citation_example(
    doc: usize,
    words: &[usize],
    pos: usize,
    window: usize,
    cited: usize,
    negatives: Vec<usize>,
) -> Example {
    let lo = pos.saturating_sub(window);
    let hi = (pos + window).min(words.len());
    let mut inputs = vec![Input::Doc(doc)];
    inputs.extend(words[lo..hi].iter().map(|&w| Input::Word(w)));
    Example {
        inputs,
        target: Output::Doc(cited),
        negatives: negatives.into_iter().map(Output::Doc).collect(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let denom = norm(a) * norm(b);
    if denom == 0.0 {
        0.0
    } else {
        (dot(a, b) / denom).clamp(-1.0, 1.0)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-ln σ(x)`, computed without overflow.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Loss `-ln σ(u⁺·h) - Σ ln σ(-u⁻·h)` and its gradient. `grad_h` receives
/// dL/dh; `out_grads[i]` receives dL/du for `outputs[i]` (positive first).
fn negative_sampling(
    h: &[f64],
    outputs: &[&[f64]],
    grad_h: &mut [f64],
    out_grads: &mut [Vec<f64>],
) -> f64 {
    grad_h.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    for (i, u) in outputs.iter().enumerate() {
        let x = dot(u, h);
        let (label, l) = if i == 0 {
            (1.0, neg_log_sigmoid(x))
        } else {
            (0.0, neg_log_sigmoid(-x))
        };
        loss += l;
        let g = sigmoid(x) - label;
        for (gh, uj) in grad_h.iter_mut().zip(u.iter()) {
            *gh += g * uj;
        }
        out_grads[i].clear();
        out_grads[i].extend(h.iter().map(|hj| g * hj));
    }
    loss
}

/// Trained word and document vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSpace {
    kind: ModelKind,
    dim: usize,
    config: TrainConfig,
    words: Vec<String>,
    word_counts: Vec<u64>,
    docs: Vec<String>,
    /// Number of markers naming each document.
    doc_counts: Vec<u64>,
    word_in: Matrix,
    word_out: Matrix,
    doc_in: Matrix,
    doc_out: Matrix,
    #[serde(skip)]
    word_index: HashMap<String, usize>,
    #[serde(skip)]
    doc_index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    format: String,
    version: u32,
    kind: ModelKind,
    dim: usize,
    vocab_size: usize,
    doc_count: usize,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    header: ModelHeader,
    space: EmbeddingSpace,
}

/// Query representation from [`EmbeddingSpace::infer_context_vector`].
#[derive(Debug, Clone, PartialEq)]
pub struct ContextVector {
    pub vector: Vec<f64>,
    /// Set when no query word was in the vocabulary; `vector` is then zero.
    pub all_oov: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScoreMode {
    /// cos(q, d_O)
    Out,
    /// w·cos(q, d_O) + (1-w)·cos(q, d_I)
    InOut { out_weight: f64 },
    /// cos(q, d_I); used for doc2vec
    In,
}

struct PreparedDoc {
    row: usize,
    words: Vec<usize>,
    /// (marker position in `words`, cited doc row)
    markers: Vec<(usize, usize)>,
    /// Token-stream order of events: `Ok(word position)` or `Err(marker index)`.
    events: Vec<std::result::Result<usize, usize>>,
}

impl EmbeddingSpace {
    /// Vocabulary, document table and initial vectors: `word_in` and `d_I`
    /// uniform in `[-0.5/dim, 0.5/dim)`, output vectors and `d_O` zero.
    pub fn initialize(kind: ModelKind, docs: &[TrainingDocument], config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        if docs.is_empty() {
            return Err(Error::InvalidInput("cannot train embeddings on an empty corpus".into()));
        }
        let mut vocab: BTreeMap<&str, u64> = BTreeMap::new();
        for w in docs.iter().flat_map(|d| d.words()) {
            *vocab.entry(w).or_default() += 1;
        }
        let doc_ids: Vec<String> = docs.iter().map(|d| d.id.clone()).collect();
        let doc_index: HashMap<String, usize> =
            doc_ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        if doc_index.len() != doc_ids.len() {
            return Err(Error::InvalidInput("duplicate document id in training corpus".into()));
        }
        let mut doc_counts = vec![0u64; doc_ids.len()];
        for id in docs.iter().flat_map(|d| d.markers()) {
            if let Some(&i) = doc_index.get(id) {
                doc_counts[i] += 1;
            }
        }

        let dim = config.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut word_in = Matrix::zeros(vocab.len(), dim);
        let mut doc_in = Matrix::zeros(doc_ids.len(), dim);
        word_in.fill_uniform(&mut rng, 0.5 / dim as f64);
        doc_in.fill_uniform(&mut rng, 0.5 / dim as f64);

        let words: Vec<String> = vocab.keys().map(|w| w.to_string()).collect();
        let word_index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Ok(EmbeddingSpace {
            kind,
            dim,
            config: config.clone(),
            word_counts: vocab.values().copied().collect(),
            words,
            docs: doc_ids,
            doc_counts,
            word_out: Matrix::zeros(vocab.len(), dim),
            word_in,
            doc_in,
            doc_out: Matrix::zeros(docs.len(), dim),
            word_index,
            doc_index,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn vocab_size(&self) -> usize {
        self.words.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.docs
    }

    pub fn word_id(&self, word: &str) -> Option<usize> {
        self.word_index.get(word).copied()
    }

    pub fn doc_id(&self, id: &str) -> Option<usize> {
        self.doc_index.get(id).copied()
    }

    pub fn word_in(&self, word: &str) -> Option<&[f64]> {
        self.word_id(word).map(|i| self.word_in.row(i))
    }

    pub fn doc_in(&self, id: &str) -> Option<&[f64]> {
        self.doc_id(id).map(|i| self.doc_in.row(i))
    }

    pub fn doc_out(&self, id: &str) -> Option<&[f64]> {
        self.doc_id(id).map(|i| self.doc_out.row(i))
    }

    pub fn param(&self, p: Param) -> &[f64] {
        match p {
            Param::WordIn(i) => self.word_in.row(i),
            Param::WordOut(i) => self.word_out.row(i),
            Param::DocIn(i) => self.doc_in.row(i),
            Param::DocOut(i) => self.doc_out.row(i),
        }
    }

    pub fn param_mut(&mut self, p: Param) -> &mut [f64] {
        match p {
            Param::WordIn(i) => self.word_in.row_mut(i),
            Param::WordOut(i) => self.word_out.row_mut(i),
            Param::DocIn(i) => self.doc_in.row_mut(i),
            Param::DocOut(i) => self.doc_out.row_mut(i),
        }
    }

    /// True when every vector is finite.
    pub fn is_finite(&self) -> bool {
        self.word_in.all_finite()
            && self.word_out.all_finite()
            && self.doc_in.all_finite()
            && self.doc_out.all_finite()
    }

    fn input_param(i: Input) -> Param {
        match i {
            Input::Word(w) => Param::WordIn(w),
            Input::Doc(d) => Param::DocIn(d),
        }
    }

    fn output_param(o: Output) -> Param {
        match o {
            Output::Word(w) => Param::WordOut(w),
            Output::Doc(d) => Param::DocOut(d),
        }
    }

    fn hidden(&self, inputs: &[Input]) -> Vec<f64> {
        let mut h = vec![0.0; self.dim];
        for &i in inputs {
            for (hj, v) in h.iter_mut().zip(self.param(Self::input_param(i))) {
                *hj += v;
            }
        }
        let c = inputs.len() as f64;
        h.iter_mut().for_each(|v| *v /= c);
        h
    }

    pub fn example_loss(&self, ex: &Example) -> f64 {
        self.example_gradient(ex).loss
    }

    /// Analytic gradient of the example's loss with respect to every row it touches.
    pub fn example_gradient(&self, ex: &Example) -> Gradient {
        let h = self.hidden(&ex.inputs);
        let outputs: Vec<Output> = std::iter::once(ex.target)
            .chain(ex.negatives.iter().copied())
            .collect();
        let rows: Vec<&[f64]> = outputs
            .iter()
            .map(|&o| self.param(Self::output_param(o)))
            .collect();
        let mut grad_h = vec![0.0; self.dim];
        let mut out_grads = vec![Vec::with_capacity(self.dim); rows.len()];
        let loss = negative_sampling(&h, &rows, &mut grad_h, &mut out_grads);

        let c = ex.inputs.len() as f64;
        let grad_in: Vec<f64> = grad_h.iter().map(|g| g / c).collect();
        let mut entries: Vec<(Param, Vec<f64>)> = ex
            .inputs
            .iter()
            .map(|&i| (Self::input_param(i), grad_in.clone()))
            .collect();
        entries.extend(
            outputs
                .into_iter()
                .map(Self::output_param)
                .zip(out_grads),
        );
        Gradient { loss, entries }
    }

    /// One SGD step; returns the example loss before the update.
    pub fn sgd_step(&mut self, ex: &Example, lr: f64) -> f64 {
        let grad = self.example_gradient(ex);
        for (p, g) in &grad.entries {
            for (v, gj) in self.param_mut(*p).iter_mut().zip(g) {
                *v -= lr * gj;
            }
        }
        grad.loss
    }

    fn prepare(&self, docs: &[TrainingDocument]) -> Vec<PreparedDoc> {
        docs.iter()
            .enumerate()
            .map(|(row, doc)| {
                let mut words = Vec::new();
                let mut markers = Vec::new();
                let mut events = Vec::new();
                for tok in &doc.tokens {
                    match tok {
                        Token::Word(w) => {
                            events.push(Ok(words.len()));
                            words.push(self.word_index[w.as_str()]);
                        }
                        Token::Cite(id) => {
                            if let Some(&t) = self.doc_index.get(id.as_str()) {
                                events.push(Err(markers.len()));
                                markers.push((words.len(), t));
                            }
                        }
                    }
                }
                PreparedDoc {
                    row,
                    words,
                    markers,
                    events,
                }
            })
            .collect()
    }

    fn run_training(&mut self, docs: &[TrainingDocument]) -> Result<()> {
        let cfg = self.config.clone();
        if cfg.epochs == 0 {
            return Ok(());
        }
        let prepared = self.prepare(docs);
        let with_citations = self.kind == ModelKind::Hd2v;
        let word_sampler = WeightedIndex::new(self.word_counts.iter().map(|&c| (c as f64).powf(0.75)))
            .map_err(|e| Error::InvalidInput(format!("no words to train on: {e}")))?;
        let doc_sampler = if with_citations {
            Some(
                WeightedIndex::new(self.doc_counts.iter().map(|&c| (c as f64).powf(0.75)))
                    .map_err(|_| Error::InvalidInput("corpus has no citation markers".into()))?,
            )
        } else {
            None
        };

        let total_words: u64 = self.word_counts.iter().sum();
        let per_epoch: usize = prepared
            .iter()
            .map(|d| d.words.len() + if with_citations { d.markers.len() } else { 0 })
            .sum();
        let total_work = (per_epoch * cfg.epochs).max(1) as f64;
        let keep_prob: Vec<f64> = self
            .word_counts
            .iter()
            .map(|&c| {
                if cfg.subsample <= 0.0 {
                    1.0
                } else {
                    let thresh = cfg.subsample * total_words as f64;
                    (((c as f64 / thresh).sqrt() + 1.0) * thresh / c as f64).min(1.0)
                }
            })
            .collect();

        // Same seed, separate stream from the one used for initialization.
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1);
        let mut order: Vec<usize> = (0..prepared.len()).collect();
        let mut processed = 0usize;
        let mut keep = Vec::new();
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for &d in &order {
                let doc = &prepared[d];
                keep.clear();
                keep.extend(doc.words.iter().map(|&w| {
                    keep_prob[w] >= 1.0 || rng.random::<f64>() < keep_prob[w]
                }));
                let kept: Vec<usize> = (0..doc.words.len()).filter(|&i| keep[i]).collect();
                let kept_words: Vec<usize> = kept.iter().map(|&i| doc.words[i]).collect();
                let mut kept_pos = 0usize;
                for event in &doc.events {
                    let lr = cfg.lr_start - (cfg.lr_start - cfg.lr_end) * processed as f64 / total_work;
                    match *event {
                        Ok(i) => {
                            processed += 1;
                            if !keep[i] {
                                continue;
                            }
                            let center = kept_pos;
                            kept_pos += 1;
                            let target = kept_words[center];
                            let negs = sample_excluding(&word_sampler, &mut rng, cfg.negatives, target);
                            let ex = content_example(doc.row, &kept_words, center, cfg.window, negs);
                            self.sgd_step(&ex, lr);
                        }
                        Err(m) => {
                            let Some(sampler) = &doc_sampler else { continue };
                            processed += 1;
                            let (pos, cited) = doc.markers[m];
                            let negs = sample_excluding(sampler, &mut rng, cfg.negatives, cited);
                            let ex = citation_example(doc.row, &doc.words, pos, cfg.window, cited, negs);
                            self.sgd_step(&ex, lr);
                        }
                    }
                }
            }
        }
        if !self.is_finite() {
            return Err(Error::InvalidInput(
                "training diverged (non-finite vectors); lower the learning rate".into(),
            ));
        }
        Ok(())
    }

    /// Mean of `word_in` over in-vocabulary query words.
    pub fn mean_word_vector(&self, query: &[String]) -> ContextVector {
        let mut v = vec![0.0; self.dim];
        let mut n = 0usize;
        for w in query {
            if let Some(row) = self.word_in(w) {
                for (a, b) in v.iter_mut().zip(row) {
                    *a += b;
                }
                n += 1;
            }
        }
        if n == 0 {
            return ContextVector {
                vector: v,
                all_oov: true,
            };
        }
        v.iter_mut().for_each(|a| *a /= n as f64);
        ContextVector {
            vector: v,
            all_oov: false,
        }
    }

    /// Fit a fresh paragraph vector for `query` with every model parameter
    /// frozen. Seeded, fixed number of passes.
    pub fn infer_paragraph_vector(&self, query: &[String]) -> ContextVector {
        let words: Vec<usize> = query.iter().filter_map(|w| self.word_id(w)).collect();
        let cfg = &self.config;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(INFER_SEED_OFFSET));
        let mut q: Vec<f64> = (0..self.dim)
            .map(|_| rng.random_range(-0.5 / self.dim as f64..0.5 / self.dim as f64))
            .collect();
        if words.is_empty() {
            return ContextVector {
                vector: vec![0.0; self.dim],
                all_oov: true,
            };
        }
        let Ok(sampler) = WeightedIndex::new(self.word_counts.iter().map(|&c| (c as f64).powf(0.75)))
        else {
            return ContextVector {
                vector: q,
                all_oov: false,
            };
        };
        let total = (cfg.infer_epochs * words.len()).max(1) as f64;
        let mut step = 0usize;
        let mut grad_h = vec![0.0; self.dim];
        let mut out_grads: Vec<Vec<f64>> = Vec::new();
        for _ in 0..cfg.infer_epochs {
            for center in 0..words.len() {
                let lr = cfg.lr_start - (cfg.lr_start - cfg.lr_end) * step as f64 / total;
                step += 1;
                let target = words[center];
                let negs = sample_excluding(&sampler, &mut rng, cfg.negatives, target);
                let lo = center.saturating_sub(cfg.window);
                let hi = (center + cfg.window + 1).min(words.len());
                let ctx: Vec<usize> = (lo..hi).filter(|&j| j != center).map(|j| words[j]).collect();
                let c = (1 + ctx.len()) as f64;
                let mut h = q.clone();
                for &w in &ctx {
                    for (a, b) in h.iter_mut().zip(self.word_in.row(w)) {
                        *a += b;
                    }
                }
                h.iter_mut().for_each(|v| *v /= c);
                let rows: Vec<&[f64]> = std::iter::once(target)
                    .chain(negs)
                    .map(|w| self.word_out.row(w))
                    .collect();
                out_grads.resize(rows.len(), Vec::new());
                negative_sampling(&h, &rows, &mut grad_h, &mut out_grads);
                for (qj, g) in q.iter_mut().zip(&grad_h) {
                    *qj -= lr * g / c;
                }
            }
        }
        ContextVector {
            vector: q,
            all_oov: false,
        }
    }

    /// Query representation: word mean for hd2v, inferred paragraph vector
    /// for doc2vec.
    pub fn infer_context_vector(&self, query: &[String]) -> ContextVector {
        match self.kind {
            ModelKind::Hd2v => self.mean_word_vector(query),
            ModelKind::Doc2vec => self.infer_paragraph_vector(query),
        }
    }

    /// Cosine ranking of training documents against `query`. A zero query
    /// vector yields an empty list.
    pub fn score(&self, query: &[f64], mode: ScoreMode, k: usize, source: &str) -> RankedList {
        if norm(query) == 0.0 {
            return RankedList::empty(source);
        }
        let mut scored: Vec<(usize, f64)> = (0..self.docs.len())
            .map(|d| {
                let s = match mode {
                    ScoreMode::Out => cosine(query, self.doc_out.row(d)),
                    ScoreMode::In => cosine(query, self.doc_in.row(d)),
                    ScoreMode::InOut { out_weight } => {
                        out_weight * cosine(query, self.doc_out.row(d))
                            + (1.0 - out_weight) * cosine(query, self.doc_in.row(d))
                    }
                };
                (d, s)
            })
            .collect();
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then_with(|| self.docs[a.0].cmp(&self.docs[b.0]))
        });
        scored.truncate(k);
        RankedList::new(
            source,
            scored
                .into_iter()
                .map(|(d, s)| (self.docs[d].clone(), s))
                .collect(),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        jsonl::write_json(
            path,
            &ModelFile {
                header: ModelHeader {
                    format: MODEL_FORMAT.into(),
                    version: MODEL_VERSION,
                    kind: self.kind,
                    dim: self.dim,
                    vocab_size: self.words.len(),
                    doc_count: self.docs.len(),
                },
                space: self.clone(),
            },
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: ModelFile = jsonl::read_json(path)?;
        let h = &file.header;
        if h.format != MODEL_FORMAT {
            return Err(Error::format(path, format!("not an embedding model ({})", h.format)));
        }
        if h.version != MODEL_VERSION {
            return Err(Error::Version {
                kind: "embedding model",
                found: h.version,
                expected: MODEL_VERSION,
            });
        }
        let mut space = file.space;
        if h.dim != space.dim || h.vocab_size != space.words.len() || h.doc_count != space.docs.len() {
            return Err(Error::format(path, "header does not match tables"));
        }
        space.word_index = space.words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        space.doc_index = space.docs.iter().enumerate().map(|(i, d)| (d.clone(), i)).collect();
        Ok(space)
    }

    #[doc(hidden)]
    pub fn randomize_all(&mut self, seed: u64, half_width: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for m in [&mut self.word_in, &mut self.word_out, &mut self.doc_in, &mut self.doc_out] {
            m.fill_uniform(&mut rng, half_width);
        }
    }
}

fn sample_excluding(
    sampler: &WeightedIndex<f64>,
    rng: &mut ChaCha8Rng,
    count: usize,
    exclude: usize,
) -> Vec<usize> {
    (0..count)
        .map(|_| sampler.sample(rng))
        .filter(|&s| s != exclude)
        .collect()
}

/// Train a hyperdoc2vec model on a citing-orientation corpus.
pub fn train_hd2v(docs: &[TrainingDocument], config: &TrainConfig) -> Result<EmbeddingSpace> {
    let mut space = EmbeddingSpace::initialize(ModelKind::Hd2v, docs, config)?;
    if space.doc_counts.iter().all(|&c| c == 0) {
        return Err(Error::InvalidInput(
            "hd2v needs at least one citation marker naming a training document".into(),
        ));
    }
    space.run_training(docs)?;
    Ok(space)
}

/// Train paragraph vectors (word objective only); `d_O` mirrors `d_I`.
pub fn train_doc2vec(docs: &[TrainingDocument], config: &TrainConfig) -> Result<EmbeddingSpace> {
    let mut space = EmbeddingSpace::initialize(ModelKind::Doc2vec, docs, config)?;
    space.run_training(docs)?;
    space.doc_out = space.doc_in.clone();
    Ok(space)
}

/// Embedding model as a [`Recommender`].
#[derive(Debug, Clone)]
pub struct EmbeddingRecommender {
    pub label: String,
    pub space: Arc<EmbeddingSpace>,
    pub mode: ScoreMode,
}

impl EmbeddingRecommender {
    pub fn hd2v_out(label: impl Into<String>, space: Arc<EmbeddingSpace>) -> Self {
        EmbeddingRecommender {
            label: label.into(),
            space,
            mode: ScoreMode::Out,
        }
    }

    pub fn hd2v_inout(label: impl Into<String>, space: Arc<EmbeddingSpace>) -> Self {
        let out_weight = space.config().inout_weight;
        EmbeddingRecommender {
            label: label.into(),
            space,
            mode: ScoreMode::InOut { out_weight },
        }
    }

    pub fn doc2vec(label: impl Into<String>, space: Arc<EmbeddingSpace>) -> Self {
        EmbeddingRecommender {
            label: label.into(),
            space,
            mode: ScoreMode::In,
        }
    }
}

impl Recommender for EmbeddingRecommender {
    fn label(&self) -> &str {
        &self.label
    }

    fn recommend(&self, query: &[String], k: usize) -> Result<RankedList> {
        let q = self.space.infer_context_vector(query);
        if q.all_oov {
            log::debug!("{}: no query word in vocabulary", self.label);
        }
        Ok(self.space.score(&q.vector, self.mode, k, &self.label))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Orientation;
    use proptest::prelude::*;

    fn tdoc(id: &str, text: &str) -> TrainingDocument {
        TrainingDocument {
            id: id.into(),
            orientation: Orientation::Citing,
            tokens: text.split_whitespace().map(Token::from_wire).collect(),
        }
    }

    fn toy_corpus() -> Vec<TrainingDocument> {
        (0..10)
            .map(|i| {
                let a = (i + 1) % 10;
                let b = (i + 3) % 10;
                tdoc(
                    &format!("d{i}"),
                    &format!(
                        "w{i} topic{} shared words here ⟦CITE:d{a}⟧ more w{a} text ⟦CITE:d{b}⟧ end w{b}",
                        i % 3
                    ),
                )
            })
            .collect()
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            dim: 8,
            window: 2,
            negatives: 3,
            epochs: 1,
            ..TrainConfig::default()
        }
    }

    fn q(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn initialization_ranges() {
        let cfg = small_config();
        let space = EmbeddingSpace::initialize(ModelKind::Hd2v, &toy_corpus(), &cfg).unwrap();
        let bound = 0.5 / cfg.dim as f64;
        for i in 0..space.vocab_size() {
            assert!(space.param(Param::WordIn(i)).iter().all(|v| v.abs() <= bound));
            assert!(space.param(Param::WordOut(i)).iter().all(|&v| v == 0.0));
        }
        for d in 0..space.doc_ids().len() {
            assert!(space.param(Param::DocIn(d)).iter().any(|&v| v != 0.0));
            assert!(space.param(Param::DocOut(d)).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let mut cfg = small_config();
        cfg.epochs = 0;
        let init = EmbeddingSpace::initialize(ModelKind::Hd2v, &toy_corpus(), &cfg).unwrap();
        let trained = train_hd2v(&toy_corpus(), &cfg).unwrap();
        assert_eq!(init, trained);
    }

    #[test]
    fn corpus_without_markers_is_rejected_for_hd2v() {
        let docs = vec![tdoc("a", "just words"), tdoc("b", "more words")];
        assert!(matches!(
            train_hd2v(&docs, &small_config()),
            Err(Error::InvalidInput(_))
        ));
        assert!(train_doc2vec(&docs, &small_config()).is_ok());
    }

    #[test]
    fn config_validation() {
        for cfg in [
            TrainConfig { dim: 1, ..TrainConfig::default() },
            TrainConfig { window: 0, ..TrainConfig::default() },
            TrainConfig { negatives: 0, ..TrainConfig::default() },
        ] {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn training_is_bitwise_reproducible() {
        let mut cfg = small_config();
        cfg.epochs = 3;
        cfg.subsample = 0.05;
        let a = train_hd2v(&toy_corpus(), &cfg).unwrap();
        let b = train_hd2v(&toy_corpus(), &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.is_finite());
        cfg.seed += 1;
        assert_ne!(a, train_hd2v(&toy_corpus(), &cfg).unwrap());
    }

    #[test]
    fn example_windows() {
        let words = [10, 11, 12, 13, 14];
        let ex = content_example(0, &words, 2, 1, vec![99]);
        assert_eq!(
            ex.inputs,
            vec![Input::Doc(0), Input::Word(11), Input::Word(13)]
        );
        assert_eq!(ex.target, Output::Word(12));
        // Marker before words[2]: two words each side.
        let ex = citation_example(3, &words, 2, 2, 7, vec![1, 2]);
        assert_eq!(
            ex.inputs,
            vec![Input::Doc(3), Input::Word(10), Input::Word(11), Input::Word(12), Input::Word(13)]
        );
        assert_eq!(ex.target, Output::Doc(7));
        assert_eq!(ex.negatives, vec![Output::Doc(1), Output::Doc(2)]);
    }

    #[test]
    fn single_token_query_is_its_word_vector() {
        let space = train_hd2v(&toy_corpus(), &small_config()).unwrap();
        let v = space.mean_word_vector(&q(&["shared"]));
        assert!(!v.all_oov);
        assert_eq!(v.vector, space.word_in("shared").unwrap());
    }

    #[test]
    fn all_oov_query_is_flagged_zero() {
        let space = train_hd2v(&toy_corpus(), &small_config()).unwrap();
        let v = space.infer_context_vector(&q(&["zzz", "yyy"]));
        assert!(v.all_oov);
        assert!(v.vector.iter().all(|&x| x == 0.0));
        assert!(space.score(&v.vector, ScoreMode::Out, 5, "x").is_empty());
    }

    #[test]
    fn mean_matches_brute_force() {
        let space = train_hd2v(&toy_corpus(), &small_config()).unwrap();
        let query = q(&["shared", "w1", "oov", "text", "w1"]);
        let got = space.mean_word_vector(&query).vector;
        let present: Vec<&[f64]> = query.iter().filter_map(|w| space.word_in(w)).collect();
        for j in 0..space.dim() {
            let expect = present.iter().map(|r| r[j]).sum::<f64>() / present.len() as f64;
            assert!((got[j] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn cosine_identity_ranks_exact_match_first() {
        let docs: Vec<TrainingDocument> = (0..4)
            .map(|i| tdoc(&format!("d{i}"), &format!("w{i} ⟦CITE:d{}⟧", (i + 1) % 4)))
            .collect();
        let mut space = EmbeddingSpace::initialize(ModelKind::Hd2v, &docs, &small_config()).unwrap();
        for d in 0..4 {
            let row = space.param_mut(Param::DocOut(d));
            row.iter_mut().for_each(|v| *v = 0.0);
            row[d] = 1.0 + d as f64;
        }
        let mut query = vec![0.0; 8];
        query[2] = 3.0;
        let list = space.score(&query, ScoreMode::Out, 4, "hd2vout");
        assert_eq!(list.entries[0].0, "d2");
        assert!((list.entries[0].1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn inout_collapses_to_out_when_vectors_match() {
        let mut space = train_hd2v(&toy_corpus(), &small_config()).unwrap();
        space.doc_in = space.doc_out.clone();
        let v = space.mean_word_vector(&q(&["shared", "w3"])).vector;
        let out = space.score(&v, ScoreMode::Out, 10, "x");
        let inout = space.score(&v, ScoreMode::InOut { out_weight: 0.5 }, 10, "x");
        assert_eq!(out.id_vec(), inout.id_vec());
    }

    #[test]
    fn model_round_trip() {
        let space = train_hd2v(&toy_corpus(), &small_config()).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        space.save(f.path()).unwrap();
        let back = EmbeddingSpace::load(f.path()).unwrap();
        assert_eq!(back, space);
        assert_eq!(back.word_id("shared"), space.word_id("shared"));
    }

    #[test]
    fn planted_marker_word_aligns_with_out_vector() {
        // Doc "a" is only ever cited right next to "foo".
        let mut docs = vec![tdoc("a", "alpha paper"), tdoc("b", "beta paper"), tdoc("c", "gamma paper")];
        for i in 0..12 {
            let (cited, word) = match i % 3 {
                0 => ("a", "foo"),
                1 => ("b", "bar"),
                _ => ("c", "baz"),
            };
            docs.push(tdoc(
                &format!("s{i}"),
                &format!("{word} {word} ⟦CITE:{cited}⟧ {word} {word} filler text"),
            ));
        }
        let cfg = TrainConfig {
            dim: 16,
            window: 3,
            negatives: 2,
            epochs: 60,
            ..TrainConfig::default()
        };
        let space = train_hd2v(&docs, &cfg).unwrap();
        let v = space.mean_word_vector(&q(&["foo"])).vector;
        let list = space.score(&v, ScoreMode::Out, 3, "x");
        assert_eq!(list.entries[0].0, "a");
    }

    #[test]
    fn doc2vec_identical_documents_are_closest() {
        let docs = vec![
            tdoc("x1", "neural network training with gradient descent and backpropagation"),
            tdoc("x2", "neural network training with gradient descent and backpropagation"),
            tdoc("y", "protein folding structure prediction in molecular biology labs"),
        ];
        let cfg = TrainConfig {
            dim: 12,
            window: 3,
            negatives: 3,
            epochs: 200,
            ..TrainConfig::default()
        };
        let space = train_doc2vec(&docs, &cfg).unwrap();
        let (x1, x2, y) = (
            space.doc_in("x1").unwrap(),
            space.doc_in("x2").unwrap(),
            space.doc_in("y").unwrap(),
        );
        assert!(cosine(x1, x2) > cosine(x1, y));
        assert!(cosine(x1, x2) > cosine(x2, y));
        assert_eq!(space.doc_out("x1"), space.doc_in("x1"));
    }

    #[test]
    fn doc2vec_dim2_smoke() {
        let cfg = TrainConfig {
            dim: 2,
            ..small_config()
        };
        let space = train_doc2vec(&toy_corpus(), &cfg).unwrap();
        let v = space.infer_context_vector(&q(&["shared", "words"]));
        assert_eq!(v.vector.len(), 2);
        assert!(v.vector.iter().all(|x| x.is_finite()));
        // Inference is seeded.
        assert_eq!(v, space.infer_context_vector(&q(&["shared", "words"])));
    }

    proptest! {
        #[test]
        fn cosine_scores_bounded_and_scale_invariant(
            query in proptest::collection::vec(-1.0f64..1.0, 8),
            scale_pow in -3i32..4,
        ) {
            let space = train_hd2v(&toy_corpus(), &small_config()).unwrap();
            prop_assume!(norm(&query) > 1e-6);
            let base = space.score(&query, ScoreMode::InOut { out_weight: 0.5 }, 10, "x");
            let scaled: Vec<f64> = query.iter().map(|v| v * 2f64.powi(scale_pow)).collect();
            let other = space.score(&scaled, ScoreMode::InOut { out_weight: 0.5 }, 10, "x");
            prop_assert_eq!(base.id_vec(), other.id_vec());
            for (_, s) in &base.entries {
                prop_assert!((-1.0..=1.0).contains(s));
            }
            for id in base.ids() {
                prop_assert!(space.doc_id(id).is_some());
            }
        }
    }
}
