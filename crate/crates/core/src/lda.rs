//! Collapsed Gibbs sampling LDA and topic-similarity recommendation.
//!
//! Markers are stripped before training; topics are purely lexical. A query
//! context is folded in with the topic-word counts frozen and compared to
//! each paper's topic proportions by cosine similarity.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::TrainingDocument;
use crate::embed::cosine;
use crate::error::{Error, Result};
use crate::jsonl;
use crate::ranking::{RankedList, Recommender};

const MODEL_FORMAT: &str = "citerec-lda";
const MODEL_VERSION: u32 = 1;

/// Topic count for large corpora (the default).
pub const LARGE_CORPUS_TOPICS: usize = 300;
/// Topic count for small corpora.
pub const SMALL_CORPUS_TOPICS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaConfig {
    pub topics: usize,
    /// Symmetric document-topic prior; `None` means `50 / topics`.
    pub alpha: Option<f64>,
    pub beta: f64,
    /// Full Gibbs sweeps over the training corpus.
    pub iterations: usize,
    pub seed: u64,
    /// Sweeps over a query during inference.
    pub infer_iterations: usize,
    /// Trailing inference sweeps averaged into the returned distribution.
    pub infer_average: usize,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            topics: LARGE_CORPUS_TOPICS,
            alpha: None,
            beta: 0.01,
            iterations: 200,
            seed: 1,
            infer_iterations: 20,
            infer_average: 10,
        }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.topics as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.topics < 2 {
            return Err(Error::Config("lda topics must be >= 2".into()));
        }
        if !(self.alpha() > 0.0 && self.beta > 0.0) {
            return Err(Error::Config("lda priors must be positive".into()));
        }
        if self.topics > u16::MAX as usize {
            return Err(Error::Config("too many lda topics".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    num_topics: usize,
    alpha: f64,
    beta: f64,
    vocab: Vec<String>,
    doc_ids: Vec<String>,
    /// `T × V`, row-major.
    topic_word: Vec<u32>,
    topic_totals: Vec<u64>,
    /// `D × T`, row-major.
    doc_topic: Vec<u32>,
    doc_lengths: Vec<u32>,
    #[serde(skip)]
    word_index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: LdaModel,
}

/// Topic proportions for a query context.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicDistribution {
    pub probs: Vec<f64>,
    /// No query word was in the vocabulary; `probs` is uniform.
    pub all_oov: bool,
}

impl LdaModel {
    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn topic_word(&self, topic: usize, word: usize) -> u32 {
        self.topic_word[topic * self.vocab.len() + word]
    }

    pub fn doc_topic(&self, doc: usize, topic: usize) -> u32 {
        self.doc_topic[doc * self.num_topics + topic]
    }

    pub fn topic_total(&self, topic: usize) -> u64 {
        self.topic_totals[topic]
    }

    pub fn doc_length(&self, doc: usize) -> u32 {
        self.doc_lengths[doc]
    }

    pub fn total_tokens(&self) -> u64 {
        self.doc_lengths.iter().map(|&l| l as u64).sum()
    }

    /// The `n` highest-count words of a topic, ties by vocabulary order.
    pub fn top_words(&self, topic: usize, n: usize) -> Vec<&str> {
        let mut idx: Vec<usize> = (0..self.vocab.len()).collect();
        idx.sort_by(|&a, &b| {
            self.topic_word(topic, b)
                .cmp(&self.topic_word(topic, a))
                .then(a.cmp(&b))
        });
        idx.into_iter().take(n).map(|w| self.vocab[w].as_str()).collect()
    }

    /// Normalized topic counts of a document; uniform for an empty document.
    pub fn doc_distribution(&self, doc: usize) -> Vec<f64> {
        let t = self.num_topics;
        let len = self.doc_lengths[doc];
        if len == 0 {
            return vec![1.0 / t as f64; t];
        }
        (0..t)
            .map(|k| self.doc_topic(doc, k) as f64 / len as f64)
            .collect()
    }

    /// Fold a query in with topic-word counts frozen. Returns the smoothed
    /// proportions `(n_k + α) / (N + Tα)` averaged over the last
    /// `average` sweeps.
    pub fn infer_topics(&self, query: &[String], iterations: usize, average: usize, seed: u64) -> TopicDistribution {
        let t = self.num_topics;
        let words: Vec<usize> = query
            .iter()
            .filter_map(|w| self.word_index.get(w.as_str()).copied())
            .collect();
        if words.is_empty() {
            return TopicDistribution {
                probs: vec![1.0 / t as f64; t],
                all_oov: true,
            };
        }
        let v = self.vocab.len() as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z: Vec<usize> = words.iter().map(|_| rng.random_range(0..t)).collect();
        let mut counts = vec![0u32; t];
        for &k in &z {
            counts[k] += 1;
        }
        let n = words.len() as f64;
        let smooth = |counts: &[u32]| -> Vec<f64> {
            counts
                .iter()
                .map(|&c| (c as f64 + self.alpha) / (n + t as f64 * self.alpha))
                .collect()
        };

        let average = average.clamp(1, iterations.max(1));
        let mut acc = vec![0.0; t];
        let mut samples = 0usize;
        let mut p = vec![0.0; t];
        for sweep in 0..iterations {
            for (i, &w) in words.iter().enumerate() {
                counts[z[i]] -= 1;
                for k in 0..t {
                    p[k] = (counts[k] as f64 + self.alpha)
                        * (self.topic_word(k, w) as f64 + self.beta)
                        / (self.topic_totals[k] as f64 + v * self.beta);
                }
                let k = sample_discrete(&p, &mut rng);
                z[i] = k;
                counts[k] += 1;
            }
            if sweep + average >= iterations {
                for (a, s) in acc.iter_mut().zip(smooth(&counts)) {
                    *a += s;
                }
                samples += 1;
            }
        }
        let probs = if samples == 0 {
            smooth(&counts)
        } else {
            let total: f64 = acc.iter().sum();
            acc.iter().map(|a| a / total).collect()
        };
        TopicDistribution {
            probs,
            all_oov: false,
        }
    }

    /// Documents ranked by cosine between `query` and their topic proportions.
    pub fn score(&self, query: &[f64], k: usize, source: &str) -> RankedList {
        let scored = (0..self.doc_ids.len())
            .map(|d| (self.doc_ids[d].clone(), cosine(query, &self.doc_distribution(d))))
            .collect();
        RankedList::from_scores(source, scored, k)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        jsonl::write_json(
            path,
            &ModelFile {
                format: MODEL_FORMAT.into(),
                version: MODEL_VERSION,
                model: self.clone(),
            },
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: ModelFile = jsonl::read_json(path)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::format(path, format!("not an LDA model ({})", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::Version {
                kind: "lda model",
                found: file.version,
                expected: MODEL_VERSION,
            });
        }
        let mut model = file.model;
        let (t, v, d) = (model.num_topics, model.vocab.len(), model.doc_ids.len());
        if model.topic_word.len() != t * v || model.doc_topic.len() != d * t {
            return Err(Error::format(path, "count matrices do not match header"));
        }
        model.index_vocab();
        Ok(model)
    }

    fn index_vocab(&mut self) {
        self.word_index = self
            .vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
    }
}

fn sample_discrete(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, &w) in weights.iter().enumerate() {
        if u < w {
            return k;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Collapsed Gibbs sampler state: the model's counts plus per-token topic
/// assignments.
pub struct GibbsSampler {
    model: LdaModel,
    docs: Vec<Vec<usize>>,
    assignments: Vec<Vec<u16>>,
    rng: ChaCha8Rng,
}

impl GibbsSampler {
    /// Vocabulary and a uniformly random initial assignment.
    pub fn new(docs: &[TrainingDocument], config: &LdaConfig) -> Result<Self> {
        config.validate()?;
        if docs.is_empty() {
            return Err(Error::InvalidInput("cannot train LDA on an empty corpus".into()));
        }
        let mut vocab: BTreeMap<&str, usize> = BTreeMap::new();
        for w in docs.iter().flat_map(|d| d.words()) {
            vocab.entry(w).or_default();
        }
        for (i, slot) in vocab.values_mut().enumerate() {
            *slot = i;
        }
        let word_docs: Vec<Vec<usize>> = docs
            .iter()
            .map(|d| d.words().map(|w| vocab[w]).collect())
            .collect();
        let t = config.topics;
        let v = vocab.len();
        let mut model = LdaModel {
            num_topics: t,
            alpha: config.alpha(),
            beta: config.beta,
            vocab: vocab.keys().map(|w| w.to_string()).collect(),
            doc_ids: docs.iter().map(|d| d.id.clone()).collect(),
            topic_word: vec![0; t * v],
            topic_totals: vec![0; t],
            doc_topic: vec![0; docs.len() * t],
            doc_lengths: word_docs.iter().map(|d| d.len() as u32).collect(),
            word_index: HashMap::new(),
        };
        model.index_vocab();

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut assignments = Vec::with_capacity(word_docs.len());
        for (d, words) in word_docs.iter().enumerate() {
            let mut z = Vec::with_capacity(words.len());
            for &w in words {
                let k = rng.random_range(0..t);
                model.topic_word[k * v + w] += 1;
                model.topic_totals[k] += 1;
                model.doc_topic[d * t + k] += 1;
                z.push(k as u16);
            }
            assignments.push(z);
        }
        Ok(GibbsSampler {
            model,
            docs: word_docs,
            assignments,
            rng,
        })
    }

    pub fn model(&self) -> &LdaModel {
        &self.model
    }

    pub fn into_model(self) -> LdaModel {
        self.model
    }

    pub fn assignments(&self) -> &[Vec<u16>] {
        &self.assignments
    }

    /// Word ids of each training document.
    pub fn documents(&self) -> &[Vec<usize>] {
        &self.docs
    }

    /// Normalized full conditional of token `i` of document `d`, with the
    /// token's current assignment removed from the counts.
    pub fn conditional(&self, d: usize, i: usize, out: &mut Vec<f64>) {
        let m = &self.model;
        let (t, v) = (m.num_topics, m.vocab.len());
        let w = self.docs[d][i];
        let cur = self.assignments[d][i] as usize;
        out.clear();
        for k in 0..t {
            let own = u32::from(k == cur);
            let ndk = (m.doc_topic[d * t + k] - own) as f64;
            let nkw = (m.topic_word[k * v + w] - own) as f64;
            let nk = (m.topic_totals[k] - own as u64) as f64;
            out.push((ndk + m.alpha) * (nkw + m.beta) / (nk + v as f64 * m.beta));
        }
        let total: f64 = out.iter().sum();
        out.iter_mut().for_each(|p| *p /= total);
    }

    /// One full sweep over every token.
    pub fn sweep(&mut self) {
        let (t, v) = (self.model.num_topics, self.model.vocab.len());
        let (alpha, beta) = (self.model.alpha, self.model.beta);
        let vbeta = v as f64 * beta;
        let mut p = vec![0.0; t];
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i];
                let old = self.assignments[d][i] as usize;
                let m = &mut self.model;
                m.topic_word[old * v + w] -= 1;
                m.topic_totals[old] -= 1;
                m.doc_topic[d * t + old] -= 1;
                for k in 0..t {
                    p[k] = (m.doc_topic[d * t + k] as f64 + alpha)
                        * (m.topic_word[k * v + w] as f64 + beta)
                        / (m.topic_totals[k] as f64 + vbeta);
                }
                let k = sample_discrete(&p, &mut self.rng);
                m.topic_word[k * v + w] += 1;
                m.topic_totals[k] += 1;
                m.doc_topic[d * t + k] += 1;
                self.assignments[d][i] = k as u16;
            }
        }
    }
}

/// Train with `config.iterations` sweeps; markers are ignored.
pub fn train_lda(docs: &[TrainingDocument], config: &LdaConfig) -> Result<LdaModel> {
    let mut sampler = GibbsSampler::new(docs, config)?;
    for _ in 0..config.iterations {
        sampler.sweep();
    }
    Ok(sampler.into_model())
}

/// LDA as a [`Recommender`].
#[derive(Debug, Clone)]
pub struct LdaRecommender {
    pub label: String,
    pub model: Arc<LdaModel>,
    pub infer_iterations: usize,
    pub infer_average: usize,
    pub seed: u64,
}

impl Recommender for LdaRecommender {
    fn label(&self) -> &str {
        &self.label
    }

    fn recommend(&self, query: &[String], k: usize) -> Result<RankedList> {
        let dist = self
            .model
            .infer_topics(query, self.infer_iterations, self.infer_average, self.seed);
        Ok(self.model.score(&dist.probs, k, &self.label))
    }
}
