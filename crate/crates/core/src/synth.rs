//! Seeded synthetic corpora with known answers.
//!
//! Vocabulary is made of labelled tokens (`d12s3`, `c2v40`, `f17`, ...) so a
//! failing run can be read off the ranked lists directly. Training papers get
//! years in 2000–2016 and test papers 2017, matching the default split.

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CitationContext, Document, Orientation, TrainingDocument};
use crate::textproc::Token;

pub const FIRST_TRAIN_YEAR: i32 = 2000;
pub const LAST_TRAIN_YEAR: i32 = 2016;
pub const TEST_YEAR: i32 = 2017;

const GLUE: [&str; 6] = ["the", "of", "and", "in", "a", "for"];

fn train_id(i: usize) -> String {
    format!("p{i:04}")
}

fn test_id(i: usize) -> String {
    format!("t{i:04}")
}

fn train_year(i: usize) -> i32 {
    FIRST_TRAIN_YEAR + (i % (LAST_TRAIN_YEAR - FIRST_TRAIN_YEAR + 1) as usize) as i32
}

fn pick(rng: &mut ChaCha8Rng, pool: &[String], n: usize) -> Vec<String> {
    index::sample(rng, pool.len(), n.min(pool.len()))
        .into_iter()
        .map(|i| pool[i].clone())
        .collect()
}

fn pick_with_replacement(rng: &mut ChaCha8Rng, pool: &[String], n: usize) -> Vec<String> {
    (0..n).map(|_| pool[rng.random_range(0..pool.len())].clone()).collect()
}

/// Shuffle content words and sprinkle in stop words so the text looks like
/// prose to the tokenizer.
fn sentence(rng: &mut ChaCha8Rng, mut words: Vec<String>) -> String {
    words.shuffle(rng);
    let mut out: Vec<&str> = Vec::with_capacity(words.len() * 2);
    for w in &words {
        if rng.random_bool(0.3) {
            out.push(GLUE[rng.random_range(0..GLUE.len())]);
        }
        out.push(w);
    }
    let mut text = out.join(" ");
    text.push('.');
    text
}

fn paper(id: String, year: i32, title: String, abstract_text: String) -> Document {
    Document {
        id,
        year,
        title,
        abstract_text,
        contexts: Vec::new(),
    }
}

/// Lexical clusters with in-cluster citations.
///
/// Every training paper owns a few signature words and shares a cluster
/// vocabulary with its cluster mates. Each paper receives exactly `in_links`
/// citations from cluster mates, each written with its signature words. Test
/// papers cite one training paper with a context built the same way.
#[derive(Debug, Clone)]
pub struct PlantedClusters {
    pub clusters: usize,
    pub docs_per_cluster: usize,
    pub signature_words: usize,
    pub cluster_vocab: usize,
    pub in_links: usize,
    pub test_queries: usize,
    pub seed: u64,
}

impl Default for PlantedClusters {
    fn default() -> Self {
        PlantedClusters {
            clusters: 5,
            docs_per_cluster: 40,
            signature_words: 5,
            cluster_vocab: 200,
            in_links: 10,
            test_queries: 100,
            seed: 1,
        }
    }
}

impl PlantedClusters {
    pub fn cluster_of(&self, train_index: usize) -> usize {
        train_index / self.docs_per_cluster
    }

    pub fn generate(&self) -> Vec<Document> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n = self.clusters * self.docs_per_cluster;
        let cluster_words: Vec<Vec<String>> = (0..self.clusters)
            .map(|c| (0..self.cluster_vocab).map(|j| format!("c{c}v{j}")).collect())
            .collect();
        let signatures: Vec<Vec<String>> = (0..n)
            .map(|i| (0..self.signature_words).map(|j| format!("d{i}s{j}")).collect())
            .collect();
        let sig_in_context = (self.signature_words * 4 / 5).max(1);

        let mut docs: Vec<Document> = (0..n)
            .map(|i| {
                let c = self.cluster_of(i);
                let mut title = pick(&mut rng, &signatures[i], 2);
                title.extend(pick(&mut rng, &cluster_words[c], 2));
                let mut abs = signatures[i].clone();
                abs.extend(pick_with_replacement(&mut rng, &cluster_words[c], 10));
                paper(train_id(i), train_year(i), sentence(&mut rng, title), sentence(&mut rng, abs))
            })
            .collect();

        for target in 0..n {
            let c = self.cluster_of(target);
            let mates: Vec<usize> = (c * self.docs_per_cluster..(c + 1) * self.docs_per_cluster)
                .filter(|&m| m != target)
                .collect();
            for slot in index::sample(&mut rng, mates.len(), self.in_links.min(mates.len())) {
                let mut words = pick(&mut rng, &signatures[target], sig_in_context);
                words.extend(pick_with_replacement(&mut rng, &cluster_words[c], 10 - words.len().min(6)));
                let text = sentence(&mut rng, words);
                docs[mates[slot]].contexts.push(CitationContext {
                    text,
                    cited_ids: vec![train_id(target)],
                });
            }
        }

        for t in 0..self.test_queries {
            let target = rng.random_range(0..n);
            let c = self.cluster_of(target);
            let title = pick(&mut rng, &cluster_words[c], 3);
            let mut words = pick(&mut rng, &signatures[target], 3);
            words.extend(pick_with_replacement(&mut rng, &cluster_words[c], 7));
            let mut doc = paper(test_id(t), TEST_YEAR, sentence(&mut rng, title), String::new());
            doc.contexts.push(CitationContext {
                text: sentence(&mut rng, words),
                cited_ids: vec![train_id(target)],
            });
            docs.push(doc);
        }
        docs
    }
}

/// Papers whose own text and whose incoming citations use disjoint words.
///
/// Each training paper has "own" words (title and abstract) and "cite" words
/// that other papers use when citing it. Lexical test contexts use the own
/// words, so a text match on the paper itself finds it; citation-style test
/// contexts use the cite words, which only a model of how the paper is cited
/// can connect back to it. `abstract_cite_words` leaks a few cite words into
/// the abstract.
#[derive(Debug, Clone)]
pub struct Complementary {
    pub docs: usize,
    pub own_words: usize,
    pub cite_words: usize,
    pub filler_vocab: usize,
    pub in_links: usize,
    pub test_queries: usize,
    /// Share of test contexts written with own words; the rest use cite words.
    pub lexical_fraction: f64,
    pub abstract_cite_words: usize,
    pub seed: u64,
}

impl Default for Complementary {
    fn default() -> Self {
        Complementary {
            docs: 200,
            own_words: 6,
            cite_words: 6,
            filler_vocab: 400,
            in_links: 5,
            test_queries: 100,
            lexical_fraction: 0.5,
            abstract_cite_words: 0,
            seed: 1,
        }
    }
}

/// What a test context of [`Complementary`] was written from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryStyle {
    Lexical,
    Citation,
}

impl Complementary {
    /// Context text drawn from the cited paper's citation vocabulary, with
    /// one cite word leaked into each abstract.
    pub fn cited_vocabulary(seed: u64) -> Self {
        Complementary {
            lexical_fraction: 0.0,
            abstract_cite_words: 1,
            seed,
            ..Complementary::default()
        }
    }

    pub fn lexical_queries(&self) -> usize {
        (self.test_queries as f64 * self.lexical_fraction).round() as usize
    }

    /// Style of the test context in test paper `t`.
    pub fn style(&self, t: usize) -> QueryStyle {
        if t < self.lexical_queries() {
            QueryStyle::Lexical
        } else {
            QueryStyle::Citation
        }
    }

    pub fn generate(&self) -> Vec<Document> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n = self.docs;
        let filler: Vec<String> = (0..self.filler_vocab).map(|j| format!("f{j}")).collect();
        let own: Vec<Vec<String>> = (0..n)
            .map(|i| (0..self.own_words).map(|j| format!("d{i}o{j}")).collect())
            .collect();
        let cite: Vec<Vec<String>> = (0..n)
            .map(|i| (0..self.cite_words).map(|j| format!("d{i}k{j}")).collect())
            .collect();
        let per_context = (self.cite_words * 2 / 3).max(1);

        let mut docs: Vec<Document> = (0..n)
            .map(|i| {
                let mut title = pick(&mut rng, &own[i], 2);
                title.extend(pick(&mut rng, &filler, 2));
                let mut abs = own[i].clone();
                abs.extend(pick(&mut rng, &cite[i], self.abstract_cite_words));
                abs.extend(pick(&mut rng, &filler, 10));
                paper(train_id(i), train_year(i), sentence(&mut rng, title), sentence(&mut rng, abs))
            })
            .collect();

        for target in 0..n {
            let others: Vec<usize> = (0..n).filter(|&m| m != target).collect();
            for slot in index::sample(&mut rng, others.len(), self.in_links.min(others.len())) {
                let mut words = pick(&mut rng, &cite[target], per_context);
                words.extend(pick(&mut rng, &filler, 10 - per_context.min(6)));
                let text = sentence(&mut rng, words);
                docs[others[slot]].contexts.push(CitationContext {
                    text,
                    cited_ids: vec![train_id(target)],
                });
            }
        }

        for t in 0..self.test_queries {
            let target = rng.random_range(0..n);
            let vocab = match self.style(t) {
                QueryStyle::Lexical => &own[target],
                QueryStyle::Citation => &cite[target],
            };
            let mut words = pick(&mut rng, vocab, 4);
            words.extend(pick(&mut rng, &filler, 6));
            let title = pick(&mut rng, &filler, 3);
            let mut doc = paper(test_id(t), TEST_YEAR, sentence(&mut rng, title), String::new());
            doc.contexts.push(CitationContext {
                text: sentence(&mut rng, words),
                cited_ids: vec![train_id(target)],
            });
            docs.push(doc);
        }
        docs
    }
}

/// Bag-of-words documents drawn from disjoint per-topic vocabularies,
/// alternating topics by document index.
#[derive(Debug, Clone)]
pub struct PlantedTopics {
    pub topics: usize,
    pub docs: usize,
    pub doc_length: usize,
    pub vocab_per_topic: usize,
    pub seed: u64,
}

impl Default for PlantedTopics {
    fn default() -> Self {
        PlantedTopics {
            topics: 2,
            docs: 40,
            doc_length: 150,
            vocab_per_topic: 100,
            seed: 1,
        }
    }
}

impl PlantedTopics {
    /// Planted topic of a vocabulary word, if it is one of ours.
    pub fn topic_of(word: &str) -> Option<usize> {
        let rest = word.strip_prefix('t')?;
        let (topic, _) = rest.split_once('w')?;
        topic.parse().ok()
    }

    pub fn generate(&self) -> Vec<TrainingDocument> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.docs)
            .map(|d| {
                let topic = d % self.topics;
                let tokens = (0..self.doc_length)
                    .map(|_| Token::Word(format!("t{topic}w{}", rng.random_range(0..self.vocab_per_topic))))
                    .collect();
                TrainingDocument {
                    id: format!("d{d:03}"),
                    orientation: Orientation::Citing,
                    tokens,
                }
            })
            .collect()
    }
}

/// The small corpus shipped in `data/synthetic_corpus.jsonl`: three planted
/// clusters plus one paper outside the default year ranges and one citation
/// to a paper that is not in the corpus.
pub fn bundled_corpus() -> Vec<Document> {
    let mut docs = PlantedClusters {
        clusters: 3,
        docs_per_cluster: 10,
        signature_words: 5,
        cluster_vocab: 30,
        in_links: 3,
        test_queries: 20,
        seed: 7,
    }
    .generate();
    docs.push(Document {
        id: "p9000".into(),
        year: 1988,
        title: "Early results on c0v1 c0v2".into(),
        abstract_text: "A paper that predates the training window.".into(),
        contexts: Vec::new(),
    });
    if let Some(d) = docs.iter_mut().find(|d| d.id == "p0001") {
        d.contexts.push(CitationContext {
            text: "as surveyed in c0v3 c0v4 c0v5 c0v6".into(),
            cited_ids: vec!["x0001".into()],
        });
    }
    docs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_pseudo_fulltext, CitationCounts};
    use std::collections::HashSet;

    #[test]
    fn planted_clusters_shape() {
        let cfg = PlantedClusters::default();
        let docs = cfg.generate();
        assert_eq!(docs.len(), 200 + 100);
        let counts = CitationCounts::from_documents(&docs[..200]);
        for i in 0..200 {
            assert_eq!(counts.get(&train_id(i)), cfg.in_links);
        }
        // Citations stay inside the cluster.
        for (i, d) in docs[..200].iter().enumerate() {
            for ctx in &d.contexts {
                let target: usize = ctx.cited_ids[0][1..].parse().unwrap();
                assert_eq!(cfg.cluster_of(target), cfg.cluster_of(i));
            }
        }
        assert!(docs[200..].iter().all(|d| d.year == TEST_YEAR && d.contexts.len() == 1));
        assert!(docs[..200].iter().all(|d| (FIRST_TRAIN_YEAR..=LAST_TRAIN_YEAR).contains(&d.year)));
    }

    #[test]
    fn generation_is_seeded() {
        let a = PlantedClusters::default().generate();
        assert_eq!(a, PlantedClusters::default().generate());
        let b = PlantedClusters { seed: 2, ..PlantedClusters::default() }.generate();
        assert_ne!(a, b);
        assert_eq!(Complementary::default().generate(), Complementary::default().generate());
    }

    #[test]
    fn complementary_vocabularies_are_separate() {
        let cfg = Complementary::default();
        let docs = cfg.generate();
        let citing = build_pseudo_fulltext(&docs[..cfg.docs]);
        for (i, d) in citing.iter().enumerate() {
            let own_cite = format!("d{i}k");
            // A paper's cite words only ever appear in other papers.
            assert!(!d.words().any(|w| w.starts_with(&own_cite)));
        }
        assert_eq!(cfg.lexical_queries(), 50);
        assert_eq!(cfg.style(49), QueryStyle::Lexical);
        assert_eq!(cfg.style(50), QueryStyle::Citation);
    }

    #[test]
    fn cited_vocabulary_leaks_one_word() {
        let cfg = Complementary::cited_vocabulary(3);
        let docs = cfg.generate();
        let abs_cite = docs[0]
            .abstract_text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| w.starts_with("d0k"))
            .count();
        assert_eq!(abs_cite, 1);
        assert!(docs[cfg.docs..].iter().all(|d| d.contexts[0].text.contains('k')));
    }

    #[test]
    fn planted_topics_are_disjoint() {
        let docs = PlantedTopics::default().generate();
        for (d, doc) in docs.iter().enumerate() {
            let topics: HashSet<usize> = doc.words().map(|w| PlantedTopics::topic_of(w).unwrap()).collect();
            assert_eq!(topics, HashSet::from([d % 2]));
        }
        assert_eq!(PlantedTopics::topic_of("t1w33"), Some(1));
        assert_eq!(PlantedTopics::topic_of("foo"), None);
    }

    #[test]
    fn bundled_fixture_matches_generator() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/synthetic_corpus.jsonl");
        let expected = bundled_corpus();
        if std::env::var_os("CITEREC_REGENERATE_FIXTURES").is_some() {
            crate::corpus::save_corpus(std::path::Path::new(path), &expected).unwrap();
        }
        let loaded = crate::corpus::load_corpus(std::path::Path::new(path)).unwrap();
        assert_eq!(loaded.documents, expected);
        assert_eq!(loaded.dangling_refs, 1);
    }
}
