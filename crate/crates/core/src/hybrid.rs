//! Semi-genetic stochastic rank fusion.
//!
//! One generation, no cross-over or mutation:
//!
//! 1. take the top `k` of each of the `m` component lists (pool of `l = m·k`);
//! 2. each appearance at rank `r` carries fitness `1/r` (a paper in several
//!    lists keeps every score);
//! 3. summed fitness divided by the grand total gives a draw probability;
//! 4. draw `n` samples with replacement from one seeded 64-bit generator;
//! 5. count the draws;
//! 6. sort by count (then probability, then id);
//! 7. return the top `k`.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranking::{RankedList, Recommender};

/// Default number of draws.
pub const DEFAULT_DRAWS: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    /// Depth taken from each component and length of the fused output.
    pub k: usize,
    /// Number of draws with replacement.
    pub n: u64,
    pub seed: u64,
    /// Optional per-component fitness multipliers (default 1.0 each).
    pub weights: Option<Vec<f64>>,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            k: crate::bm25::DEFAULT_TOP_K,
            n: DEFAULT_DRAWS,
            seed: 1,
            weights: None,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("fusion k must be >= 1".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("fusion n must be >= 1".into()));
        }
        if let Some(w) = &self.weights {
            if w.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
                return Err(Error::Config("fusion weights must be finite and >= 0".into()));
            }
        }
        Ok(())
    }

    fn weight(&self, component: usize) -> f64 {
        self.weights
            .as_ref()
            .and_then(|w| w.get(component).copied())
            .unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedEntry {
    pub id: String,
    pub count: u64,
    pub probability: f64,
}

/// Fusion result with counts and probabilities kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedList {
    pub source: String,
    /// Total number of draws; the counts of the whole pool sum to this.
    pub draws: u64,
    /// Size of the candidate pool before truncation.
    pub pool_size: usize,
    pub entries: Vec<FusedEntry>,
}

impl FusedList {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.id.as_str())
    }

    /// Ranked view with the draw count as score.
    pub fn to_ranked(&self) -> RankedList {
        RankedList::new(
            self.source.clone(),
            self.entries
                .iter()
                .map(|e| (e.id.clone(), e.count as f64))
                .collect(),
        )
    }
}

/// Reciprocal-rank fitness of every appearance, per document.
pub fn fitness_scores(lists: &[RankedList]) -> BTreeMap<String, Vec<f64>> {
    weighted_fitness(lists, &FusionConfig::default(), usize::MAX)
}

fn weighted_fitness(lists: &[RankedList], config: &FusionConfig, depth: usize) -> BTreeMap<String, Vec<f64>> {
    let mut fitness: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (c, list) in lists.iter().enumerate() {
        let w = config.weight(c);
        for (r, (id, _)) in list.entries.iter().take(depth).enumerate() {
            fitness
                .entry(id.clone())
                .or_default()
                .push(w / (r + 1) as f64);
        }
    }
    fitness
}

/// Sum each document's scores and divide by the grand total.
pub fn to_probabilities(fitness: &BTreeMap<String, Vec<f64>>) -> Result<BTreeMap<String, f64>> {
    let summed: Vec<(&String, f64)> = fitness
        .iter()
        .map(|(id, s)| (id, s.iter().sum::<f64>()))
        .collect();
    let total: f64 = summed.iter().map(|(_, s)| s).sum();
    if summed.is_empty() || total <= 0.0 {
        return Err(Error::InvalidInput("no fitness scores to normalize".into()));
    }
    Ok(summed
        .into_iter()
        .map(|(id, s)| (id.clone(), s / total))
        .collect())
}

/// Fuse component lists by sampling with replacement.
pub fn fuse(lists: &[RankedList], config: &FusionConfig) -> Result<FusedList> {
    config.validate()?;
    let source = lists
        .iter()
        .map(|l| l.source.as_str())
        .collect::<Vec<_>>()
        .join("+");
    let fitness = weighted_fitness(lists, config, config.k);
    if fitness.values().flatten().all(|&f| f == 0.0) {
        return Ok(FusedList {
            source,
            draws: config.n,
            pool_size: 0,
            entries: Vec::new(),
        });
    }
    let probs = to_probabilities(&fitness)?;
    let ids: Vec<&String> = probs.keys().collect();
    let p: Vec<f64> = probs.values().copied().collect();

    let sampler = WeightedIndex::new(&p)
        .map_err(|e| Error::InvalidInput(format!("bad fusion probabilities: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut counts = vec![0u64; ids.len()];
    for _ in 0..config.n {
        counts[sampler.sample(&mut rng)] += 1;
    }

    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| {
        counts[b]
            .cmp(&counts[a])
            .then_with(|| p[b].partial_cmp(&p[a]).unwrap_or(Ordering::Equal))
            .then_with(|| ids[a].cmp(ids[b]))
    });
    let pool_size = ids.len();
    order.truncate(config.k);
    Ok(FusedList {
        source,
        draws: config.n,
        pool_size,
        entries: order
            .into_iter()
            .map(|i| FusedEntry {
                id: ids[i].clone(),
                count: counts[i],
                probability: p[i],
            })
            .collect(),
    })
}

/// Any number of components fused into one recommender.
pub struct HybridRecommender<R> {
    pub label: String,
    pub components: Vec<R>,
    pub config: FusionConfig,
}

impl<R: Recommender> HybridRecommender<R> {
    pub fn new(label: impl Into<String>, components: Vec<R>, config: FusionConfig) -> Self {
        HybridRecommender {
            label: label.into(),
            components,
            config,
        }
    }

    pub fn fuse_query(&self, query: &[String]) -> Result<FusedList> {
        let lists = self
            .components
            .iter()
            .map(|c| c.recommend(query, self.config.k))
            .collect::<Result<Vec<_>>>()?;
        let mut fused = fuse(&lists, &self.config)?;
        fused.source = self.label.clone();
        Ok(fused)
    }
}

impl<R: Recommender> Recommender for HybridRecommender<R> {
    fn label(&self) -> &str {
        &self.label
    }

    fn recommend(&self, query: &[String], k: usize) -> Result<RankedList> {
        let mut list = self.fuse_query(query)?.to_ranked();
        list.entries.truncate(k);
        Ok(list)
    }
}

/// BM25 and hd2vOUT trained on the same citing-orientation corpus.
pub fn hybrid12(
    query: &[String],
    bm25: &dyn Recommender,
    hd2v_out: &dyn Recommender,
    config: &FusionConfig,
) -> Result<FusedList> {
    HybridRecommender::new("hybrid", vec![bm25, hd2v_out], config.clone()).fuse_query(query)
}

/// hd2vOUT and BM25 on the cited-orientation corpus plus BM25 on the
/// citing-orientation corpus.
pub fn hybrid23(
    query: &[String],
    hd2v_out_cited: &dyn Recommender,
    bm25_cited: &dyn Recommender,
    bm25_citing: &dyn Recommender,
    config: &FusionConfig,
) -> Result<FusedList> {
    HybridRecommender::new(
        "hybrid23",
        vec![hd2v_out_cited, bm25_cited, bm25_citing],
        config.clone(),
    )
    .fuse_query(query)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn list(ids: &[&str]) -> RankedList {
        RankedList::new(
            "t",
            ids.iter()
                .enumerate()
                .map(|(i, id)| (id.to_string(), (ids.len() - i) as f64))
                .collect(),
        )
    }

    fn cfg(n: u64, seed: u64) -> FusionConfig {
        FusionConfig {
            k: 500,
            n,
            seed,
            weights: None,
        }
    }

    struct Fixed(RankedList);

    impl Recommender for Fixed {
        fn label(&self) -> &str {
            &self.0.source
        }

        fn recommend(&self, _query: &[String], k: usize) -> Result<RankedList> {
            let mut l = self.0.clone();
            l.entries.truncate(k);
            Ok(l)
        }
    }

    #[test]
    fn reciprocal_rank_fitness() {
        let f = fitness_scores(&[list(&["A", "B", "C"])]);
        assert_eq!(f["A"], vec![1.0]);
        assert_eq!(f["B"], vec![0.5]);
        assert_eq!(f["C"], vec![1.0 / 3.0]);
        let f = fitness_scores(&[list(&["A", "X"]), list(&["Y", "A"]), list(&[])]);
        assert_eq!(f["A"], vec![1.0, 0.5]);
        assert_eq!(f.len(), 3);
    }

    #[test]
    fn exact_probabilities() {
        let p = to_probabilities(&fitness_scores(&[list(&["A", "B"]), list(&["B", "C"])])).unwrap();
        assert_eq!(p["A"], 1.0 / 3.0);
        assert_eq!(p["B"], 1.0 / 2.0);
        assert_eq!(p["C"], 1.0 / 6.0);
        let single = to_probabilities(&fitness_scores(&[list(&["A"])])).unwrap();
        assert_eq!(single["A"], 1.0);
        assert!(to_probabilities(&BTreeMap::new()).is_err());
    }

    #[test]
    fn symmetric_inputs_symmetric_probabilities() {
        let p = to_probabilities(&fitness_scores(&[list(&["A", "B"]), list(&["B", "A"])])).unwrap();
        assert_eq!(p["A"], p["B"]);
    }

    #[test]
    fn single_outcome() {
        let fused = fuse(&[list(&["A"]), list(&["A"])], &cfg(1000, 3)).unwrap();
        assert_eq!(fused.entries.len(), 1);
        assert_eq!(fused.entries[0].id, "A");
        assert_eq!(fused.entries[0].count, 1000);
    }

    #[test]
    fn all_empty_lists() {
        let fused = fuse(&[list(&[]), list(&[])], &cfg(10, 1)).unwrap();
        assert!(fused.entries.is_empty());
    }

    #[test]
    fn three_disjoint_singletons() {
        let fused = fuse(&[list(&["A"]), list(&["B"]), list(&["C"])], &cfg(30_000, 9)).unwrap();
        let mut ids: Vec<&str> = fused.ids().collect();
        for e in &fused.entries {
            assert_eq!(e.probability, 1.0 / 3.0);
        }
        let counts: Vec<u64> = fused.entries.iter().map(|e| e.count).collect();
        assert!(counts.windows(2).all(|w| w[0] >= w[1]));
        ids.sort_unstable();
        assert_eq!(ids, vec!["A", "B", "C"]);
    }

    #[test]
    fn ties_break_by_probability_then_id() {
        // n = 1 leaves every document but one at count 0.
        let fused = fuse(&[list(&["B", "A", "C"]), list(&["D"])], &cfg(1, 5)).unwrap();
        let rest: Vec<&str> = fused.entries[1..].iter().map(|e| e.id.as_str()).collect();
        let mut expect: Vec<&str> = vec!["B", "D", "A", "C"];
        expect.retain(|id| *id != fused.entries[0].id);
        assert_eq!(rest, expect);
    }

    #[test]
    fn truncates_to_k_and_component_depth() {
        let long: Vec<String> = (0..20).map(|i| format!("d{i:02}")).collect();
        let refs: Vec<&str> = long.iter().map(String::as_str).collect();
        let config = FusionConfig { k: 5, ..cfg(10_000, 1) };
        let fused = fuse(&[list(&refs), list(&refs[10..])], &config).unwrap();
        assert_eq!(fused.entries.len(), 5);
        assert_eq!(fused.pool_size, 10);
    }

    #[test]
    fn weights_scale_fitness() {
        let config = FusionConfig {
            weights: Some(vec![3.0, 1.0]),
            ..cfg(10, 1)
        };
        let f = weighted_fitness(&[list(&["A"]), list(&["B"])], &config, 10);
        assert_eq!(f["A"], vec![3.0]);
        assert_eq!(f["B"], vec![1.0]);
    }

    #[test]
    fn hybrid_compositions() {
        let a = Fixed(list(&["A", "B"]));
        let b = Fixed(list(&["B", "C"]));
        let fused = hybrid12(&[], &a, &b, &cfg(100_000, 2)).unwrap();
        assert_eq!(fused.ids().collect::<Vec<_>>(), vec!["B", "A", "C"]);
        assert_eq!(fused.source, "hybrid");

        let x = Fixed(list(&["X"]));
        let fused = hybrid23(&[], &x, &x, &x, &cfg(100, 2)).unwrap();
        assert_eq!(fused.ids().collect::<Vec<_>>(), vec!["X"]);

        let disjoint = hybrid12(&[], &Fixed(list(&["A", "B"])), &Fixed(list(&["C", "D"])), &cfg(1000, 2)).unwrap();
        assert_eq!(disjoint.pool_size, 4);
    }

    #[test]
    fn one_empty_component_keeps_other_order() {
        let ids: Vec<String> = (0..8).map(|i| format!("p{i}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let fused = hybrid12(&[], &Fixed(list(&refs)), &Fixed(list(&[])), &cfg(1_000_000, 4)).unwrap();
        assert_eq!(fused.ids().collect::<Vec<_>>(), refs);
    }

    fn ranked_ids() -> impl Strategy<Value = Vec<String>> {
        proptest::collection::btree_set(0u32..40, 1..8).prop_map(|s| s.into_iter().collect::<Vec<_>>()).prop_shuffle().prop_map(|v| {
            v.into_iter().map(|i| format!("d{i:02}")).collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn counts_sum_to_n_and_ids_come_from_inputs(
            a in ranked_ids(), b in ranked_ids(), n in 1u64..5000, seed in any::<u64>()
        ) {
            let la = list(&a.iter().map(String::as_str).collect::<Vec<_>>());
            let lb = list(&b.iter().map(String::as_str).collect::<Vec<_>>());
            let fused = fuse(&[la.clone(), lb.clone()], &cfg(n, seed)).unwrap();
            prop_assert_eq!(fused.entries.iter().map(|e| e.count).sum::<u64>(), n);
            for id in fused.ids() {
                prop_assert!(a.iter().chain(&b).any(|x| x == id));
            }
            prop_assert_eq!(&fused, &fuse(&[la, lb], &cfg(n, seed)).unwrap());
        }

        #[test]
        fn frequencies_within_five_sigma(a in ranked_ids(), b in ranked_ids(), seed in any::<u64>()) {
            let n = 200_000u64;
            let la = list(&a.iter().map(String::as_str).collect::<Vec<_>>());
            let lb = list(&b.iter().map(String::as_str).collect::<Vec<_>>());
            let fused = fuse(&[la, lb], &cfg(n, seed)).unwrap();
            for e in &fused.entries {
                let p = e.probability;
                let sigma = (p * (1.0 - p) / n as f64).sqrt();
                prop_assert!((e.count as f64 / n as f64 - p).abs() <= 5.0 * sigma + 1e-12);
            }
        }

        #[test]
        fn fusing_a_list_with_itself_keeps_its_order(a in ranked_ids(), seed in any::<u64>()) {
            // Adjacent reciprocal ranks differ by at least 1/42 here, far
            // beyond the sampling noise of a million draws.
            let refs: Vec<&str> = a.iter().map(String::as_str).collect();
            let l = list(&refs);
            let fused = fuse(&[l.clone(), l], &cfg(1_000_000, seed)).unwrap();
            prop_assert_eq!(fused.ids().collect::<Vec<_>>(), refs);
        }
    }
}
