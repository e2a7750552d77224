//! Offline evaluation: MAP, Recall@k, MRR and NDCG with binary relevance.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::TestQuery;
use crate::error::{Error, Result};
use crate::jsonl;
use crate::ranking::Recommender;

/// Cutoffs used when none are configured.
pub const DEFAULT_CUTOFFS: [usize; 2] = [5, 10];

pub const METRIC_NAMES: [&str; 4] = ["map", "recall", "mrr", "ndcg"];

/// AP@K: precision at each hit within the top `k`, summed and divided by
/// `min(|truth|, k)`. An empty ground truth is rejected; such queries are
/// filtered out during preparation.
pub fn average_precision(ranked: &[String], truth: &BTreeSet<String>, k: usize) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::InvalidInput("average precision needs a non-empty ground truth".into()));
    }
    if k == 0 {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, id) in ranked.iter().take(k).enumerate() {
        if truth.contains(id) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(sum / truth.len().min(k) as f64)
}

pub fn recall_at_k(ranked: &[String], truth: &BTreeSet<String>, k: usize) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = ranked.iter().take(k).filter(|id| truth.contains(*id)).count();
    hits as f64 / truth.len() as f64
}

pub fn reciprocal_rank(ranked: &[String], truth: &BTreeSet<String>, k: usize) -> f64 {
    ranked
        .iter()
        .take(k)
        .position(|id| truth.contains(id))
        .map_or(0.0, |r| 1.0 / (r + 1) as f64)
}

/// Position discount: 1 at rank 1, `log2(i)` from rank 2 on.
fn discount(rank: usize) -> f64 {
    if rank == 1 {
        1.0
    } else {
        (rank as f64).log2()
    }
}

pub fn dcg_at_k(ranked: &[String], truth: &BTreeSet<String>, k: usize) -> f64 {
    ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, id)| truth.contains(*id))
        .map(|(i, _)| 1.0 / discount(i + 1))
        .sum()
}

/// DCG of `min(|truth|, k)` relevant items at the top.
pub fn ideal_dcg_at_k(truth_len: usize, k: usize) -> f64 {
    (1..=truth_len.min(k)).map(|r| 1.0 / discount(r)).sum()
}

pub fn ndcg_at_k(ranked: &[String], truth: &BTreeSet<String>, k: usize) -> f64 {
    let ideal = ideal_dcg_at_k(truth.len(), k);
    if ideal == 0.0 {
        0.0
    } else {
        dcg_at_k(ranked, truth, k) / ideal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub map: f64,
    pub recall: f64,
    pub mrr: f64,
    pub ndcg: f64,
}

impl Metrics {
    pub fn compute(ranked: &[String], truth: &BTreeSet<String>, k: usize) -> Result<Self> {
        Ok(Metrics {
            map: average_precision(ranked, truth, k)?,
            recall: recall_at_k(ranked, truth, k),
            mrr: reciprocal_rank(ranked, truth, k),
            ndcg: ndcg_at_k(ranked, truth, k),
        })
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "map" => Some(self.map),
            "recall" => Some(self.recall),
            "mrr" => Some(self.mrr),
            "ndcg" => Some(self.ndcg),
            _ => None,
        }
    }

    fn values(&self) -> [f64; 4] {
        [self.map, self.recall, self.mrr, self.ndcg]
    }
}

/// Per-query row: ranking, truth and metrics at every cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub query_id: String,
    pub ranked: Vec<String>,
    pub ground_truth: BTreeSet<String>,
    pub metrics: BTreeMap<usize, Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub algorithm: String,
    pub n: usize,
    pub cutoffs: Vec<usize>,
    /// Mean of the per-query metrics at each cutoff.
    pub aggregates: BTreeMap<usize, Metrics>,
    pub queries: Vec<QueryResult>,
}

fn normalize_cutoffs(cutoffs: &[usize]) -> Result<Vec<usize>> {
    let set: BTreeSet<usize> = cutoffs.iter().copied().collect();
    if set.is_empty() || set.contains(&0) {
        return Err(Error::Config("cutoffs must be a non-empty list of positive integers".into()));
    }
    Ok(set.into_iter().collect())
}

impl EvalReport {
    /// Aggregate stored per-query rows; regenerating from the same rows is
    /// bit-identical.
    pub fn from_query_results(algorithm: impl Into<String>, cutoffs: &[usize], queries: Vec<QueryResult>) -> Result<Self> {
        let cutoffs = normalize_cutoffs(cutoffs)?;
        if queries.is_empty() {
            return Err(Error::InvalidInput("no test queries to evaluate".into()));
        }
        let n = queries.len();
        let mut aggregates = BTreeMap::new();
        for &k in &cutoffs {
            let mut sums = [0.0f64; 4];
            for q in &queries {
                let m = q.metrics.get(&k).ok_or_else(|| {
                    Error::InvalidInput(format!("query {} has no metrics at cutoff {k}", q.query_id))
                })?;
                for (s, v) in sums.iter_mut().zip(m.values()) {
                    *s += v;
                }
            }
            let [map, recall, mrr, ndcg] = sums.map(|s| s / n as f64);
            aggregates.insert(k, Metrics { map, recall, mrr, ndcg });
        }
        Ok(EvalReport {
            algorithm: algorithm.into(),
            n,
            cutoffs,
            aggregates,
            queries,
        })
    }

    pub fn at(&self, k: usize) -> Option<&Metrics> {
        self.aggregates.get(&k)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        jsonl::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        jsonl::read_json(path)
    }

    /// `(algorithm, cutoff, metric, value)` rows in a fixed order.
    pub fn rows(&self) -> Vec<(String, usize, &'static str, f64)> {
        let mut rows = Vec::new();
        for (&k, m) in &self.aggregates {
            for name in METRIC_NAMES {
                rows.push((self.algorithm.clone(), k, name, m.get(name).unwrap_or(0.0)));
            }
        }
        rows
    }
}

/// Run `recommender` over every query and aggregate.
pub fn run_evaluation<R: Recommender + ?Sized>(
    recommender: &R,
    queries: &[TestQuery],
    cutoffs: &[usize],
) -> Result<EvalReport> {
    let cutoffs = normalize_cutoffs(cutoffs)?;
    if queries.is_empty() {
        return Err(Error::InvalidInput("no test queries to evaluate".into()));
    }
    let depth = *cutoffs.last().unwrap_or(&10);
    let mut rows = Vec::with_capacity(queries.len());
    for q in queries {
        let ranked = recommender.recommend(&q.context_tokens, depth)?.id_vec();
        let metrics = cutoffs
            .iter()
            .map(|&k| Ok((k, Metrics::compute(&ranked, &q.ground_truth, k)?)))
            .collect::<Result<_>>()?;
        rows.push(QueryResult {
            query_id: q.id.clone(),
            ranked,
            ground_truth: q.ground_truth.clone(),
            metrics,
        });
    }
    EvalReport::from_query_results(recommender.label(), &cutoffs, rows)
}

/// Comparison table: `algorithm,cutoff,metric,value`.
pub fn comparison_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("algorithm,cutoff,metric,value\n");
    for r in reports {
        for (alg, k, metric, value) in r.rows() {
            let _ = writeln!(out, "{alg},{k},{metric},{value:.6}");
        }
    }
    out
}

/// Metric-versus-k curves, one whitespace-separated row per
/// (algorithm, metric, cutoff); blank lines separate series for gnuplot.
pub fn curve_data(reports: &[EvalReport]) -> String {
    let mut out = String::from("# algorithm metric k value\n");
    for r in reports {
        for name in METRIC_NAMES {
            for (&k, m) in &r.aggregates {
                let _ = writeln!(out, "{} {} {} {:.6}", r.algorithm, name, k, m.get(name).unwrap_or(0.0));
            }
            out.push('\n');
        }
    }
    out
}
