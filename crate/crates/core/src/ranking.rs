use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Ordered recommendations from one component, best first.
///
/// Serializes as `{"source": "...", "entries": [[id, score], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub source: String,
    pub entries: Vec<(String, f64)>,
}

impl RankedList {
    pub fn new(source: impl Into<String>, entries: Vec<(String, f64)>) -> Self {
        RankedList {
            source: source.into(),
            entries,
        }
    }

    pub fn empty(source: impl Into<String>) -> Self {
        Self::new(source, Vec::new())
    }

    /// Build from unordered scores: descending score, ties by ascending id,
    /// cut to `k`.
    pub fn from_scores(source: impl Into<String>, mut scored: Vec<(String, f64)>, k: usize) -> Self {
        sort_scored(&mut scored);
        scored.truncate(k);
        Self::new(source, scored)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }

    pub fn id_vec(&self) -> Vec<String> {
        self.ids().map(str::to_string).collect()
    }
}

pub(crate) fn sort_scored(scored: &mut [(String, f64)]) {
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
}

/// Anything that ranks candidate papers for a preprocessed citation context.
pub trait Recommender {
    fn label(&self) -> &str;

    /// `query` holds stop-word-filtered context words.
    fn recommend(&self, query: &[String], k: usize) -> Result<RankedList>;
}

impl<R: Recommender + ?Sized> Recommender for &R {
    fn label(&self) -> &str {
        (**self).label()
    }

    fn recommend(&self, query: &[String], k: usize) -> Result<RankedList> {
        (**self).recommend(query, k)
    }
}

impl<R: Recommender + ?Sized> Recommender for Box<R> {
    fn label(&self) -> &str {
        (**self).label()
    }

    fn recommend(&self, query: &[String], k: usize) -> Result<RankedList> {
        (**self).recommend(query, k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let list = RankedList::new("bm25", vec![("p1".into(), 2.5), ("p2".into(), 1.0)]);
        assert_eq!(
            serde_json::to_string(&list).unwrap(),
            r#"{"source":"bm25","entries":[["p1",2.5],["p2",1.0]]}"#
        );
    }

    #[test]
    fn from_scores_orders_and_truncates() {
        let list = RankedList::from_scores(
            "x",
            vec![("b".into(), 1.0), ("a".into(), 1.0), ("c".into(), 3.0)],
            2,
        );
        assert_eq!(list.id_vec(), vec!["c", "a"]);
    }
}
