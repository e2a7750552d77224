//! Paper records, pseudo-full-text assembly and train/test preparation.
//!
//! A [`Document`] carries its own outgoing citation contexts. From a loaded
//! set we build two kinds of training text:
//!
//! * citing orientation: title, abstract and the paper's own contexts, each
//!   context carrying markers for the papers it cites;
//! * cited orientation: title, abstract and every context elsewhere in the
//!   corpus that cites the paper.
//!
//! Markers are placed after the first `⌊len/2⌋` words of a context, one per
//! cited id in sorted order, and only for ids present in the corpus.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;
use crate::textproc::{tokenize_words, StopwordSet, Token};

/// Minimum number of non-stop-word tokens a test context needs to become a query.
pub const MIN_QUERY_TERMS: usize = 9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationContext {
    pub text: String,
    pub cited_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub year: i32,
    #[serde(default)]
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    #[serde(default)]
    pub contexts: Vec<CitationContext>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Citing,
    Cited,
}

impl Orientation {
    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::Citing => "citing",
            Orientation::Cited => "cited",
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "citing" => Ok(Orientation::Citing),
            "cited" => Ok(Orientation::Cited),
            other => Err(Error::Config(format!(
                "unknown orientation {other:?} (expected citing or cited)"
            ))),
        }
    }
}

/// Pseudo full text of one paper as a token stream with inline markers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingDocument {
    pub id: String,
    pub orientation: Orientation,
    pub tokens: Vec<Token>,
}

impl TrainingDocument {
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().filter_map(Token::as_word)
    }

    pub fn markers(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().filter_map(Token::as_cite)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestQuery {
    pub id: String,
    /// Stop-word-filtered words of the context; markers removed.
    pub context_tokens: Vec<String>,
    pub ground_truth: BTreeSet<String>,
    pub source_year: i32,
    /// Citing paper of the first occurrence of this context.
    pub source_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RejectedLine {
    pub line: usize,
    pub reason: String,
}

/// Outcome of [`load_corpus`]: the accepted documents plus what was skipped.
#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub documents: Vec<Document>,
    pub rejected: Vec<RejectedLine>,
    /// Contexts dropped because they cite nothing.
    pub dropped_contexts: usize,
    /// Cited ids that name no loaded document.
    pub dangling_refs: usize,
}

#[derive(Deserialize)]
struct RawContext {
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    cited_ids: Option<Vec<String>>,
}

#[derive(Deserialize)]
struct RawDocument {
    id: Option<String>,
    year: Option<i64>,
    #[serde(default)]
    title: Option<String>,
    #[serde(rename = "abstract", default)]
    abstract_text: Option<String>,
    #[serde(default)]
    contexts: Option<Vec<RawContext>>,
}

/// Read a corpus JSONL file, one document per line.
///
/// Malformed lines and records without `id`/`year` are skipped and listed
/// in the report; a repeated id is fatal.
pub fn load_corpus(path: &Path) -> Result<LoadReport> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut report = LoadReport::default();
    let mut seen = HashSet::new();

    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDocument = match serde_json::from_str(&line) {
            Ok(raw) => raw,
            Err(e) => {
                report.rejected.push(RejectedLine {
                    line: line_no,
                    reason: format!("malformed JSON: {e}"),
                });
                continue;
            }
        };
        let id = match raw.id {
            Some(id) if !id.trim().is_empty() => id,
            _ => {
                report.rejected.push(RejectedLine {
                    line: line_no,
                    reason: "missing id".into(),
                });
                continue;
            }
        };
        let Some(year) = raw.year.and_then(|y| i32::try_from(y).ok()) else {
            report.rejected.push(RejectedLine {
                line: line_no,
                reason: format!("missing or invalid year for {id:?}"),
            });
            continue;
        };
        if id.contains(crate::textproc::MARKER_CLOSE) {
            report.rejected.push(RejectedLine {
                line: line_no,
                reason: format!("id {id:?} contains a marker delimiter"),
            });
            continue;
        }
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }

        let mut contexts = Vec::new();
        for ctx in raw.contexts.unwrap_or_default() {
            let mut cited = Vec::new();
            for cid in ctx.cited_ids.unwrap_or_default() {
                if !cid.is_empty() && !cited.contains(&cid) {
                    cited.push(cid);
                }
            }
            if cited.is_empty() {
                report.dropped_contexts += 1;
                continue;
            }
            contexts.push(CitationContext {
                text: ctx.text.unwrap_or_default(),
                cited_ids: cited,
            });
        }
        report.documents.push(Document {
            id,
            year,
            title: raw.title.unwrap_or_default(),
            abstract_text: raw.abstract_text.unwrap_or_default(),
            contexts,
        });
    }

    report.dangling_refs = report
        .documents
        .iter()
        .flat_map(|d| &d.contexts)
        .flat_map(|c| &c.cited_ids)
        .filter(|id| !seen.contains(*id))
        .count();
    if !report.rejected.is_empty() {
        log::warn!(
            "{}: skipped {} invalid line(s)",
            path.display(),
            report.rejected.len()
        );
    }
    if report.dropped_contexts > 0 {
        log::warn!(
            "{}: dropped {} context(s) with no cited ids",
            path.display(),
            report.dropped_contexts
        );
    }
    Ok(report)
}

pub fn save_corpus(path: &Path, docs: &[Document]) -> Result<()> {
    jsonl::write_jsonl(path, docs)
}

fn context_tokens(ctx: &CitationContext, keep_marker: impl Fn(&str) -> bool) -> Vec<Token> {
    let words = tokenize_words(&ctx.text);
    let mut markers: Vec<&str> = ctx
        .cited_ids
        .iter()
        .map(String::as_str)
        .filter(|id| keep_marker(id))
        .collect();
    markers.sort_unstable();
    markers.dedup();

    let mid = words.len() / 2;
    let mut out = Vec::with_capacity(words.len() + markers.len());
    out.extend(words[..mid].iter().cloned().map(Token::Word));
    out.extend(markers.into_iter().map(|id| Token::Cite(id.to_string())));
    out.extend(words[mid..].iter().cloned().map(Token::Word));
    out
}

fn header_tokens(doc: &Document) -> Vec<Token> {
    if doc.title.trim().is_empty() {
        log::warn!("document {:?} has an empty title", doc.id);
    }
    tokenize_words(&doc.title)
        .into_iter()
        .chain(tokenize_words(&doc.abstract_text))
        .map(Token::Word)
        .collect()
}

/// Citing-orientation pseudo full text, one per document, in input order.
pub fn build_pseudo_fulltext(docs: &[Document]) -> Vec<TrainingDocument> {
    let ids: HashSet<&str> = docs.iter().map(|d| d.id.as_str()).collect();
    docs.iter()
        .map(|doc| {
            let mut tokens = header_tokens(doc);
            for ctx in &doc.contexts {
                tokens.extend(context_tokens(ctx, |id| ids.contains(id)));
            }
            TrainingDocument {
                id: doc.id.clone(),
                orientation: Orientation::Citing,
                tokens,
            }
        })
        .collect()
}

/// Cited-orientation pseudo full text: each paper is described by the
/// contexts that cite it, ordered by (citing id, context index). The
/// paper's own outgoing contexts are not included.
pub fn build_cited_pseudo_fulltext(docs: &[Document]) -> Vec<TrainingDocument> {
    let ids: HashSet<&str> = docs.iter().map(|d| d.id.as_str()).collect();
    let mut inlinks: HashMap<&str, Vec<(&str, usize, &CitationContext)>> = HashMap::new();
    for doc in docs {
        for (idx, ctx) in doc.contexts.iter().enumerate() {
            for cid in &ctx.cited_ids {
                inlinks
                    .entry(cid.as_str())
                    .or_default()
                    .push((doc.id.as_str(), idx, ctx));
            }
        }
    }
    for list in inlinks.values_mut() {
        list.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        list.dedup_by(|a, b| (a.0, a.1) == (b.0, b.1));
    }

    docs.iter()
        .map(|doc| {
            let mut tokens = header_tokens(doc);
            if let Some(list) = inlinks.get(doc.id.as_str()) {
                for (_, _, ctx) in list {
                    tokens.extend(context_tokens(ctx, |id| ids.contains(id)));
                }
            }
            TrainingDocument {
                id: doc.id.clone(),
                orientation: Orientation::Cited,
                tokens,
            }
        })
        .collect()
}

/// Number of distinct citing documents per cited id, counted over the
/// contexts of a document set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CitationCounts(BTreeMap<String, usize>);

impl CitationCounts {
    pub fn from_documents(docs: &[Document]) -> Self {
        let mut citers: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for doc in docs {
            for cid in doc.contexts.iter().flat_map(|c| &c.cited_ids) {
                citers.entry(cid).or_default().insert(&doc.id);
            }
        }
        CitationCounts(
            citers
                .into_iter()
                .map(|(id, set)| (id.to_string(), set.len()))
                .collect(),
        )
    }

    pub fn get(&self, id: &str) -> usize {
        self.0.get(id).copied().unwrap_or(0)
    }
}

/// Keep documents cited by at least `min_citations` papers. Counts are
/// passed in so repeated filtering stays consistent with one-shot filtering.
pub fn filter_min_citations(
    docs: &[Document],
    counts: &CitationCounts,
    min_citations: usize,
) -> Vec<Document> {
    docs.iter()
        .filter(|d| counts.get(&d.id) >= min_citations)
        .cloned()
        .collect()
}

/// Inclusive range of publication years.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct YearRange {
    pub start: i32,
    pub end: i32,
}

impl YearRange {
    pub fn new(start: i32, end: i32) -> Result<Self> {
        if start > end {
            return Err(Error::Config(format!("empty year range {start}-{end}")));
        }
        Ok(YearRange { start, end })
    }

    pub fn contains(&self, year: i32) -> bool {
        self.start <= year && year <= self.end
    }

    pub fn overlaps(&self, other: &YearRange) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

impl fmt::Display for YearRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.start == self.end {
            write!(f, "{}", self.start)
        } else {
            write!(f, "{}-{}", self.start, self.end)
        }
    }
}

impl FromStr for YearRange {
    type Err = Error;

    /// `"1991-2016"` or a single year `"2017"`.
    fn from_str(s: &str) -> Result<Self> {
        let parse = |part: &str| {
            part.trim()
                .parse::<i32>()
                .map_err(|_| Error::Config(format!("invalid year range {s:?}")))
        };
        match s.trim().split_once('-') {
            Some((a, b)) => YearRange::new(parse(a)?, parse(b)?),
            None => {
                let y = parse(s)?;
                YearRange::new(y, y)
            }
        }
    }
}

impl Serialize for YearRange {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearRange {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Partition by year. Documents outside both ranges are dropped.
pub fn split_train_test(
    docs: &[Document],
    train_years: YearRange,
    test_years: YearRange,
) -> Result<(Vec<Document>, Vec<Document>)> {
    if train_years.overlaps(&test_years) {
        return Err(Error::Config(format!(
            "training years {train_years} overlap test years {test_years}"
        )));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for doc in docs {
        if train_years.contains(doc.year) {
            train.push(doc.clone());
        } else if test_years.contains(doc.year) {
            test.push(doc.clone());
        }
    }
    Ok((train, test))
}

/// Turn the contexts of test-period papers into evaluation queries.
///
/// Identical contexts (same word sequence) are merged and their cited ids
/// unioned; the ground truth is then restricted to `train_ids`. Queries with
/// no remaining ground truth, or with fewer than [`MIN_QUERY_TERMS`]
/// non-stop-word tokens, are dropped.
pub fn extract_test_queries(
    test_source: &[Document],
    train_ids: &HashSet<String>,
    stopwords: &StopwordSet,
) -> Vec<TestQuery> {
    struct Group {
        words: Vec<String>,
        cited: BTreeSet<String>,
        year: i32,
        source_id: String,
    }

    let mut groups: Vec<Group> = Vec::new();
    let mut by_key: HashMap<String, usize> = HashMap::new();
    for doc in test_source {
        for ctx in &doc.contexts {
            let words = tokenize_words(&ctx.text);
            let key = words.join(" ");
            let slot = *by_key.entry(key).or_insert_with(|| {
                groups.push(Group {
                    words,
                    cited: BTreeSet::new(),
                    year: doc.year,
                    source_id: doc.id.clone(),
                });
                groups.len() - 1
            });
            groups[slot].cited.extend(ctx.cited_ids.iter().cloned());
        }
    }

    groups
        .into_iter()
        .filter_map(|g| {
            let ground_truth: BTreeSet<String> = g
                .cited
                .into_iter()
                .filter(|id| train_ids.contains(id))
                .collect();
            let context_tokens: Vec<String> = g
                .words
                .into_iter()
                .filter(|w| !stopwords.contains(w))
                .collect();
            (!ground_truth.is_empty() && context_tokens.len() >= MIN_QUERY_TERMS).then(|| {
                TestQuery {
                    id: String::new(),
                    context_tokens,
                    ground_truth,
                    source_year: g.year,
                    source_id: g.source_id,
                }
            })
        })
        .enumerate()
        .map(|(i, mut q)| {
            q.id = format!("q{:06}", i + 1);
            q
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn doc(id: &str, year: i32, contexts: &[(&str, &[&str])]) -> Document {
        Document {
            id: id.into(),
            year,
            title: format!("title {id}"),
            abstract_text: String::new(),
            contexts: contexts
                .iter()
                .map(|(text, cited)| CitationContext {
                    text: text.to_string(),
                    cited_ids: cited.iter().map(|s| s.to_string()).collect(),
                })
                .collect(),
        }
    }

    fn write_tmp(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    fn words(toks: &[Token]) -> Vec<String> {
        toks.iter().map(Token::wire).collect()
    }

    #[test]
    fn loads_valid_lines() {
        let f = write_tmp(&[
            r#"{"id":"a","year":2000,"title":"A","abstract":"x","contexts":[]}"#,
            r#"{"id":"b","year":2001,"title":"B","abstract":"y","contexts":[{"text":"t","cited_ids":["a"]}]}"#,
            r#"{"id":"c","year":2002,"title":"C","abstract":"z","contexts":[]}"#,
        ]);
        let report = load_corpus(f.path()).unwrap();
        assert_eq!(report.documents.len(), 3);
        assert!(report.rejected.is_empty());
        assert_eq!(report.dangling_refs, 0);
    }

    #[test]
    fn duplicate_id_is_fatal() {
        let f = write_tmp(&[r#"{"id":"a","year":2000}"#, r#"{"id":"a","year":2001}"#]);
        match load_corpus(f.path()) {
            Err(Error::DuplicateId(id)) => assert_eq!(id, "a"),
            other => panic!("expected duplicate id error, got {other:?}"),
        }
    }

    #[test]
    fn five_line_fixture_counts() {
        let f = write_tmp(&[
            r#"{"id":"a","year":2000,"title":"A","abstract":"","contexts":[{"text":"empty","cited_ids":[]},{"text":"ok","cited_ids":["b","b","zz"]}]}"#,
            r#"{"id":"b","year":2001,"title":"B","abstract":"","contexts":[]}"#,
            r#"{"year":2001,"title":"no id"}"#,
            r#"{"id":"d","title":"no year"}"#,
            r#"{not json"#,
        ]);
        let report = load_corpus(f.path()).unwrap();
        assert_eq!(report.documents.len(), 2);
        assert_eq!(report.dropped_contexts, 1);
        assert_eq!(
            report.rejected.iter().map(|r| r.line).collect::<Vec<_>>(),
            vec![3, 4, 5]
        );
        // Duplicate cited ids collapse; the dangling one is kept and counted.
        assert_eq!(report.documents[0].contexts.len(), 1);
        assert_eq!(report.documents[0].contexts[0].cited_ids, vec!["b", "zz"]);
        assert_eq!(report.dangling_refs, 1);
    }

    #[test]
    fn unreadable_file_is_an_error() {
        let err = load_corpus(Path::new("/nonexistent/corpus.jsonl")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn save_and_reload_round_trip() {
        let docs = vec![
            doc("a", 2000, &[("alpha beta", &["b"])]),
            doc("b", 2001, &[("gamma", &["a", "x"])]),
        ];
        let f = tempfile::NamedTempFile::new().unwrap();
        save_corpus(f.path(), &docs).unwrap();
        assert_eq!(load_corpus(f.path()).unwrap().documents, docs);
    }

    #[test]
    fn title_only_document_has_no_markers() {
        let td = build_pseudo_fulltext(&[doc("a", 2000, &[])]);
        assert_eq!(words(&td[0].tokens), vec!["title", "a"]);
        assert_eq!(td[0].markers().count(), 0);
    }

    #[test]
    fn marker_inserted_at_midpoint() {
        let mut d = doc("a", 2000, &[("one two three four", &["x"])]);
        d.title.clear();
        let x = doc("x", 1999, &[]);
        let td = build_pseudo_fulltext(&[d, x]);
        assert_eq!(
            words(&td[0].tokens),
            vec!["one", "two", "⟦CITE:x⟧", "three", "four"]
        );
    }

    #[test]
    fn multi_cite_markers_are_sorted_and_adjacent() {
        let mut d = doc("a", 2000, &[("one two three", &["y", "x", "dangling"])]);
        d.title.clear();
        let docs = vec![d, doc("x", 1999, &[]), doc("y", 1999, &[])];
        let td = build_pseudo_fulltext(&docs);
        assert_eq!(
            words(&td[0].tokens),
            vec!["one", "⟦CITE:x⟧", "⟦CITE:y⟧", "two", "three"]
        );
    }

    #[test]
    fn cited_orientation_orders_inlinks() {
        let docs = vec![
            doc("b", 2001, &[("from b", &["d"])]),
            doc("a", 2001, &[("first a", &["q"]), ("second a", &["d"])]),
            doc("d", 2000, &[("own context", &["a"])]),
        ];
        let td = build_cited_pseudo_fulltext(&docs);
        let d = td.iter().find(|t| t.id == "d").unwrap();
        assert_eq!(
            words(&d.tokens),
            vec!["title", "d", "second", "⟦CITE:d⟧", "a", "from", "⟦CITE:d⟧", "b"]
        );
        let b = td.iter().find(|t| t.id == "b").unwrap();
        assert_eq!(words(&b.tokens), vec!["title", "b"]);
    }

    #[test]
    fn single_cite_corpus_conserves_context_mass() {
        let docs = vec![
            doc("a", 2000, &[("x y z", &["b"]), ("p q", &["c"])]),
            doc("b", 2000, &[("r s t u", &["c"])]),
            doc("c", 2000, &[("v", &["a"])]),
        ];
        let citing = build_pseudo_fulltext(&docs);
        let cited = build_cited_pseudo_fulltext(&docs);
        let header: usize = docs
            .iter()
            .map(|d| tokenize_words(&d.title).len() + tokenize_words(&d.abstract_text).len())
            .sum();
        let total = |t: &[TrainingDocument]| t.iter().map(|d| d.tokens.len()).sum::<usize>();
        assert_eq!(total(&citing) - header, total(&cited) - header);
        assert_eq!(total(&citing), total(&cited));
    }

    #[test]
    fn min_citation_boundary() {
        let mut docs = vec![doc("hub", 2000, &[]), doc("near", 2000, &[])];
        for i in 0..50 {
            let cited: &[&str] = if i < 49 { &["hub", "near"] } else { &["hub"] };
            docs.push(doc(&format!("c{i}"), 2001, &[("ctx", cited)]));
        }
        let counts = CitationCounts::from_documents(&docs);
        assert_eq!(counts.get("hub"), 50);
        assert_eq!(counts.get("near"), 49);
        let kept = filter_min_citations(&docs, &counts, 50);
        assert_eq!(kept.iter().map(|d| d.id.as_str()).collect::<Vec<_>>(), vec!["hub"]);
        assert_eq!(filter_min_citations(&docs, &counts, 0), docs);
    }

    #[test]
    fn citations_counted_once_per_citing_paper() {
        let docs = vec![
            doc("t", 2000, &[]),
            doc("a", 2001, &[("one", &["t"]), ("two", &["t"])]),
        ];
        assert_eq!(CitationCounts::from_documents(&docs).get("t"), 1);
    }

    #[test]
    fn year_split() {
        let docs = vec![doc("a", 2016, &[]), doc("b", 2017, &[]), doc("c", 2020, &[])];
        let (train, test) = split_train_test(
            &docs,
            "1991-2016".parse().unwrap(),
            "2017".parse().unwrap(),
        )
        .unwrap();
        assert_eq!(train.len(), 1);
        assert_eq!(test.len(), 1);
        assert_eq!(test[0].id, "b");

        let overlap = split_train_test(
            &docs,
            YearRange::new(1991, 2017).unwrap(),
            YearRange::new(2017, 2018).unwrap(),
        );
        assert!(matches!(overlap, Err(Error::Config(_))));
        assert!("2018-2017".parse::<YearRange>().is_err());
        assert!(YearRange::new(2019, 2018).is_err());
    }

    fn train_set(ids: &[&str]) -> HashSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    const NINE: &str = "graph neural networks learn node embeddings capturing citation structure";

    #[test]
    fn ground_truth_restricted_to_training_ids() {
        let test = vec![doc("t", 2017, &[(NINE, &["x", "y"])])];
        let qs = extract_test_queries(&test, &train_set(&["y"]), &StopwordSet::bundled());
        assert_eq!(qs.len(), 1);
        assert_eq!(qs[0].ground_truth, BTreeSet::from(["y".to_string()]));
        assert_eq!(qs[0].source_year, 2017);
    }

    #[test]
    fn short_contexts_are_dropped() {
        let eight = "graph neural networks learn node embeddings capturing citation";
        let with_stops = "the graph of neural networks learn node embeddings capturing citation";
        let test = vec![doc("t", 2017, &[(eight, &["y"]), (with_stops, &["y"])])];
        let qs = extract_test_queries(&test, &train_set(&["y"]), &StopwordSet::bundled());
        assert!(qs.is_empty());
        let test = vec![doc("t", 2017, &[(NINE, &["y"])])];
        assert_eq!(
            extract_test_queries(&test, &train_set(&["y"]), &StopwordSet::bundled())[0]
                .context_tokens
                .len(),
            9
        );
    }

    #[test]
    fn duplicate_contexts_merge() {
        let test = vec![
            doc("s", 2017, &[(NINE, &["x"])]),
            doc("t", 2017, &[(NINE, &["y"])]),
        ];
        let qs = extract_test_queries(&test, &train_set(&["x", "y"]), &StopwordSet::bundled());
        assert_eq!(qs.len(), 1);
        assert_eq!(
            qs[0].ground_truth,
            BTreeSet::from(["x".to_string(), "y".to_string()])
        );
        assert_eq!(qs[0].source_id, "s");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn corpus() -> impl Strategy<Value = Vec<Document>> {
            (2usize..8).prop_flat_map(|n| {
                proptest::collection::vec(
                    proptest::collection::vec(
                        (
                            proptest::collection::vec("[a-d]{1,3}", 0..6),
                            proptest::collection::btree_set(0..n, 1..3),
                        ),
                        0..4,
                    ),
                    n,
                )
                .prop_map(move |ctxs| {
                    ctxs.into_iter()
                        .enumerate()
                        .map(|(i, cs)| Document {
                            id: format!("d{i}"),
                            year: 2000 + (i as i32 % 3),
                            title: String::new(),
                            abstract_text: String::new(),
                            contexts: cs
                                .into_iter()
                                .map(|(ws, cited)| CitationContext {
                                    text: ws.join(" "),
                                    cited_ids: cited.into_iter().map(|c| format!("d{c}")).collect(),
                                })
                                .collect(),
                        })
                        .collect()
                })
            })
        }

        proptest! {
            #[test]
            fn orientation_duality(docs in corpus()) {
                // Every context word appears once in citing orientation and
                // once per cited id in cited orientation.
                let citing = build_pseudo_fulltext(&docs);
                let cited = build_cited_pseudo_fulltext(&docs);
                let count = |t: &[TrainingDocument]| t.iter().map(|d| d.words().count()).sum::<usize>();
                let expect_citing: usize = docs.iter().flat_map(|d| &d.contexts)
                    .map(|c| tokenize_words(&c.text).len()).sum();
                let expect_cited: usize = docs.iter().flat_map(|d| &d.contexts)
                    .map(|c| tokenize_words(&c.text).len() * c.cited_ids.len()).sum();
                prop_assert_eq!(count(&citing), expect_citing);
                prop_assert_eq!(count(&cited), expect_cited);
            }

            #[test]
            fn filter_composition(docs in corpus(), a in 0usize..4, b in 0usize..4) {
                let counts = CitationCounts::from_documents(&docs);
                let twice = filter_min_citations(&filter_min_citations(&docs, &counts, b), &counts, a);
                prop_assert_eq!(twice, filter_min_citations(&docs, &counts, a.max(b)));
            }

            #[test]
            fn queries_only_reference_training_ids(docs in corpus(), keep in proptest::collection::btree_set(0usize..8, 1..4)) {
                let train: HashSet<String> = keep.iter().map(|k| format!("d{k}")).collect();
                for q in extract_test_queries(&docs, &train, &StopwordSet::empty()) {
                    prop_assert!(!q.ground_truth.is_empty());
                    prop_assert!(q.ground_truth.iter().all(|id| train.contains(id)));
                }
            }
        }
    }
}
