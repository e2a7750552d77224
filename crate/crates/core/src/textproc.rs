//! Tokenization, normalization and stop-word filtering.
//!
//! Every retrieval and training component consumes the same token stream, so
//! everything here is deterministic and free of locale or global state.
//! Citation markers travel inside text using the wire form
//! `⟦CITE:<id>⟧` and come out of [`tokenize`] as [`Token::Cite`].

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Opening delimiter of a citation marker.
pub const MARKER_OPEN: &str = "⟦CITE:";
/// Closing delimiter of a citation marker. Ids may not contain it.
pub const MARKER_CLOSE: &str = "⟧";

static DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// A normalized token: either a word or a citation marker naming a document id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Token {
    Word(String),
    Cite(String),
}

impl Token {
    /// The indexable surface: the lowercase word or the cited id.
    pub fn text(&self) -> &str {
        match self {
            Token::Word(w) => w,
            Token::Cite(id) => id,
        }
    }

    pub fn is_marker(&self) -> bool {
        matches!(self, Token::Cite(_))
    }

    pub fn as_word(&self) -> Option<&str> {
        match self {
            Token::Word(w) => Some(w),
            Token::Cite(_) => None,
        }
    }

    pub fn as_cite(&self) -> Option<&str> {
        match self {
            Token::Cite(id) => Some(id),
            Token::Word(_) => None,
        }
    }

    /// Wire form: words as-is, markers as `⟦CITE:id⟧`.
    pub fn wire(&self) -> String {
        match self {
            Token::Word(w) => w.clone(),
            Token::Cite(id) => marker_wire(id),
        }
    }

    /// Inverse of [`Token::wire`]. Words are normalized, so a lowercase word
    /// can never collide with the uppercase marker prefix.
    pub fn from_wire(s: &str) -> Token {
        match parse_marker(s) {
            Some(id) => Token::Cite(id.to_string()),
            None => Token::Word(s.to_string()),
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.wire())
    }
}

impl Serialize for Token {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.wire())
    }
}

impl<'de> Deserialize<'de> for Token {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(Token::from_wire(&s))
    }
}

/// Bit-exact marker wire form for `id`.
pub fn marker_wire(id: &str) -> String {
    format!("{MARKER_OPEN}{id}{MARKER_CLOSE}")
}

fn parse_marker(s: &str) -> Option<&str> {
    let id = s.strip_prefix(MARKER_OPEN)?.strip_suffix(MARKER_CLOSE)?;
    if id.is_empty() || id.contains(MARKER_CLOSE) {
        None
    } else {
        Some(id)
    }
}

/// Lowercase and strip leading/trailing non-alphanumeric characters.
/// Returns `None` when nothing is left.
pub fn normalize_word(raw: &str) -> Option<String> {
    let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
    if trimmed.is_empty() {
        return None;
    }
    let lower = trimmed.to_lowercase();
    // Lowercasing can expose new edge characters in rare scripts.
    let lower = lower.trim_matches(|c: char| !c.is_alphanumeric());
    (!lower.is_empty()).then(|| lower.to_string())
}

fn push_words(segment: &str, out: &mut Vec<Token>) {
    out.extend(segment.split_whitespace().filter_map(normalize_word).map(Token::Word));
}

/// Split `text` into normalized tokens. Marker wire forms are recognised
/// anywhere in the text (even glued to punctuation) and passed through
/// untouched.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find(MARKER_OPEN) {
        let after = &rest[start + MARKER_OPEN.len()..];
        let Some(end) = after.find(MARKER_CLOSE) else {
            break;
        };
        let id = &after[..end];
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            // Not a marker; treat the opener as ordinary text.
            push_words(&rest[..start + MARKER_OPEN.len()], &mut out);
            rest = after;
            continue;
        }
        push_words(&rest[..start], &mut out);
        out.push(Token::Cite(id.to_string()));
        rest = &after[end + MARKER_CLOSE.len()..];
    }
    push_words(rest, &mut out);
    out
}

/// Word tokens of `text` only; markers are discarded.
pub fn tokenize_words(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter_map(|t| match t {
            Token::Word(w) => Some(w),
            Token::Cite(_) => None,
        })
        .collect()
}

/// A set of normalized stop words.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopwordSet {
    words: BTreeSet<String>,
}

impl StopwordSet {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words = words
            .into_iter()
            .filter_map(|w| normalize_word(w.as_ref()))
            .collect();
        StopwordSet { words }
    }

    /// The list shipped with the crate (`data/stopwords.txt`).
    pub fn bundled() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// One word per line; `#` starts a comment line.
    pub fn parse(contents: &str) -> Self {
        Self::new(
            contents
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let contents = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&contents))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

/// Drop stop-word tokens. Markers always survive; order is preserved.
pub fn remove_stopwords(tokens: &[Token], stopwords: &StopwordSet) -> Vec<Token> {
    tokens
        .iter()
        .filter(|t| match t {
            Token::Word(w) => !stopwords.contains(w),
            Token::Cite(_) => true,
        })
        .cloned()
        .collect()
}

/// Tokenize, keep words only and remove stop words: the query form used
/// for test contexts and ad-hoc recommendation requests.
pub fn query_terms(text: &str, stopwords: &StopwordSet) -> Vec<String> {
    tokenize_words(text)
        .into_iter()
        .filter(|w| !stopwords.contains(w))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(s: &str) -> Token {
        Token::Word(s.to_string())
    }

    #[test]
    fn tokenize_lowercases_and_strips_punctuation() {
        assert_eq!(tokenize("The CAT, sat."), vec![w("the"), w("cat"), w("sat")]);
    }

    #[test]
    fn tokenize_passes_markers_through() {
        assert_eq!(
            tokenize("see ⟦CITE:p42⟧ here"),
            vec![w("see"), Token::Cite("p42".into()), w("here")]
        );
        // Glued to punctuation and case-sensitive ids.
        assert_eq!(
            tokenize("as shown(⟦CITE:ref-7⟧)."),
            vec![w("as"), w("shown"), Token::Cite("ref-7".into())]
        );
    }

    #[test]
    fn tokenize_keeps_internal_punctuation() {
        assert_eq!(tokenize("état-de-l'art"), vec![w("état-de-l'art")]);
        assert_eq!(tokenize("  ... -- !! "), Vec::<Token>::new());
    }

    #[test]
    fn unterminated_marker_is_text() {
        assert_eq!(tokenize("⟦CITE:abc and more"), vec![w("cite:abc"), w("and"), w("more")]);
    }

    #[test]
    fn wire_round_trip() {
        let toks = vec![w("graph"), Token::Cite("X1".into())];
        let json = serde_json::to_string(&toks).unwrap();
        assert_eq!(json, r#"["graph","⟦CITE:X1⟧"]"#);
        let back: Vec<Token> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, toks);
    }

    #[test]
    fn stopword_removal() {
        let sw = StopwordSet::new(["the"]);
        assert_eq!(remove_stopwords(&[w("the"), w("cat")], &sw), vec![w("cat")]);
        let marker = vec![Token::Cite("p42".into())];
        assert_eq!(remove_stopwords(&marker, &StopwordSet::new(["p42"])), marker);
    }

    #[test]
    fn stopword_file_parsing() {
        let sw = StopwordSet::parse("# comment\nThe\n\n  of \n");
        assert_eq!(sw.iter().collect::<Vec<_>>(), vec!["of", "the"]);
        let bundled = StopwordSet::bundled();
        assert!(bundled.contains("the") && bundled.contains("which"));
        assert!(!bundled.contains("graph"));
    }

    #[test]
    fn bundled_list_is_closed_under_normalizer() {
        for word in StopwordSet::bundled().iter() {
            assert_eq!(normalize_word(word).as_deref(), Some(word));
        }
    }

    proptest! {
        #[test]
        fn words_are_normalized(text in "\\PC{0,60}") {
            for tok in tokenize(&text) {
                if let Token::Word(word) = tok {
                    prop_assert!(!word.is_empty());
                    prop_assert!(!word.chars().any(char::is_whitespace));
                    prop_assert_eq!(normalize_word(&word), Some(word.clone()));
                }
            }
        }

        #[test]
        fn stopword_removal_idempotent_and_shrinking(
            words in proptest::collection::vec("[a-e]{1,2}", 0..30),
            stops in proptest::collection::vec("[a-e]{1,2}", 0..6),
        ) {
            let sw = StopwordSet::new(&stops);
            let toks: Vec<Token> = words.iter().map(|s| Token::Word(s.clone())).collect();
            let once = remove_stopwords(&toks, &sw);
            prop_assert!(once.len() <= toks.len());
            prop_assert_eq!(remove_stopwords(&once, &sw), once);
        }
    }
}
