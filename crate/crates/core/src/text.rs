//! Tokenization, normalization and digest helpers shared by every stage.

use std::collections::BTreeSet;

use sha2::{Digest, Sha256};

/// Lowercased alphanumeric runs of `text`, in order.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn token_set(text: &str) -> BTreeSet<String> {
    tokens(text).into_iter().collect()
}

/// Canonical comparison key for titles: lowercase alphanumeric tokens joined by
/// single spaces, so `"Graph-Pruning"` and `"graph pruning"` compare equal.
pub fn normalize_title(title: &str) -> String {
    tokens(title).join(" ")
}

/// Lowercase and collapse internal whitespace; punctuation is kept.
pub fn normalize_term(term: &str) -> String {
    term.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Whitespace-delimited words with leading/trailing punctuation removed.
/// Internal punctuation (hyphens, dots) survives: `"(topic-A1),"` -> `"topic-A1"`.
pub fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
}

const STOPWORDS: &[&str] = &[
    "a", "about", "an", "and", "are", "as", "at", "be", "by", "for", "from", "has", "have", "in",
    "into", "is", "it", "its", "of", "on", "or", "our", "that", "the", "their", "these", "this",
    "to", "towards", "using", "via", "was", "we", "were", "which", "with",
];

pub fn is_stopword(word: &str) -> bool {
    let lower = word.to_lowercase();
    STOPWORDS.binary_search(&lower.as_str()).is_ok()
}

/// Last whitespace-delimited word; the head of an English compound heading.
pub fn head_word(title: &str) -> &str {
    title.split_whitespace().last().unwrap_or("")
}

pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}

/// Truncate to at most `max_chars` characters on a char boundary.
pub fn truncate_chars(text: &str, max_chars: usize) -> &str {
    match text.char_indices().nth(max_chars) {
        Some((idx, _)) => &text[..idx],
        None => text,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stopwords_are_sorted() {
        let mut sorted = STOPWORDS.to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, STOPWORDS);
    }

    #[test]
    fn normalization_ignores_case_and_punctuation() {
        assert_eq!(normalize_title("Graph-Pruning"), "graph pruning");
        assert_eq!(normalize_title("  graph   pruning "), "graph pruning");
        assert_eq!(normalize_term("Graph   Pruning"), "graph pruning");
        assert_eq!(normalize_term("graph-pruning"), "graph-pruning");
    }

    #[test]
    fn words_trim_edges_only() {
        let w: Vec<_> = words("(topic-A1), and x.").collect();
        assert_eq!(w, ["topic-A1", "and", "x"]);
    }

    #[test]
    fn truncation_respects_char_boundaries() {
        assert_eq!(truncate_chars("héllo", 2), "hé");
        assert_eq!(truncate_chars("ab", 10), "ab");
    }
}
