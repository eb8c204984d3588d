//! Deterministic offline provider.
//!
//! A reply is looked up first among fixtures (keyed by [`LlmRequest::digest`],
//! one `<digest>.txt` file per reply), then produced by fixed rules that
//! depend only on the payload.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use serde_json::json;

use super::{result_text, Candidate, Edge, LlmRequest, Payload, Provider, ProviderError};
use crate::text::{head_word, is_stopword, normalize_term, token_set, tokens, words};

/// Knobs for the rule-based fallback.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleSet {
    /// Concepts returned per paper.
    pub max_concepts: usize,
}

impl Default for RuleSet {
    fn default() -> Self {
        Self { max_concepts: 10 }
    }
}

#[derive(Clone, Debug, Default)]
pub struct MockProvider {
    fixtures: Option<PathBuf>,
    inline: HashMap<String, String>,
    rules: RuleSet,
}

impl MockProvider {
    pub fn new(fixtures: Option<PathBuf>, rules: RuleSet) -> Self {
        Self {
            fixtures,
            inline: HashMap::new(),
            rules,
        }
    }

    /// In-memory fixture, consulted before the fixture directory.
    pub fn with_fixture(mut self, req: &LlmRequest, reply: impl Into<String>) -> Self {
        self.inline.insert(req.digest(), reply.into());
        self
    }

    fn fixture(&self, digest: &str) -> Option<String> {
        if let Some(hit) = self.inline.get(digest) {
            return Some(hit.clone());
        }
        let dir = self.fixtures.as_ref()?;
        std::fs::read_to_string(dir.join(format!("{digest}.txt"))).ok()
    }

    /// The rule-based reply for a payload, ignoring fixtures.
    pub fn rule_reply(&self, payload: &Payload) -> String {
        let value = match payload {
            Payload::ExtractConcepts {
                title,
                abstract_text,
                ..
            } => {
                let source = if abstract_text.trim().is_empty() {
                    title
                } else {
                    abstract_text
                };
                json!({ "concepts": salient_terms(source, self.rules.max_concepts) })
            }
            Payload::InduceHierarchy { concepts } => {
                let (root, edges) = prefix_hierarchy(concepts);
                json!({ "root": root, "edges": edges })
            }
            Payload::LabelCluster {
                candidates,
                paper_titles,
                ..
            } => {
                json!({ "title": pick_label(candidates, paper_titles) })
            }
            Payload::AlignTitle {
                root_title,
                parent_title,
                title,
                ..
            } => {
                let overlaps = !token_set(title).is_disjoint(&token_set(root_title));
                let out = if overlaps {
                    title.clone()
                } else {
                    format!("{} {title}", head_word(parent_title))
                };
                json!({ "title": out })
            }
            Payload::ExpandSiblings { .. } => json!({ "topics": [] }),
            Payload::ScoreConcept { title, .. } => {
                let score = (5 + tokens(title).len().min(5)).clamp(1, 10);
                json!({ "score": score })
            }
            Payload::VerifyRedundancy { first, second } => {
                json!({ "redundant": token_set(first) == token_set(second) })
            }
        };
        result_text(&value)
    }
}

impl Provider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, req: &LlmRequest, _prompt: &str) -> Result<String, ProviderError> {
        Ok(self
            .fixture(&req.digest())
            .unwrap_or_else(|| self.rule_reply(&req.payload)))
    }
}

/// Capitalized non-stopword words by frequency, then first occurrence.
fn salient_terms(text: &str, limit: usize) -> Vec<String> {
    let mut counts: Vec<(String, usize, usize)> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (pos, w) in words(text).enumerate() {
        if !w.chars().any(char::is_uppercase) || is_stopword(w) {
            continue;
        }
        match index.get(w) {
            Some(&i) => counts[i].1 += 1,
            None => {
                index.insert(w.to_string(), counts.len());
                counts.push((w.to_string(), 1, pos));
            }
        }
    }
    counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    counts.into_iter().take(limit).map(|(w, _, _)| w).collect()
}

fn char_class(c: char) -> u8 {
    if c.is_alphabetic() {
        0
    } else if c.is_numeric() {
        1
    } else {
        2
    }
}

/// Whether `prefix` ends at a segment boundary of `s`: a separator, or a
/// switch between letters and digits.
fn segment_prefix(prefix: &str, s: &str) -> bool {
    if prefix.is_empty() || prefix.len() >= s.len() || !s.starts_with(prefix) {
        return false;
    }
    let last = prefix.chars().next_back().expect("non-empty");
    let next = s[prefix.len()..].chars().next().expect("longer");
    char_class(last) == 2 || char_class(next) == 2 || char_class(last) != char_class(next)
}

/// Each concept hangs under the longest other concept that is a segment
/// prefix of it. The root label is the most common leading token; concepts
/// without a prefix parent get no edge and so sit under the root.
fn prefix_hierarchy(concepts: &[String]) -> (String, Vec<Edge>) {
    let norms: Vec<String> = concepts.iter().map(|c| normalize_term(c)).collect();
    let mut leads: BTreeMap<String, usize> = BTreeMap::new();
    for c in concepts {
        if let Some(t) = tokens(c).into_iter().next() {
            *leads.entry(t).or_default() += 1;
        }
    }
    let root = leads
        .iter()
        .fold(None::<(&String, usize)>, |best, (t, &n)| match best {
            Some((_, b)) if b >= n => best,
            _ => Some((t, n)),
        })
        .map(|(t, _)| t.clone())
        .unwrap_or_else(|| "root".to_string());
    let mut edges = Vec::new();
    for (i, c) in concepts.iter().enumerate() {
        let parent = (0..concepts.len())
            .filter(|&j| j != i && norms[j] != norms[i] && segment_prefix(&norms[j], &norms[i]))
            .fold(None::<usize>, |best, j| match best {
                Some(b) if norms[b].len() >= norms[j].len() => Some(b),
                _ => Some(j),
            });
        if let Some(j) = parent {
            edges.push(Edge {
                parent: concepts[j].clone(),
                child: c.clone(),
            });
        }
    }
    (root, edges)
}

/// Most supported candidate (first listed on ties); without candidates, the
/// most frequent non-stopword word of the paper titles.
fn pick_label(candidates: &[Candidate], paper_titles: &[String]) -> String {
    let best = candidates
        .iter()
        .fold(None::<&Candidate>, |best, c| match best {
            Some(b) if b.count >= c.count => Some(b),
            _ => Some(c),
        });
    if let Some(c) = best {
        return c.term.clone();
    }
    let joined = paper_titles.join("\n");
    let mut counts: Vec<(&str, usize)> = Vec::new();
    for w in words(&joined).filter(|w| !is_stopword(w)) {
        match counts.iter_mut().find(|(k, _)| *k == w) {
            Some(entry) => entry.1 += 1,
            None => counts.push((w, 1)),
        }
    }
    counts
        .iter()
        .fold(None::<(&str, usize)>, |best, &(w, n)| match best {
            Some((_, b)) if b >= n => best,
            _ => Some((w, n)),
        })
        .map_or_else(|| "untitled".to_string(), |(w, _)| w.to_string())
}
