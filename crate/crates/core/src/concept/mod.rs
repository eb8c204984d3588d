//! The semantic path: concepts extracted per paper, pooled, merged by
//! term-embedding similarity, filtered by support, and arranged into a
//! preliminary concept tree.

mod tree;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embedding::{cosine, embed_text, EmbedError, Embedder};
use crate::fsutil;
use crate::llm::{Gateway, LlmError, LlmRequest, LlmResult, Payload};
use crate::parallel::map_bounded;
use crate::text::normalize_term;

pub use tree::{induce_concept_tree, ConceptTree, MAX_INDUCE_BATCH};

/// Largest tolerated share of papers whose extraction failed.
pub const MAX_EXTRACTION_FAILURE: f64 = 0.2;

#[derive(Debug, thiserror::Error)]
pub enum ConceptError {
    #[error("concept extraction needs a non-empty corpus")]
    EmptyCorpus,
    #[error("concept extraction failed for {failed} of {total} papers")]
    TooManyFailures { failed: usize, total: usize },
    #[error("no concepts to organize")]
    NoConcepts,
    #[error("invalid concept parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("cannot write concept dump: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub surface: String,
    /// Other spellings pooled into this concept; never contains `surface`.
    pub aliases: BTreeSet<String>,
    pub paper_ids: BTreeSet<String>,
}

impl Concept {
    pub fn new<I, S>(surface: impl Into<String>, papers: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            surface: surface.into(),
            aliases: BTreeSet::new(),
            paper_ids: papers.into_iter().map(Into::into).collect(),
        }
    }

    pub fn freq(&self) -> usize {
        self.paper_ids.len()
    }
}

/// One `ExtractConcepts` call per paper, pooled by normalized term. The
/// surface of a pooled term is its most frequent spelling (lexicographically
/// smallest on ties).
pub fn extract_concepts(
    corpus: &Corpus,
    gateway: &Gateway,
    parallelism: usize,
) -> Result<Vec<Concept>, ConceptError> {
    if corpus.is_empty() {
        return Err(ConceptError::EmptyCorpus);
    }
    let replies = map_bounded(corpus.papers(), parallelism, |paper| {
        let req = LlmRequest::new(
            Payload::ExtractConcepts {
                paper_id: paper.id.clone(),
                title: paper.title.clone(),
                abstract_text: paper.abstract_text.clone(),
            },
            paper.lang.clone(),
        );
        match gateway.complete(&req) {
            Ok(r) => match r.result {
                LlmResult::Concepts(terms) => Some(terms),
                _ => None,
            },
            Err(e) => {
                log::warn!("concept extraction failed for {}: {e}", paper.id);
                None
            }
        }
    });
    let failed = replies.iter().filter(|r| r.is_none()).count();
    if failed as f64 > MAX_EXTRACTION_FAILURE * corpus.len() as f64 {
        return Err(ConceptError::TooManyFailures {
            failed,
            total: corpus.len(),
        });
    }
    // normalized term -> (spelling -> mentions, papers)
    let mut pool: BTreeMap<String, (BTreeMap<String, usize>, BTreeSet<String>)> = BTreeMap::new();
    for (paper, terms) in corpus.papers().iter().zip(replies) {
        for term in terms.into_iter().flatten() {
            let key = normalize_term(&term);
            if key.is_empty() {
                continue;
            }
            let entry = pool.entry(key).or_default();
            *entry
                .0
                .entry(term.split_whitespace().collect::<Vec<_>>().join(" "))
                .or_default() += 1;
            entry.1.insert(paper.id.clone());
        }
    }
    Ok(pool
        .into_values()
        .map(|(spellings, papers)| {
            let surface = spellings
                .iter()
                .fold(None::<(&String, usize)>, |best, (s, &n)| match best {
                    Some((_, b)) if b >= n => best,
                    _ => Some((s, n)),
                })
                .map(|(s, _)| s.clone())
                .expect("pooled term has a spelling");
            let aliases = spellings.into_keys().filter(|s| *s != surface).collect();
            Concept {
                surface,
                aliases,
                paper_ids: papers,
            }
        })
        .collect())
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Merge concepts whose term embeddings reach `merge_sim` (over connected
/// components of the similarity graph), then drop those supported by fewer
/// than `min_freq` papers. Output is ordered by normalized surface.
pub fn merge_and_filter(
    raw: &[Concept],
    embedder: &dyn Embedder,
    min_freq: usize,
    merge_sim: f64,
) -> Result<Vec<Concept>, ConceptError> {
    if min_freq < 1 {
        return Err(ConceptError::InvalidParams("min_freq must be >= 1".into()));
    }
    if !(merge_sim > 0.0 && merge_sim <= 1.0) {
        return Err(ConceptError::InvalidParams(format!(
            "merge_sim {merge_sim} outside (0, 1]"
        )));
    }
    let vectors = raw
        .iter()
        .map(|c| embed_text::<f64>(embedder, &c.surface))
        .collect::<Result<Vec<_>, _>>()?;
    let mut uf = UnionFind((0..raw.len()).collect());
    for i in 0..raw.len() {
        for j in (i + 1)..raw.len() {
            // identical normalized terms always merge, even when they embed to zero
            let same = normalize_term(&raw[i].surface) == normalize_term(&raw[j].surface);
            if same || cosine(&vectors[i], &vectors[j])? >= merge_sim {
                uf.union(i, j);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<&Concept>> = BTreeMap::new();
    for (i, c) in raw.iter().enumerate() {
        groups.entry(uf.find(i)).or_default().push(c);
    }
    let mut out: Vec<Concept> = groups
        .into_values()
        .map(|members| {
            let winner = members
                .iter()
                .min_by(|a, b| {
                    b.freq()
                        .cmp(&a.freq())
                        .then(a.surface.chars().count().cmp(&b.surface.chars().count()))
                        .then(a.surface.cmp(&b.surface))
                })
                .expect("non-empty component");
            let surface = winner.surface.clone();
            let mut merged = Concept::new(surface.clone(), Vec::<String>::new());
            for m in &members {
                merged.paper_ids.extend(m.paper_ids.iter().cloned());
                merged.aliases.extend(m.aliases.iter().cloned());
                merged.aliases.insert(m.surface.clone());
            }
            merged.aliases.remove(&surface);
            merged
        })
        .filter(|c| c.freq() >= min_freq)
        .collect();
    out.sort_by(|a, b| {
        normalize_term(&a.surface)
            .cmp(&normalize_term(&b.surface))
            .then(a.surface.cmp(&b.surface))
    });
    Ok(out)
}

#[derive(Serialize)]
struct ConceptLine<'a> {
    surface: &'a str,
    freq: usize,
    paper_ids: &'a BTreeSet<String>,
    aliases: &'a BTreeSet<String>,
}

/// Line-delimited `{surface, freq, paper_ids, aliases}` records.
pub fn concepts_to_jsonl(concepts: &[Concept]) -> String {
    let mut out = String::new();
    for c in concepts {
        let line = ConceptLine {
            surface: &c.surface,
            freq: c.freq(),
            paper_ids: &c.paper_ids,
            aliases: &c.aliases,
        };
        out.push_str(&serde_json::to_string(&line).expect("concept serializes"));
        out.push('\n');
    }
    out
}

pub fn write_concepts(path: &Path, concepts: &[Concept]) -> Result<(), ConceptError> {
    fsutil::write_atomic(path, concepts_to_jsonl(concepts).as_bytes())?;
    Ok(())
}
