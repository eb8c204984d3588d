//! Deep fusion of the cluster tree with the extracted concepts.
//!
//! 1. [`round1_validate`] keeps concepts whose papers concentrate in one leaf
//!    cluster.
//! 2. [`round2_label`] titles each cluster with its best-supported concept.
//! 3. [`round3_align`] makes one bottom-up and one top-down pass over titles,
//!    checking each against the root title, its parent and its papers.
//! 4. [`round4_expand`] asks for missing sibling topics and accepts those that
//!    win enough papers from the parent's pool.
//!
//! Rounds 2 to 4 never delete or re-parent nodes.

mod align;
mod expand;
mod label;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterError, ClusterNode};
use crate::concept::Concept;
use crate::corpus::Corpus;
use crate::embedding::EmbeddingSet;
use crate::embedding::{embed_text, EmbedError, Embedder, Embedding};
use crate::llm::{Gateway, PaperBrief, MAX_PROMPT_PAPERS};
use crate::scalar::Scalar;

pub use align::round3_align;
pub use expand::round4_expand;
pub use label::{label_by_title_frequency, round2_label, Round2Output};

#[derive(Debug, thiserror::Error)]
pub enum FusionError {
    #[error("invalid fusion parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionParams {
    pub tau_conc: f64,
    pub min_support: usize,
    pub tau_align: f64,
    pub min_claim: usize,
    pub tau_claim: f64,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            tau_conc: 0.5,
            min_support: 2,
            tau_align: 0.35,
            min_claim: 2,
            tau_claim: 0.02,
        }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<(), FusionError> {
        if !(self.tau_conc > 0.0 && self.tau_conc <= 1.0) {
            return Err(FusionError::InvalidParams(format!(
                "tau_conc {} outside (0, 1]",
                self.tau_conc
            )));
        }
        if self.min_support < 1 || self.min_claim < 1 {
            return Err(FusionError::InvalidParams(
                "min_support and min_claim must be >= 1".into(),
            ));
        }
        if !(-1.0..=1.0).contains(&self.tau_align) {
            return Err(FusionError::InvalidParams(format!(
                "tau_align {} outside [-1, 1]",
                self.tau_align
            )));
        }
        if !(0.0..=2.0).contains(&self.tau_claim) {
            return Err(FusionError::InvalidParams(format!(
                "tau_claim {} outside [0, 2]",
                self.tau_claim
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportEntry {
    /// Largest share of the concept's papers inside a single leaf cluster.
    pub concentration: f64,
    /// Leaf holding that share (smallest id on ties).
    pub dominant_cluster: String,
    pub freq: usize,
}

/// Inputs shared by the labeling rounds. `paper_embs` are the unreduced
/// paper embeddings, in the same space as `embedder`'s title vectors.
pub struct FusionContext<'a, T> {
    pub corpus: &'a Corpus,
    pub gateway: &'a Gateway,
    pub embedder: &'a dyn Embedder,
    pub paper_embs: &'a EmbeddingSet<T>,
    pub lang: &'a str,
}

/// Support table keyed by concept surface.
pub type ConceptSupport = BTreeMap<String, SupportEntry>;

/// Keep concepts with `freq >= min_support` and leaf concentration
/// `>= tau_conc`; the support table covers every input concept.
pub fn round1_validate<T: Scalar>(
    concepts: &[Concept],
    tree: &ClusterNode<T>,
    tau_conc: f64,
    min_support: usize,
) -> (Vec<Concept>, ConceptSupport) {
    let mut leaf_of: HashMap<&str, &str> = HashMap::new();
    for leaf in tree.leaves() {
        for p in &leaf.paper_ids {
            leaf_of.insert(p.as_str(), leaf.id.as_str());
        }
    }
    let mut support = ConceptSupport::new();
    let mut kept = Vec::new();
    for c in concepts {
        let mut per_leaf: BTreeMap<&str, usize> = BTreeMap::new();
        for p in &c.paper_ids {
            if let Some(leaf) = leaf_of.get(p.as_str()) {
                *per_leaf.entry(leaf).or_default() += 1;
            }
        }
        let (dominant, top) =
            per_leaf.iter().fold(
                ("", 0usize),
                |best, (leaf, &n)| if n > best.1 { (leaf, n) } else { best },
            );
        let freq = c.freq();
        let concentration = if freq == 0 {
            0.0
        } else {
            top as f64 / freq as f64
        };
        if freq >= min_support && concentration >= tau_conc {
            kept.push(c.clone());
        }
        support.insert(
            c.surface.clone(),
            SupportEntry {
                concentration,
                dominant_cluster: dominant.to_string(),
                freq,
            },
        );
    }
    (kept, support)
}

/// Title embeddings, computed once per distinct title.
pub struct TitleVectors<'a, T> {
    embedder: &'a dyn Embedder,
    cache: HashMap<String, Embedding<T>>,
}

impl<'a, T: Scalar> TitleVectors<'a, T> {
    pub fn new(embedder: &'a dyn Embedder) -> Self {
        Self {
            embedder,
            cache: HashMap::new(),
        }
    }

    pub fn get(&mut self, title: &str) -> Result<Embedding<T>, EmbedError> {
        if let Some(v) = self.cache.get(title) {
            return Ok(v.clone());
        }
        let v = embed_text::<T>(self.embedder, title)?;
        self.cache.insert(title.to_string(), v.clone());
        Ok(v)
    }
}

/// Up to [`MAX_PROMPT_PAPERS`] papers (in id order) with truncated abstracts.
pub(crate) fn paper_briefs<'a>(
    corpus: &Corpus,
    ids: impl IntoIterator<Item = &'a String>,
) -> Vec<PaperBrief> {
    ids.into_iter()
        .filter_map(|id| corpus.get(id))
        .take(MAX_PROMPT_PAPERS)
        .map(|p| PaperBrief::truncated(&p.title, &p.abstract_text))
        .collect()
}

pub(crate) fn paper_titles<'a>(
    corpus: &Corpus,
    ids: impl IntoIterator<Item = &'a String>,
) -> Vec<String> {
    ids.into_iter()
        .filter_map(|id| corpus.get(id))
        .take(MAX_PROMPT_PAPERS)
        .map(|p| p.title.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::Embedding;
    use std::collections::BTreeSet;

    fn leaf(id: &str, papers: &[&str]) -> ClusterNode<f64> {
        ClusterNode {
            id: id.into(),
            paper_ids: papers.iter().map(|s| s.to_string()).collect(),
            children: vec![],
            depth: 1,
            centroid: Embedding::zeros(2),
        }
    }

    fn four_leaves() -> ClusterNode<f64> {
        let kids = vec![
            leaf("0.0", &["p1", "p2", "p3"]),
            leaf("0.1", &["p4", "p5"]),
            leaf("0.2", &["p6", "p7"]),
            leaf("0.3", &["p8"]),
        ];
        let all: BTreeSet<String> = kids
            .iter()
            .flat_map(|k| k.paper_ids.iter().cloned())
            .collect();
        ClusterNode {
            id: "0".into(),
            paper_ids: all,
            children: kids,
            depth: 0,
            centroid: Embedding::zeros(2),
        }
    }

    #[test]
    fn concentrated_concept_is_kept() {
        let c = Concept::new("pruning", ["p1", "p2", "p3"]);
        let (kept, support) = round1_validate(&[c], &four_leaves(), 0.5, 2);
        assert_eq!(kept.len(), 1);
        assert_eq!(support["pruning"].concentration, 1.0);
        assert_eq!(support["pruning"].dominant_cluster, "0.0");
    }

    #[test]
    fn dispersed_concept_is_dropped() {
        let c = Concept::new("everything", ["p1", "p4", "p6", "p8"]);
        let (kept, support) = round1_validate(&[c], &four_leaves(), 0.5, 2);
        assert!(kept.is_empty());
        assert!((support["everything"].concentration - 0.25).abs() < 1e-12);
        assert_eq!(support["everything"].dominant_cluster, "0.0");
    }

    #[test]
    fn low_support_is_dropped_even_when_concentrated() {
        let c = Concept::new("rare", ["p8"]);
        let (kept, support) = round1_validate(&[c], &four_leaves(), 0.5, 2);
        assert!(kept.is_empty());
        assert_eq!(support["rare"].concentration, 1.0);
    }

    #[test]
    fn half_concentration_meets_the_default_threshold() {
        let c = Concept::new("split", ["p1", "p2", "p4", "p5"]);
        let (kept, _) = round1_validate(&[c], &four_leaves(), 0.5, 2);
        assert_eq!(kept.len(), 1);
    }

    #[test]
    fn params_are_range_checked() {
        assert!(FusionParams::default().validate().is_ok());
        assert!(FusionParams {
            tau_conc: 0.0,
            ..FusionParams::default()
        }
        .validate()
        .is_err());
        assert!(FusionParams {
            min_claim: 0,
            ..FusionParams::default()
        }
        .validate()
        .is_err());
    }
}
