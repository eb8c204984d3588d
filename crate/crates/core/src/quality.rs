//! Post-fusion refinement: score and prune weak nodes, merge redundant
//! siblings, then repair the structure so every taxonomy invariant holds.
//!
//! None of the passes ever drops a paper; removed nodes hand their papers and
//! children to their parent.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embedding::{cosine, EmbedError, Embedder};
use crate::fusion::TitleVectors;
use crate::llm::{Gateway, LlmRequest, LlmResult, Payload, MAX_PROMPT_PAPERS};
use crate::parallel::map_bounded;
use crate::taxonomy::{duplicate_sibling_title, Provenance, TaxonomyNode};
use crate::text::{normalize_title, tokens};

#[derive(Debug, thiserror::Error)]
pub enum QualityError {
    #[error("invalid quality parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualityParams {
    pub score_threshold: u8,
    pub tau_red: f64,
    pub depth_max: usize,
    pub branch_max: usize,
}

impl Default for QualityParams {
    fn default() -> Self {
        Self {
            score_threshold: 5,
            tau_red: 0.90,
            depth_max: 4,
            branch_max: 8,
        }
    }
}

impl QualityParams {
    pub fn validate(&self) -> Result<(), QualityError> {
        if !(1..=10).contains(&self.score_threshold) {
            return Err(QualityError::InvalidParams(format!(
                "score_threshold {} outside [1, 10]",
                self.score_threshold
            )));
        }
        if !(self.tau_red > 0.0 && self.tau_red <= 1.0) {
            return Err(QualityError::InvalidParams(format!(
                "tau_red {} outside (0, 1]",
                self.tau_red
            )));
        }
        if self.depth_max < 1 || self.branch_max < 2 {
            return Err(QualityError::InvalidParams(
                "depth_max must be >= 1 and branch_max >= 2".into(),
            ));
        }
        Ok(())
    }
}

/// One pipeline stage as recorded in the build provenance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTrace {
    pub stage: String,
    pub input_digest: String,
    pub output_digest: String,
    pub duration_ms: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildProvenance {
    pub config_digest: String,
    pub provider: String,
    pub seed: u64,
    pub stages: Vec<StageTrace>,
}

/// Final taxonomy with the record of how it was built.
#[derive(Clone, Debug, PartialEq)]
pub struct Taxonomy {
    pub root: TaxonomyNode,
    pub provenance: BuildProvenance,
}

impl Taxonomy {
    /// Invariant violations under `params`, empty when the tree is valid.
    pub fn violations(&self, params: &QualityParams) -> Vec<String> {
        structure_violations(&self.root, params)
    }
}

/// Single-child internal nodes, depth and branching overflows, and duplicate
/// sibling titles, described one per entry.
pub fn structure_violations(root: &TaxonomyNode, params: &QualityParams) -> Vec<String> {
    let mut out = Vec::new();
    root.visit(&mut |n, depth| {
        if n.children.len() == 1 {
            out.push(format!("node {} has a single child", n.id));
        }
        if depth > params.depth_max {
            out.push(format!(
                "node {} at depth {depth} exceeds {}",
                n.id, params.depth_max
            ));
        }
        if n.children.len() > params.branch_max {
            out.push(format!(
                "node {} has {} children, max {}",
                n.id,
                n.children.len(),
                params.branch_max
            ));
        }
    });
    if let Some((parent, title)) = duplicate_sibling_title(root) {
        out.push(format!("duplicate sibling title {title:?} under {parent}"));
    }
    out
}

/// Score every non-root node with a ScoreConcept request and hoist those below
/// `threshold` into their parent. A failed request records `threshold` with
/// `score_defaulted` set, so the node survives.
pub fn score_and_prune(
    tax: &TaxonomyNode,
    corpus: &Corpus,
    gateway: &Gateway,
    threshold: u8,
    lang: &str,
    parallelism: usize,
) -> TaxonomyNode {
    let mut requests = Vec::new();
    tax.visit(&mut |n, depth| {
        if depth == 0 {
            return;
        }
        let papers = n.subtree_papers();
        let sample_titles = papers
            .iter()
            .filter_map(|id| corpus.get(id))
            .take(MAX_PROMPT_PAPERS)
            .map(|p| p.title.clone())
            .collect();
        let req = LlmRequest::new(
            Payload::ScoreConcept {
                title: n.title.clone(),
                paper_count: papers.len(),
                sample_titles,
            },
            lang,
        );
        requests.push((n.id.clone(), req));
    });
    let replies = map_bounded(&requests, parallelism, |(id, req)| {
        match gateway.complete(req) {
            Ok(resp) => match resp.result {
                LlmResult::Score(s) => (s, false),
                _ => (threshold, true),
            },
            Err(e) => {
                log::warn!("scoring node {id} failed, using the threshold: {e}");
                (threshold, true)
            }
        }
    });
    let scores: BTreeMap<&str, (u8, bool)> = requests
        .iter()
        .map(|(id, _)| id.as_str())
        .zip(replies)
        .collect();

    fn go(node: &mut TaxonomyNode, scores: &BTreeMap<&str, (u8, bool)>, threshold: u8) {
        let children = std::mem::take(&mut node.children);
        for mut child in children {
            go(&mut child, scores, threshold);
            let (score, defaulted) = scores
                .get(child.id.as_str())
                .copied()
                .unwrap_or((threshold, true));
            if score < threshold {
                log::info!("pruned {:?} (score {score})", child.title);
                node.papers.extend(std::mem::take(&mut child.papers));
                node.children.append(&mut child.children);
            } else {
                child.score = Some(f64::from(score));
                child.score_defaulted = defaulted;
                node.children.push(child);
            }
        }
    }
    let mut out = tax.clone();
    go(&mut out, &scores, threshold);
    out
}

/// Fold `other` into `keep`: papers and children are pooled.
fn absorb(keep: &mut TaxonomyNode, mut other: TaxonomyNode) {
    keep.papers.append(&mut other.papers);
    keep.children.append(&mut other.children);
}

/// Survivor of a redundant pair: more title tokens, then higher score, then
/// the lexicographically smaller title. Returns true when `a` survives.
fn first_survives(a: &TaxonomyNode, b: &TaxonomyNode) -> bool {
    let (ta, tb) = (tokens(&a.title).len(), tokens(&b.title).len());
    if ta != tb {
        return ta > tb;
    }
    let (sa, sb) = (a.score.unwrap_or(0.0), b.score.unwrap_or(0.0));
    if sa != sb {
        return sa > sb;
    }
    a.title <= b.title
}

/// Merge sibling pairs whose titles have cosine `>= tau_red` and that a
/// VerifyRedundancy request confirms. Rejected or failed pairs are not asked
/// again. Cross-parent duplicates are left alone.
pub fn merge_redundant(
    tax: &TaxonomyNode,
    embedder: &dyn Embedder,
    gateway: &Gateway,
    tau_red: f64,
    lang: &str,
) -> Result<TaxonomyNode, QualityError> {
    let mut vectors = TitleVectors::<f64>::new(embedder);
    let mut rejected: BTreeSet<(String, String)> = BTreeSet::new();
    let mut out = tax.clone();
    merge_at(
        &mut out,
        &mut vectors,
        gateway,
        tau_red,
        lang,
        &mut rejected,
    )?;
    Ok(out)
}

fn merge_at(
    node: &mut TaxonomyNode,
    vectors: &mut TitleVectors<'_, f64>,
    gateway: &Gateway,
    tau_red: f64,
    lang: &str,
    rejected: &mut BTreeSet<(String, String)>,
) -> Result<(), QualityError> {
    'scan: loop {
        let n = node.children.len();
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (&node.children[i], &node.children[j]);
                let key = (normalize_title(&a.title), normalize_title(&b.title));
                if rejected.contains(&key) {
                    continue;
                }
                let sim = cosine(&vectors.get(&a.title)?, &vectors.get(&b.title)?)?;
                if sim < tau_red {
                    continue;
                }
                let req = LlmRequest::new(
                    Payload::VerifyRedundancy {
                        first: a.title.clone(),
                        second: b.title.clone(),
                    },
                    lang,
                );
                let confirmed = match gateway.complete(&req) {
                    Ok(r) => r.result == LlmResult::Redundant(true),
                    Err(e) => {
                        log::warn!("redundancy check {:?} / {:?} failed: {e}", a.title, b.title);
                        false
                    }
                };
                if !confirmed {
                    rejected.insert(key);
                    continue;
                }
                let second = node.children.remove(j);
                let first = node.children.remove(i);
                let (mut keep, other) = if first_survives(&first, &second) {
                    (first, second)
                } else {
                    (second, first)
                };
                log::info!("merged {:?} into {:?}", other.title, keep.title);
                absorb(&mut keep, other);
                node.children.insert(i, keep);
                continue 'scan;
            }
        }
        break;
    }
    for c in &mut node.children {
        merge_at(c, vectors, gateway, tau_red, lang, rejected)?;
    }
    Ok(())
}

/// Repair pass run to a fixpoint: merge siblings with equal normalized titles,
/// drop empty leaves, collapse single-child nodes into their parent (keeping
/// the parent's title), flatten everything below `depth_max` into its
/// ancestor at that depth, and keep only the `branch_max` best-scored children
/// of a node, hoisting the papers of the rest.
pub fn check_structure(tax: &TaxonomyNode, params: &QualityParams) -> TaxonomyNode {
    let mut out = tax.clone();
    let fallback = f64::from(params.score_threshold);
    loop {
        let before = out.clone();
        repair(&mut out, 0, params, fallback);
        if out == before {
            return out;
        }
    }
}

fn repair(node: &mut TaxonomyNode, depth: usize, params: &QualityParams, fallback: f64) {
    if depth >= params.depth_max && !node.children.is_empty() {
        for c in std::mem::take(&mut node.children) {
            node.papers.extend(c.subtree_papers());
        }
        return;
    }
    // equal titles
    let mut merged: Vec<TaxonomyNode> = Vec::new();
    for c in std::mem::take(&mut node.children) {
        let key = normalize_title(&c.title);
        match merged.iter_mut().find(|m| normalize_title(&m.title) == key) {
            Some(m) => absorb(m, c),
            None => merged.push(c),
        }
    }
    // empty leaves carry nothing
    merged.retain(|c| !(c.is_leaf() && c.papers.is_empty()));
    node.children = merged;
    if node.children.len() == 1 {
        let only = node.children.pop().expect("one child");
        absorb(node, only);
        node.provenance = Provenance::Collapsed;
    }
    if node.children.len() > params.branch_max {
        let mut order: Vec<usize> = (0..node.children.len()).collect();
        let score = |c: &TaxonomyNode| c.score.unwrap_or(fallback);
        order.sort_by(|&a, &b| score(&node.children[b]).total_cmp(&score(&node.children[a])));
        let keep: BTreeSet<usize> = order.into_iter().take(params.branch_max).collect();
        for (i, c) in std::mem::take(&mut node.children).into_iter().enumerate() {
            if keep.contains(&i) {
                node.children.push(c);
            } else {
                node.papers.extend(c.subtree_papers());
            }
        }
    }
    for c in &mut node.children {
        repair(c, depth + 1, params, fallback);
    }
}
