use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};

use super::{paper_titles, ConceptSupport, FusionContext, FusionError};
use crate::cluster::{recluster_subtree, ClusterNode, ClusterParams};
use crate::concept::{Concept, ConceptTree};
use crate::corpus::Corpus;
use crate::embedding::EmbeddingSet;
use crate::llm::{Candidate, LlmRequest, LlmResult, Payload};
use crate::scalar::Scalar;
use crate::taxonomy::{AlignFlag, TaxonomyNode};
use crate::text::{is_stopword, normalize_title, words};

/// Candidates sent with a labeling request.
const MAX_CANDIDATES: usize = 10;

pub struct Round2Output<T> {
    pub taxonomy: TaxonomyNode,
    /// Cluster tree after any re-clustering; the taxonomy mirrors it node for node.
    pub tree: ClusterNode<T>,
    /// Ids of the nodes whose subtrees were rebuilt.
    pub reclustered: Vec<String>,
}

struct Ranked<'c> {
    concept: &'c Concept,
    count: usize,
}

struct Labeler<'a, 'c, T> {
    ctx: &'a FusionContext<'a, T>,
    valid: &'c [Concept],
    support: &'a ConceptSupport,
    concept_tree: Option<&'a ConceptTree>,
    reduced: &'a EmbeddingSet<T>,
    params: &'a ClusterParams,
    reclustered: Vec<String>,
}

/// Title every cluster with its best-supported validated concept, top-down.
///
/// Candidates for a node are the validated concepts with at least one paper in
/// it, minus titles already used by an ancestor or an earlier sibling. They are
/// ranked by in-node count, then by being a concept-tree ancestor of another
/// candidate, then by concentration, then lexicographically; a LabelCluster
/// request confirms or rephrases the top of that list. When some child of a
/// node has no candidate, the node's subtree is re-clustered once; children
/// still without candidates are titled from their paper titles and marked
/// forced. The root takes the concept tree's root label when there is one.
pub fn round2_label<T: Scalar>(
    ctx: &FusionContext<'_, T>,
    tree: &ClusterNode<T>,
    valid: &[Concept],
    support: &ConceptSupport,
    concept_tree: Option<&ConceptTree>,
    reduced: &EmbeddingSet<T>,
    params: &ClusterParams,
) -> Result<Round2Output<T>, FusionError> {
    let mut labeler = Labeler {
        ctx,
        valid,
        support,
        concept_tree,
        reduced,
        params,
        reclustered: Vec::new(),
    };
    let mut tree = tree.clone();
    let root_label = concept_tree
        .and_then(|t| t.root.as_deref())
        .map(str::trim)
        .filter(|r| !r.is_empty());
    let (title, flag) = match root_label {
        Some(r) => (r.to_string(), AlignFlag::Ok),
        None => labeler.label(&tree, &BTreeSet::new()),
    };
    let taxonomy = labeler.build(&mut tree, title, flag, &mut Vec::new())?;
    Ok(Round2Output {
        taxonomy,
        tree,
        reclustered: labeler.reclustered,
    })
}

impl<'c, T: Scalar> Labeler<'_, 'c, T> {
    fn build(
        &mut self,
        cnode: &mut ClusterNode<T>,
        title: String,
        flag: AlignFlag,
        ancestors: &mut Vec<String>,
    ) -> Result<TaxonomyNode, FusionError> {
        let mut node = TaxonomyNode::new(cnode.id.clone(), title.clone());
        node.align_flag = flag;
        if cnode.is_leaf() {
            node.papers = cnode.paper_ids.clone();
            return Ok(node);
        }
        ancestors.push(normalize_title(&title));
        let above = ancestors_set(ancestors);
        let unsupported = cnode
            .children
            .iter()
            .any(|c| self.candidates(&c.paper_ids, &above).is_empty());
        if unsupported && cnode.paper_ids.len() >= self.params.min_split_size {
            let rebuilt = recluster_subtree(cnode, self.reduced, self.params)?;
            if rebuilt != *cnode {
                log::info!("re-clustered node {} after an unsupported child", cnode.id);
                self.reclustered.push(cnode.id.clone());
                *cnode = rebuilt;
            }
        }
        let mut taken = ancestors_set(ancestors);
        let mut labels = Vec::with_capacity(cnode.children.len());
        for child in &cnode.children {
            let (t, f) = self.label(child, &taken);
            taken.insert(normalize_title(&t));
            labels.push((t, f));
        }
        for (child, (t, f)) in cnode.children.iter_mut().zip(labels) {
            node.children.push(self.build(child, t, f, ancestors)?);
        }
        ancestors.pop();
        Ok(node)
    }

    fn candidates(&self, papers: &BTreeSet<String>, taken: &BTreeSet<String>) -> Vec<Ranked<'c>> {
        let mut out: Vec<Ranked<'c>> = self
            .valid
            .iter()
            .filter(|c| {
                !taken.contains(&normalize_title(&c.surface))
                    && !normalize_title(&c.surface).is_empty()
            })
            .map(|c| Ranked {
                concept: c,
                count: c.paper_ids.iter().filter(|p| papers.contains(*p)).count(),
            })
            .filter(|r| r.count > 0)
            .collect();
        let general: BTreeSet<&str> = match self.concept_tree {
            Some(ct) => out
                .iter()
                .filter(|a| {
                    out.iter()
                        .any(|b| ct.is_ancestor(&a.concept.surface, &b.concept.surface))
                })
                .map(|a| a.concept.surface.as_str())
                .collect(),
            None => BTreeSet::new(),
        };
        let conc = |c: &Concept| {
            self.support
                .get(&c.surface)
                .map_or(0.0, |s| s.concentration)
        };
        out.sort_by(|a, b| {
            Reverse(a.count)
                .cmp(&Reverse(b.count))
                .then_with(|| {
                    let ga = general.contains(a.concept.surface.as_str());
                    let gb = general.contains(b.concept.surface.as_str());
                    gb.cmp(&ga)
                })
                .then_with(|| conc(b.concept).total_cmp(&conc(a.concept)))
                .then_with(|| a.concept.surface.cmp(&b.concept.surface))
        });
        out
    }

    fn label(&self, node: &ClusterNode<T>, taken: &BTreeSet<String>) -> (String, AlignFlag) {
        let ranked = self.candidates(&node.paper_ids, taken);
        let titles = paper_titles(self.ctx.corpus, &node.paper_ids);
        let candidates: Vec<Candidate> = ranked
            .iter()
            .take(MAX_CANDIDATES)
            .map(|r| Candidate {
                term: r.concept.surface.clone(),
                count: r.count,
            })
            .collect();
        let fallback = match ranked.first() {
            Some(r) => r.concept.surface.clone(),
            None => frequent_title_word(self.ctx.corpus, &node.paper_ids, taken)
                .unwrap_or_else(|| format!("cluster-{}", node.id)),
        };
        let flag = if ranked.is_empty() {
            AlignFlag::Forced
        } else {
            AlignFlag::Ok
        };
        let req = LlmRequest::new(
            Payload::LabelCluster {
                candidates,
                paper_titles: titles,
                child_titles: Vec::new(),
            },
            self.ctx.lang,
        );
        let title = match self.ctx.gateway.complete(&req) {
            Ok(resp) => match resp.result {
                LlmResult::Title(t) if usable(&t, taken) => t.trim().to_string(),
                _ => fallback,
            },
            Err(e) => {
                log::warn!(
                    "labeling cluster {} fell back to the top candidate: {e}",
                    node.id
                );
                fallback
            }
        };
        (unique(title, taken), flag)
    }
}

fn ancestors_set(ancestors: &[String]) -> BTreeSet<String> {
    ancestors.iter().cloned().collect()
}

pub(crate) fn usable(title: &str, taken: &BTreeSet<String>) -> bool {
    let n = normalize_title(title);
    !n.is_empty() && !taken.contains(&n)
}

/// `title`, or `title 2`, `title 3`, ... when the plain form is taken.
fn unique(title: String, taken: &BTreeSet<String>) -> String {
    if usable(&title, taken) {
        return title;
    }
    (2..)
        .map(|k| format!("{title} {k}"))
        .find(|t| usable(t, taken))
        .expect("unbounded suffixes")
}

/// Lowercased non-stopword appearing in the most paper titles, lexicographic on ties.
fn frequent_title_word(
    corpus: &Corpus,
    papers: &BTreeSet<String>,
    taken: &BTreeSet<String>,
) -> Option<String> {
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for p in papers.iter().filter_map(|id| corpus.get(id)) {
        let seen: BTreeSet<String> = words(&p.title)
            .filter(|w| w.chars().any(char::is_alphabetic) && !is_stopword(w))
            .map(str::to_lowercase)
            .collect();
        for w in seen {
            *df.entry(w).or_default() += 1;
        }
    }
    df.into_iter()
        .filter(|(w, _)| usable(w, taken))
        .fold(None::<(String, usize)>, |best, (w, n)| match best {
            Some((_, b)) if b >= n => best,
            _ => Some((w, n)),
        })
        .map(|(w, _)| w)
}

/// Label-free baseline: each node takes the most common title word of its
/// papers that no ancestor or earlier sibling already uses.
pub fn label_by_title_frequency<T: Scalar>(tree: &ClusterNode<T>, corpus: &Corpus) -> TaxonomyNode {
    fn go<T: Scalar>(
        c: &ClusterNode<T>,
        title: String,
        corpus: &Corpus,
        ancestors: &mut BTreeSet<String>,
    ) -> TaxonomyNode {
        let mut node = TaxonomyNode::new(c.id.clone(), title.clone());
        if c.is_leaf() {
            node.papers = c.paper_ids.clone();
            return node;
        }
        let key = normalize_title(&title);
        let fresh = ancestors.insert(key.clone());
        let mut taken = ancestors.clone();
        let mut titles = Vec::new();
        for child in &c.children {
            let t = frequent_title_word(corpus, &child.paper_ids, &taken)
                .unwrap_or_else(|| unique(format!("cluster-{}", child.id), &taken));
            taken.insert(normalize_title(&t));
            titles.push(t);
        }
        for (child, t) in c.children.iter().zip(titles) {
            node.children.push(go(child, t, corpus, ancestors));
        }
        if fresh {
            ancestors.remove(&key);
        }
        node
    }
    let root_title = frequent_title_word(corpus, &tree.paper_ids, &BTreeSet::new())
        .unwrap_or_else(|| "root".into());
    go(tree, root_title, corpus, &mut BTreeSet::new())
}
