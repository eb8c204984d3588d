use std::collections::BTreeSet;

use super::label::usable;
use super::{paper_briefs, paper_titles, FusionContext, FusionError, TitleVectors};
use crate::embedding::cosine;
use crate::llm::{Candidate, LlmRequest, LlmResult, Payload};
use crate::scalar::Scalar;
use crate::taxonomy::{AlignFlag, TaxonomyNode};
use crate::text::normalize_title;

/// One bottom-up pass re-abstracting internal titles from their children,
/// then one top-down pass checking every non-root title against its papers.
///
/// A title passes when its cosine to the centroid of its subtree's paper
/// embeddings reaches `tau_align`. Otherwise an AlignTitle request (root
/// title, parent title, papers) either affirms it by returning it unchanged,
/// or proposes a replacement: kept as `regenerated` if it passes, `forced` if
/// not. Provider errors and replacements that would collide with a sibling or
/// ancestor leave the title as it was, marked `forced`. Structure and paper
/// assignment are untouched.
pub fn round3_align<T: Scalar>(
    ctx: &FusionContext<'_, T>,
    tax: &TaxonomyNode,
    tau_align: f64,
) -> Result<TaxonomyNode, FusionError> {
    let mut out = tax.clone();
    let mut aligner = Aligner {
        ctx,
        vectors: TitleVectors::new(ctx.embedder),
        tau_align,
    };
    aligner.bottom_up(&mut out, &BTreeSet::new());
    let root_title = out.title.clone();
    aligner.top_down(
        &mut out,
        &root_title,
        &mut vec![normalize_title(&root_title)],
    )?;
    Ok(out)
}

struct Aligner<'a, 'c, T> {
    ctx: &'c FusionContext<'c, T>,
    vectors: TitleVectors<'a, T>,
    tau_align: f64,
}

/// Normalized titles of `node`'s children other than the one at `skip`.
fn sibling_keys(node: &TaxonomyNode, skip: usize) -> BTreeSet<String> {
    node.children
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != skip)
        .map(|(_, c)| normalize_title(&c.title))
        .collect()
}

impl<T: Scalar> Aligner<'_, '_, T> {
    /// `taken` holds the normalized titles of the node's ancestors and siblings.
    fn bottom_up(&mut self, node: &mut TaxonomyNode, taken: &BTreeSet<String>) {
        if node.is_leaf() {
            return;
        }
        let own = normalize_title(&node.title);
        for i in 0..node.children.len() {
            let mut below = sibling_keys(node, i);
            below.extend(taken.iter().cloned());
            below.insert(own.clone());
            self.bottom_up(&mut node.children[i], &below);
        }
        let child_titles: Vec<String> = node.children.iter().map(|c| c.title.clone()).collect();
        let papers = node.subtree_papers();
        let req = LlmRequest::new(
            Payload::LabelCluster {
                candidates: vec![Candidate {
                    term: node.title.clone(),
                    count: papers.len(),
                }],
                paper_titles: paper_titles(self.ctx.corpus, &papers),
                child_titles: child_titles.clone(),
            },
            self.ctx.lang,
        );
        let mut blocked = taken.clone();
        blocked.extend(child_titles.iter().map(|t| normalize_title(t)));
        match self.ctx.gateway.complete(&req) {
            Ok(resp) => {
                if let LlmResult::Title(t) = resp.result {
                    let t = t.trim();
                    if normalize_title(t) != own && usable(t, &blocked) {
                        log::debug!(
                            "node {} re-abstracted: {:?} -> {:?}",
                            node.id,
                            node.title,
                            t
                        );
                        node.title = t.to_string();
                    }
                }
            }
            Err(e) => log::warn!("re-abstracting node {} failed, title kept: {e}", node.id),
        }
    }

    /// Check the children of `node`, then descend. `ancestors` holds the
    /// normalized titles from the root down to `node`.
    fn top_down(
        &mut self,
        node: &mut TaxonomyNode,
        root_title: &str,
        ancestors: &mut Vec<String>,
    ) -> Result<(), FusionError> {
        for i in 0..node.children.len() {
            let mut taken = sibling_keys(node, i);
            taken.extend(ancestors.iter().cloned());
            let parent_title = node.title.clone();
            let child = &mut node.children[i];
            self.check(child, root_title, &parent_title, &taken)?;
            ancestors.push(normalize_title(&child.title));
            self.top_down(child, root_title, ancestors)?;
            ancestors.pop();
        }
        Ok(())
    }

    fn consistent(&mut self, title: &str, node: &TaxonomyNode) -> Result<bool, FusionError> {
        let papers = node.subtree_papers();
        let Some(centroid) = self.ctx.paper_embs.centroid(papers.iter()) else {
            return Ok(true);
        };
        let v = self.vectors.get(title)?;
        Ok(cosine(&v, &centroid)?.as_f64() >= self.tau_align)
    }

    fn check(
        &mut self,
        node: &mut TaxonomyNode,
        root_title: &str,
        parent_title: &str,
        taken: &BTreeSet<String>,
    ) -> Result<(), FusionError> {
        if self.consistent(&node.title.clone(), node)? {
            return Ok(());
        }
        let papers = node.subtree_papers();
        let req = LlmRequest::new(
            Payload::AlignTitle {
                root_title: root_title.to_string(),
                parent_title: parent_title.to_string(),
                title: node.title.clone(),
                papers: paper_briefs(self.ctx.corpus, &papers),
            },
            self.ctx.lang,
        );
        let proposal = match self.ctx.gateway.complete(&req) {
            Ok(resp) => match resp.result {
                LlmResult::Title(t) => t.trim().to_string(),
                _ => String::new(),
            },
            Err(e) => {
                log::warn!("aligning node {} failed, title kept: {e}", node.id);
                node.align_flag = AlignFlag::Forced;
                return Ok(());
            }
        };
        if normalize_title(&proposal) == normalize_title(&node.title) {
            // the model affirms the title
            return Ok(());
        }
        if !usable(&proposal, taken) {
            node.align_flag = AlignFlag::Forced;
            return Ok(());
        }
        log::info!(
            "node {} regenerated: {:?} -> {:?}",
            node.id,
            node.title,
            proposal
        );
        node.align_flag = if self.consistent(&proposal, node)? {
            AlignFlag::Regenerated
        } else {
            AlignFlag::Forced
        };
        node.title = proposal;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, Paper};
    use crate::embedding::{embed_corpus, EmbedOptions, EmbeddingSet, HashEmbedder};
    use crate::llm::{Gateway, MockProvider, RuleSet};
    use std::sync::Arc;

    struct Fixture {
        corpus: Corpus,
        embedder: HashEmbedder,
        embs: EmbeddingSet<f64>,
    }

    fn fixture() -> Fixture {
        let papers = vec![
            Paper::new(
                "p1",
                "Support vector machines",
                "support vector machines with kernels",
            ),
            Paper::new(
                "p2",
                "Kernel support vector machines",
                "support vector machines margin kernels",
            ),
            Paper::new("p3", "Decision trees", "decision trees split impurity"),
            Paper::new(
                "p4",
                "Pruned decision trees",
                "decision trees pruning impurity",
            ),
        ];
        let corpus = Corpus::new(papers, "test").unwrap();
        let embedder = HashEmbedder::new(256).unwrap();
        let embs = embed_corpus(&embedder, &corpus, &EmbedOptions::default()).unwrap();
        Fixture {
            corpus,
            embedder,
            embs,
        }
    }

    fn tree(first: &str) -> TaxonomyNode {
        TaxonomyNode::new("0", "classification").with_children(vec![
            TaxonomyNode::new("0.0", first).with_papers(["p1", "p2"]),
            TaxonomyNode::new("0.1", "decision trees").with_papers(["p3", "p4"]),
        ])
    }

    fn run(fx: &Fixture, mock: MockProvider, tax: &TaxonomyNode) -> TaxonomyNode {
        let gateway = Gateway::new(Arc::new(mock));
        let ctx = FusionContext {
            corpus: &fx.corpus,
            gateway: &gateway,
            embedder: &fx.embedder,
            paper_embs: &fx.embs,
            lang: "en",
        };
        round3_align(&ctx, tax, 0.35).unwrap()
    }

    #[test]
    fn grounded_titles_are_unchanged() {
        let fx = fixture();
        let t = tree("support vector machines");
        let out = run(&fx, MockProvider::default(), &t);
        assert_eq!(out, t);
    }

    #[test]
    fn drifting_title_is_regenerated_from_fixture() {
        let fx = fixture();
        let t = tree("Mathematical Concepts");
        let drift_req = LlmRequest::new(
            Payload::AlignTitle {
                root_title: "classification".into(),
                parent_title: "classification".into(),
                title: "Mathematical Concepts".into(),
                papers: paper_briefs(&fx.corpus, &["p1".to_string(), "p2".to_string()]),
            },
            "en",
        );
        let mock = MockProvider::new(None, RuleSet::default()).with_fixture(
            &drift_req,
            "<result>{\"title\": \"support vector machines\"}</result>",
        );
        let out = run(&fx, mock, &t);
        assert_eq!(out.children[0].title, "support vector machines");
        assert_eq!(out.children[0].align_flag, AlignFlag::Regenerated);
        assert!(out.same_structure(&t));
        assert_eq!(out.paper_locations(), t.paper_locations());
    }

    #[test]
    fn replacement_that_still_drifts_is_forced() {
        let fx = fixture();
        // no root overlap: the mock prefixes the parent's head word
        let out = run(&fx, MockProvider::default(), &tree("Mathematical Concepts"));
        assert_eq!(
            out.children[0].title,
            "classification Mathematical Concepts"
        );
        assert_eq!(out.children[0].align_flag, AlignFlag::Forced);
        assert_eq!(out.title, "classification");
    }

    #[test]
    fn root_is_never_checked() {
        let fx = fixture();
        let mut t = tree("support vector machines");
        t.title = "Mathematical Concepts".into();
        let out = run(&fx, MockProvider::default(), &t);
        assert_eq!(out.title, "Mathematical Concepts");
        assert_eq!(out.align_flag, AlignFlag::Ok);
    }
}
