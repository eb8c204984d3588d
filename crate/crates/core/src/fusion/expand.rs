use std::collections::BTreeSet;

use super::label::usable;
use super::{paper_titles, FusionContext, FusionError, TitleVectors};
use crate::embedding::cosine;
use crate::llm::{LlmRequest, LlmResult, Payload};
use crate::scalar::Scalar;
use crate::taxonomy::{Provenance, TaxonomyNode};
use crate::text::normalize_title;

/// Ask each internal node for missing child topics and add those that win
/// papers from the node's subtree.
///
/// A paper is claimed by a proposed topic when its cosine to the topic title
/// beats its cosine to every current child title by at least `tau_claim`.
/// Topics claiming fewer than `min_claim` papers, duplicating a child, parent
/// or ancestor title, or taking the last paper of an existing node are
/// discarded. Accepted topics become new leaves holding the claimed papers,
/// which are removed from wherever they sat before. Provider errors skip the
/// node.
pub fn round4_expand<T: Scalar>(
    ctx: &FusionContext<'_, T>,
    tax: &TaxonomyNode,
    min_claim: usize,
    tau_claim: f64,
) -> Result<TaxonomyNode, FusionError> {
    let mut out = tax.clone();
    let mut expander = Expander {
        ctx,
        vectors: TitleVectors::new(ctx.embedder),
        min_claim: min_claim.max(1),
        tau_claim,
    };
    expander.visit(&mut out, &mut Vec::new())?;
    Ok(out)
}

struct Expander<'a, 'c, T> {
    ctx: &'c FusionContext<'c, T>,
    vectors: TitleVectors<'a, T>,
    min_claim: usize,
    tau_claim: f64,
}

impl<T: Scalar> Expander<'_, '_, T> {
    fn visit(
        &mut self,
        node: &mut TaxonomyNode,
        ancestors: &mut Vec<String>,
    ) -> Result<(), FusionError> {
        if node.is_leaf() {
            return Ok(());
        }
        let original = node.children.len();
        self.expand(node, ancestors)?;
        ancestors.push(normalize_title(&node.title));
        // added children are leaves; only the original ones can expand further
        for child in node.children.iter_mut().take(original) {
            self.visit(child, ancestors)?;
        }
        ancestors.pop();
        Ok(())
    }

    fn expand(&mut self, node: &mut TaxonomyNode, ancestors: &[String]) -> Result<(), FusionError> {
        let pool = node.subtree_papers();
        let req = LlmRequest::new(
            Payload::ExpandSiblings {
                parent_title: node.title.clone(),
                siblings: node.children.iter().map(|c| c.title.clone()).collect(),
                paper_titles: paper_titles(self.ctx.corpus, &pool),
            },
            self.ctx.lang,
        );
        let topics = match self.ctx.gateway.complete(&req) {
            Ok(resp) => match resp.result {
                LlmResult::Topics(t) => t,
                _ => Vec::new(),
            },
            Err(e) => {
                log::warn!("sibling expansion under {} skipped: {e}", node.id);
                return Ok(());
            }
        };
        for topic in topics {
            let topic = topic.trim().to_string();
            let mut taken: BTreeSet<String> = node
                .children
                .iter()
                .map(|c| normalize_title(&c.title))
                .collect();
            taken.insert(normalize_title(&node.title));
            taken.extend(ancestors.iter().cloned());
            if !usable(&topic, &taken) {
                log::debug!(
                    "proposed topic {topic:?} under {} duplicates a title",
                    node.id
                );
                continue;
            }
            let claimed = self.claims(node, &pool, &topic)?;
            if claimed.len() < self.min_claim {
                log::debug!(
                    "proposed topic {topic:?} under {} claimed {} papers",
                    node.id,
                    claimed.len()
                );
                continue;
            }
            let mut trial = node.clone();
            for child in &mut trial.children {
                remove_papers(child, &claimed);
            }
            if has_empty_subtree(&trial.children) {
                log::debug!(
                    "proposed topic {topic:?} under {} would empty a node",
                    node.id
                );
                continue;
            }
            log::info!(
                "added topic {topic:?} under {} with {} papers",
                node.id,
                claimed.len()
            );
            let mut added =
                TaxonomyNode::new(format!("{}.{}", node.id, trial.children.len()), topic);
            added.provenance = Provenance::Expanded;
            added.papers = claimed;
            trial.children.push(added);
            *node = trial;
        }
        Ok(())
    }

    /// Papers of `pool` whose cosine to `topic` beats every child title by
    /// `tau_claim`.
    fn claims(
        &mut self,
        node: &TaxonomyNode,
        pool: &BTreeSet<String>,
        topic: &str,
    ) -> Result<BTreeSet<String>, FusionError> {
        let t = self.vectors.get(topic)?;
        let siblings = node
            .children
            .iter()
            .map(|c| self.vectors.get(&c.title))
            .collect::<Result<Vec<_>, _>>()?;
        let mut out = BTreeSet::new();
        for id in pool {
            let Some(e) = self.ctx.paper_embs.get(id) else {
                continue;
            };
            let own = cosine(&t, e)?.as_f64();
            let mut best = f64::NEG_INFINITY;
            for s in &siblings {
                best = best.max(cosine(s, e)?.as_f64());
            }
            if own - best >= self.tau_claim {
                out.insert(id.clone());
            }
        }
        Ok(out)
    }
}

fn remove_papers(node: &mut TaxonomyNode, papers: &BTreeSet<String>) {
    node.papers.retain(|p| !papers.contains(p));
    for c in &mut node.children {
        remove_papers(c, papers);
    }
}

fn has_empty_subtree(nodes: &[TaxonomyNode]) -> bool {
    nodes
        .iter()
        .any(|n| n.subtree_papers().is_empty() || has_empty_subtree(&n.children))
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
                "Pruning convolutional networks",
                "pruning pruning channels",
            ),
            Paper::new("p2", "Structured pruning", "pruning filters pruning"),
            Paper::new(
                "p3",
                "Quantization of weights",
                "quantization bits quantization",
            ),
            Paper::new(
                "p4",
                "Low-bit quantization",
                "quantization integer quantization",
            ),
            Paper::new("p5", "NAS for compact models", "nas search nas controller"),
            Paper::new("p6", "Differentiable NAS", "nas supernet nas"),
            Paper::new("p7", "Once-for-all networks", "subnet weights subnet"),
        ];
        let corpus = Corpus::new(papers, "test").unwrap();
        let embedder = HashEmbedder::new(512).unwrap();
        let embs = embed_corpus(&embedder, &corpus, &EmbedOptions::default()).unwrap();
        Fixture {
            corpus,
            embedder,
            embs,
        }
    }

    fn tree() -> TaxonomyNode {
        TaxonomyNode::new("0", "compression").with_children(vec![
            TaxonomyNode::new("0.0", "pruning").with_papers(["p1", "p2", "p5"]),
            TaxonomyNode::new("0.1", "quantization").with_papers(["p3", "p4", "p6"]),
            TaxonomyNode::new("0.2", "distillation").with_papers(["p7"]),
        ])
    }

    fn proposing(fx: &Fixture, topics: &str) -> MockProvider {
        let t = tree();
        let req = LlmRequest::new(
            Payload::ExpandSiblings {
                parent_title: "compression".into(),
                siblings: vec![
                    "pruning".into(),
                    "quantization".into(),
                    "distillation".into(),
                ],
                paper_titles: paper_titles(&fx.corpus, &t.subtree_papers()),
            },
            "en",
        );
        MockProvider::new(None, RuleSet::default())
            .with_fixture(&req, format!("<result>{{\"topics\": {topics}}}</result>"))
    }

    fn run(fx: &Fixture, mock: MockProvider, min_claim: usize) -> TaxonomyNode {
        let gateway = Gateway::new(Arc::new(mock));
        let ctx = FusionContext {
            corpus: &fx.corpus,
            gateway: &gateway,
            embedder: &fx.embedder,
            paper_embs: &fx.embs,
            lang: "en",
        };
        round4_expand(&ctx, &tree(), min_claim, 0.02).unwrap()
    }

    #[test]
    fn missing_sibling_claims_its_papers() {
        let fx = fixture();
        let out = run(&fx, proposing(&fx, r#"["NAS"]"#), 2);
        assert_eq!(out.children.len(), 4);
        let nas = &out.children[3];
        assert_eq!((nas.title.as_str(), nas.id.as_str()), ("NAS", "0.3"));
        assert_eq!(nas.provenance, Provenance::Expanded);
        let want: BTreeSet<String> = ["p5", "p6"].iter().map(|s| s.to_string()).collect();
        assert_eq!(nas.papers, want);
        assert_eq!(out.subtree_papers(), tree().subtree_papers());
        assert_eq!(out.paper_multiset().len(), 7);
        assert!(out.children[0].papers.len() == 2 && out.children[1].papers.len() == 2);
    }

    #[test]
    fn mock_default_leaves_tree_unchanged() {
        let fx = fixture();
        assert_eq!(run(&fx, MockProvider::default(), 2), tree());
    }

    #[test]
    fn weak_claims_and_duplicates_are_discarded() {
        let fx = fixture();
        assert_eq!(run(&fx, proposing(&fx, r#"["NAS"]"#), 3), tree());
        assert_eq!(
            run(&fx, proposing(&fx, r#"["Pruning", "compression"]"#), 1),
            tree()
        );
    }

    #[test]
    fn claims_never_empty_an_existing_node() {
        let fx = fixture();
        // p7 is the only paper of "distillation"
        let out = run(&fx, proposing(&fx, r#"["subnet"]"#), 1);
        assert_eq!(out, tree());
    }
}
