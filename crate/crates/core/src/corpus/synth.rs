//! Synthetic corpora with a planted topic hierarchy.
//!
//! Every node of a complete `branching`-ary tree of depth `depth` gets a topic
//! label (`topic-A`, `topic-A1`, `topic-A1B`, ...). Segments alternate between
//! upper-case letters and numbers so that a label is a prefix of exactly its
//! descendants' labels at a letter/digit boundary. Each leaf receives
//! `papers_per_leaf` papers whose abstracts mention every label on the leaf's
//! path, shallower labels more often, mixed with seeded filler sentences.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, GoldTaxonomy, Paper};
use crate::taxonomy::TaxonomyNode;

/// Title of the planted root; every label starts with it.
pub const SYNTH_ROOT_LABEL: &str = "topic";

const MAX_PAPERS: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub depth: usize,
    pub branching: usize,
    pub papers_per_leaf: usize,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.depth < 1 {
            return Err(CorpusError::InvalidSynthSpec("depth must be >= 1".into()));
        }
        if self.branching < 2 {
            return Err(CorpusError::InvalidSynthSpec(
                "branching must be >= 2".into(),
            ));
        }
        if self.papers_per_leaf < 1 {
            return Err(CorpusError::InvalidSynthSpec(
                "papers_per_leaf must be >= 1".into(),
            ));
        }
        let total = u32::try_from(self.depth)
            .ok()
            .and_then(|d| self.branching.checked_pow(d))
            .and_then(|leaves| leaves.checked_mul(self.papers_per_leaf));
        match total {
            Some(n) if n <= MAX_PAPERS => Ok(()),
            _ => Err(CorpusError::InvalidSynthSpec(format!(
                "corpus would exceed {MAX_PAPERS} papers"
            ))),
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.branching.pow(self.depth as u32)
    }
}

const FILLERS: &[&str] = &[
    "accuracy",
    "adaptive",
    "analysis",
    "approach",
    "architecture",
    "baseline",
    "benchmark",
    "bound",
    "complexity",
    "constraint",
    "convergence",
    "dataset",
    "decomposition",
    "design",
    "efficiency",
    "estimation",
    "evaluation",
    "experiment",
    "framework",
    "generalization",
    "heuristic",
    "inference",
    "kernel",
    "latency",
    "memory",
    "metric",
    "model",
    "module",
    "objective",
    "optimization",
    "parameter",
    "pipeline",
    "prior",
    "regularization",
    "representation",
    "robustness",
    "sampling",
    "scalability",
    "schedule",
    "signal",
    "solver",
    "sparsity",
    "stability",
    "strategy",
    "structure",
    "supervision",
    "throughput",
    "training",
];

// All templates share one bag of words, so the choice adds no lexical noise.
const SENTENCES: &[&str] = &[
    "we study {L} with {F}.",
    "with {F}, we study {L}.",
    "{L} we study with {F}.",
];

/// Mentions of the label at each level, from the first level down to the leaf.
fn level_repeats(depth: usize) -> Vec<usize> {
    // Shallower labels dominate so that the top split is the coarsest one.
    (1..=depth).map(|level| 4 + 4 * (depth - level)).collect()
}

fn letter_segment(mut index: usize) -> String {
    // bijective base 26: 0 -> A, 25 -> Z, 26 -> AA
    let mut out = Vec::new();
    loop {
        out.push(b'A' + (index % 26) as u8);
        if index < 26 {
            break;
        }
        index = index / 26 - 1;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

fn child_label(parent: &str, level: usize, index: usize) -> String {
    let segment = if level % 2 == 1 {
        letter_segment(index)
    } else {
        (index + 1).to_string()
    };
    if level == 1 {
        format!("{parent}-{segment}")
    } else {
        format!("{parent}{segment}")
    }
}

fn sentence(rng: &mut ChaCha8Rng, label: &str) -> String {
    let template = SENTENCES.choose(rng).expect("non-empty");
    let f = FILLERS.choose(rng).expect("non-empty");
    template.replace("{L}", label).replace("{F}", f)
}

struct Builder<'a> {
    spec: &'a SynthSpec,
    rng: ChaCha8Rng,
    papers: Vec<Paper>,
    repeats: Vec<usize>,
}

impl Builder<'_> {
    fn node(&mut self, label: String, path: &mut Vec<String>, level: usize) -> TaxonomyNode {
        let mut node = TaxonomyNode::new("", label.clone());
        if level == self.spec.depth {
            for _ in 0..self.spec.papers_per_leaf {
                let id = format!("p{:04}", self.papers.len() + 1);
                node.papers.insert(id.clone());
                let paper = self.paper(id, path);
                self.papers.push(paper);
            }
            return node;
        }
        for i in 0..self.spec.branching {
            let child = child_label(&label, level + 1, i);
            path.push(child.clone());
            node.children.push(self.node(child, path, level + 1));
            path.pop();
        }
        node
    }

    fn paper(&mut self, id: String, path: &[String]) -> Paper {
        let leaf = path.last().expect("leaf has a path");
        let title = format!(
            "{leaf}: {} {} {}",
            FILLERS.choose(&mut self.rng).expect("non-empty"),
            FILLERS.choose(&mut self.rng).expect("non-empty"),
            FILLERS.choose(&mut self.rng).expect("non-empty"),
        );
        let mut sentences = Vec::new();
        for (label, &count) in path.iter().zip(&self.repeats) {
            for _ in 0..count {
                sentences.push(sentence(&mut self.rng, label));
            }
        }
        // interleave so label mentions are not clustered at the start
        for i in (1..sentences.len()).rev() {
            let j = self.rng.random_range(0..=i);
            sentences.swap(i, j);
        }
        let f = FILLERS.choose(&mut self.rng).expect("non-empty");
        sentences.push(format!("further {f} details are discussed."));
        Paper {
            id,
            title,
            abstract_text: sentences.join(" "),
            lang: "en".to_string(),
        }
    }
}

/// Deterministic corpus plus its planted gold tree.
pub fn synth_corpus(spec: &SynthSpec) -> Result<(Corpus, GoldTaxonomy), CorpusError> {
    spec.validate()?;
    let mut builder = Builder {
        spec,
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        papers: Vec::new(),
        repeats: level_repeats(spec.depth),
    };
    let root = builder.node(SYNTH_ROOT_LABEL.to_string(), &mut Vec::new(), 0);
    let source = format!(
        "synth:depth={},branching={},per_leaf={},seed={}",
        spec.depth, spec.branching, spec.papers_per_leaf, spec.seed
    );
    let corpus = Corpus::new(builder.papers, source)?;
    let gold = GoldTaxonomy::validate(root, &corpus)?;
    Ok((corpus, gold))
}
