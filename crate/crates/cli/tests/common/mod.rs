#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use taxo_core::corpus::{load_corpus, load_gold, Corpus};
use taxo_core::llm::{
    result_text, Gateway, LlmRequest, MockProvider, Payload, Provider, ProviderError, RuleSet,
};
use taxo_core::pipeline::{run_build, BuildConfig, ProviderConfig};
use taxo_core::taxonomy::TaxonomyNode;

pub const DRIFT_LEAF: &str = "topic-A1";
pub const DRIFT_TITLE: &str = "Mathematical Concepts";

pub fn taxo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_taxo"))
        .args(args)
        .output()
        .expect("taxo runs")
}

pub fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "taxo failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// `taxo synth` into `dir`; returns (corpus path, gold path).
pub fn synth(
    dir: &Path,
    depth: usize,
    branching: usize,
    per_leaf: usize,
    seed: u64,
) -> (PathBuf, PathBuf) {
    let args = [
        "synth".to_string(),
        "--depth".into(),
        depth.to_string(),
        "--branching".into(),
        branching.to_string(),
        "--per-leaf".into(),
        per_leaf.to_string(),
        "--seed".into(),
        seed.to_string(),
        "--out".into(),
        s(dir).to_string(),
    ];
    ok(&taxo(&args.iter().map(String::as_str).collect::<Vec<_>>()));
    (dir.join("corpus.jsonl"), dir.join("gold.json"))
}

/// Mock provider that remembers every request it answers.
struct Recorder {
    inner: MockProvider,
    seen: Mutex<Vec<LlmRequest>>,
}

impl Provider for Recorder {
    fn name(&self) -> &str {
        "mock"
    }
    fn complete(&self, req: &LlmRequest, prompt: &str) -> Result<String, ProviderError> {
        self.seen.lock().unwrap().push(req.clone());
        self.inner.complete(req, prompt)
    }
}

fn record(corpus: &Corpus, config: &BuildConfig, fixtures: &Path) -> Vec<LlmRequest> {
    let rec = Arc::new(Recorder {
        inner: MockProvider::new(Some(fixtures.to_path_buf()), RuleSet::default()),
        seen: Mutex::new(Vec::new()),
    });
    let gw = Gateway::new(rec.clone());
    run_build::<f64>(corpus, config, &gw, &mut |_, _| {}).expect("recording build");
    let seen = rec.seen.lock().unwrap().clone();
    seen
}

/// Install replies that make leaf `topic-A1` drift to "Mathematical Concepts"
/// during labeling, and that answer the follow-up alignment request with the
/// planted title. Captured in two recording passes, since the alignment
/// request only exists once the drift is in place.
pub fn install_drift_fixtures(corpus: &Corpus, dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    let config = BuildConfig {
        provider: ProviderConfig::Mock {
            fixtures: Some(dir.to_path_buf()),
            max_concepts: RuleSet::default().max_concepts,
        },
        ..BuildConfig::default()
    };
    let write = |req: &LlmRequest, title: &str| {
        std::fs::write(
            dir.join(format!("{}.txt", req.digest())),
            result_text(&json!({ "title": title })),
        )
        .unwrap();
    };
    let label = record(corpus, &config, dir)
        .into_iter()
        .find(|r| {
            matches!(&r.payload, Payload::LabelCluster { candidates, child_titles, .. }
                if child_titles.is_empty() && candidates.first().is_some_and(|c| c.term == DRIFT_LEAF))
        })
        .expect("labeling request for the drift leaf");
    write(&label, DRIFT_TITLE);
    let align = record(corpus, &config, dir)
        .into_iter()
        .find(|r| matches!(&r.payload, Payload::AlignTitle { title, .. } if title == DRIFT_TITLE))
        .expect("alignment request for the drifted title");
    write(&align, DRIFT_LEAF);
}

pub fn load_planted(dir: &Path) -> (Corpus, TaxonomyNode) {
    let corpus = load_corpus(&dir.join("corpus.jsonl")).unwrap();
    let gold = load_gold(&dir.join("gold.json"), &corpus).unwrap().root;
    (corpus, gold)
}

/// Random tree with distinct titles and every paper on exactly one node.
pub fn random_tree(rng: &mut ChaCha8Rng, max_nodes: usize, papers: usize) -> TaxonomyNode {
    let n = rng.random_range(1..=max_nodes);
    let mut parents = vec![usize::MAX];
    for i in 1..n {
        parents.push(rng.random_range(0..i));
    }
    let mut nodes: Vec<TaxonomyNode> = (0..n)
        .map(|i| TaxonomyNode::new(i.to_string(), format!("node {i}")))
        .collect();
    for p in 0..papers {
        let at = rng.random_range(0..n);
        nodes[at].papers.insert(format!("p{p}"));
    }
    // attach children to parents, deepest indices first
    for i in (1..n).rev() {
        let child = std::mem::replace(&mut nodes[i], TaxonomyNode::new("", ""));
        nodes[parents[i]].children.insert(0, child);
    }
    nodes.swap_remove(0)
}

/// Random tree over a small title alphabet, for edit distance checks.
pub fn random_labeled(rng: &mut ChaCha8Rng, max_nodes: usize, alphabet: &[&str]) -> TaxonomyNode {
    let n = rng.random_range(1..=max_nodes);
    let mut parents = vec![usize::MAX];
    for i in 1..n {
        parents.push(rng.random_range(0..i));
    }
    let mut nodes: Vec<TaxonomyNode> = (0..n)
        .map(|i| TaxonomyNode::new(i.to_string(), alphabet[rng.random_range(0..alphabet.len())]))
        .collect();
    for i in (1..n).rev() {
        let child = std::mem::replace(&mut nodes[i], TaxonomyNode::new("", ""));
        nodes[parents[i]].children.insert(0, child);
    }
    nodes.swap_remove(0)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
