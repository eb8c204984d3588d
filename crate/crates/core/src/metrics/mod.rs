//! Taxonomy-vs-reference evaluation: NMI and Purity over the flat paper
//! partition, CEDS (normalized tree edit distance) and HSR (LCA depth
//! agreement over paper pairs). All metrics are computed in [0, 1].

mod hsr;
#[cfg(any(test, feature = "oracle"))]
mod oracle;
mod ted;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::embedding::{EmbedError, Embedder};
use crate::taxonomy::TaxonomyNode;

pub use hsr::{hsr, hsr_with_limit, HsrResult, HSR_MAX_PAIRS};
#[cfg(any(test, feature = "oracle"))]
pub use oracle::{ted_oracle, ORACLE_MAX_NODES};
pub use ted::{canonicalize, ceds, tree_edit_distance, SubstitutionCost};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("need at least 2 papers present in both trees, found {0}")]
    TooFewShared(usize),
    #[error("paper {paper:?} is listed under both {first} and {second}")]
    MultipleAssignment {
        paper: String,
        first: String,
        second: String,
    },
    #[error("oracle accepts trees of at most {max} nodes, got {nodes}")]
    OracleTooLarge { nodes: usize, max: usize },
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// Paper id to cluster label.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FlatPartition {
    labels: BTreeMap<String, String>,
}

impl FlatPartition {
    pub fn new(labels: BTreeMap<String, String>) -> Self {
        Self { labels }
    }

    pub fn get(&self, paper: &str) -> Option<&str> {
        self.labels.get(paper).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn papers(&self) -> impl Iterator<Item = &String> {
        self.labels.keys()
    }
}

/// Label each paper with the positional path (`0`, `0.1`, ...) of the node
/// listing it. A paper listed twice is an error.
pub fn flatten(root: &TaxonomyNode) -> Result<FlatPartition, MetricsError> {
    fn go(
        n: &TaxonomyNode,
        path: String,
        out: &mut BTreeMap<String, String>,
    ) -> Result<(), MetricsError> {
        for p in &n.papers {
            if let Some(prev) = out.insert(p.clone(), path.clone()) {
                return Err(MetricsError::MultipleAssignment {
                    paper: p.clone(),
                    first: prev,
                    second: path,
                });
            }
        }
        for (i, c) in n.children.iter().enumerate() {
            go(c, format!("{path}.{i}"), out)?;
        }
        Ok(())
    }
    let mut out = BTreeMap::new();
    go(root, "0".to_string(), &mut out)?;
    Ok(FlatPartition::new(out))
}

/// Contingency counts over the shared papers: (cell counts, row sums, column
/// sums, n).
struct Contingency {
    cells: HashMap<(usize, usize), usize>,
    rows: Vec<usize>,
    cols: Vec<usize>,
    n: usize,
}

fn contingency(pred: &FlatPartition, gold: &FlatPartition) -> Result<Contingency, MetricsError> {
    let mut row_ix: HashMap<&str, usize> = HashMap::new();
    let mut col_ix: HashMap<&str, usize> = HashMap::new();
    let mut c = Contingency {
        cells: HashMap::new(),
        rows: Vec::new(),
        cols: Vec::new(),
        n: 0,
    };
    for (paper, p) in &pred.labels {
        let Some(g) = gold.get(paper) else {
            continue;
        };
        let next = row_ix.len();
        let r = *row_ix.entry(p.as_str()).or_insert(next);
        let next = col_ix.len();
        let k = *col_ix.entry(g).or_insert(next);
        if r == c.rows.len() {
            c.rows.push(0);
        }
        if k == c.cols.len() {
            c.cols.push(0);
        }
        c.rows[r] += 1;
        c.cols[k] += 1;
        *c.cells.entry((r, k)).or_default() += 1;
        c.n += 1;
    }
    if c.n < 2 {
        return Err(MetricsError::TooFewShared(c.n));
    }
    Ok(c)
}

fn entropy(counts: &[usize], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&k| k > 0)
        .map(|&k| {
            let p = k as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// `I(X;Y) / sqrt(H(X) H(Y))` in nats over the shared papers. When either
/// entropy is zero the score is 1 for identical partitions and 0 otherwise.
pub fn nmi(pred: &FlatPartition, gold: &FlatPartition) -> Result<f64, MetricsError> {
    let c = contingency(pred, gold)?;
    let n = c.n as f64;
    let (hx, hy) = (entropy(&c.rows, n), entropy(&c.cols, n));
    if hx <= 0.0 || hy <= 0.0 {
        let identical = c.cells.len() == c.rows.len() && c.cells.len() == c.cols.len();
        return Ok(if identical { 1.0 } else { 0.0 });
    }
    let mi: f64 = c
        .cells
        .iter()
        .map(|(&(r, k), &nij)| {
            let nij = nij as f64;
            nij / n * (n * nij / (c.rows[r] as f64 * c.cols[k] as f64)).ln()
        })
        .sum();
    Ok((mi / (hx * hy).sqrt()).clamp(0.0, 1.0))
}

/// Share of shared papers that belong to their cluster's majority gold class.
pub fn purity(pred: &FlatPartition, gold: &FlatPartition) -> Result<f64, MetricsError> {
    let c = contingency(pred, gold)?;
    let mut best = vec![0usize; c.rows.len()];
    for (&(r, _), &nij) in &c.cells {
        best[r] = best[r].max(nij);
    }
    Ok(best.iter().sum::<usize>() as f64 / c.n as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalParams {
    pub tau_sub: f64,
    /// Use `1 - cosine` substitution costs instead of the 0/1 threshold.
    pub graded: bool,
    pub hsr_seed: u64,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            tau_sub: 0.85,
            graded: false,
            hsr_seed: 0,
        }
    }
}

impl EvalParams {
    pub fn substitution(&self) -> SubstitutionCost {
        if self.graded {
            SubstitutionCost::Graded
        } else {
            SubstitutionCost::Binary {
                tau_sub: self.tau_sub,
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub nmi: f64,
    pub purity: f64,
    pub ceds: f64,
    pub hsr: f64,
    pub papers_evaluated: usize,
    pub pred_only: usize,
    pub gold_only: usize,
    pub pred_nodes: usize,
    pub gold_nodes: usize,
    pub hsr_pairs_total: usize,
    pub hsr_pairs_used: usize,
    pub params: EvalParams,
}

fn pct(x: f64) -> f64 {
    (x * 1000.0).round() / 10.0
}

impl EvalReport {
    /// Report document with the four metrics scaled to 0..100, one decimal.
    pub fn to_json(&self) -> Value {
        json!({
            "nmi": pct(self.nmi),
            "purity": pct(self.purity),
            "ceds": pct(self.ceds),
            "hsr": pct(self.hsr),
            "counts": {
                "papers_evaluated": self.papers_evaluated,
                "pred_only_papers": self.pred_only,
                "gold_only_papers": self.gold_only,
                "pred_nodes": self.pred_nodes,
                "gold_nodes": self.gold_nodes,
                "hsr_pairs_total": self.hsr_pairs_total,
                "hsr_pairs_used": self.hsr_pairs_used,
            },
            "parameters": {
                "tau_sub": self.params.tau_sub,
                "substitution": if self.params.graded { "graded" } else { "binary" },
                "hsr_seed": self.params.hsr_seed,
            },
        })
    }
}

/// All four metrics of `pred` against `gold`, over the papers both contain.
pub fn evaluate(
    pred: &TaxonomyNode,
    gold: &TaxonomyNode,
    embedder: &dyn Embedder,
    params: &EvalParams,
) -> Result<EvalReport, MetricsError> {
    let (fp, fg) = (flatten(pred)?, flatten(gold)?);
    let pp: BTreeSet<&String> = fp.papers().collect();
    let gp: BTreeSet<&String> = fg.papers().collect();
    let shared = pp.intersection(&gp).count();
    let h = hsr(pred, gold, params.hsr_seed)?;
    Ok(EvalReport {
        nmi: nmi(&fp, &fg)?,
        purity: purity(&fp, &fg)?,
        ceds: ceds(pred, gold, embedder, params.substitution())?,
        hsr: h.value,
        papers_evaluated: shared,
        pred_only: pp.len() - shared,
        gold_only: gp.len() - shared,
        pred_nodes: pred.node_count(),
        gold_nodes: gold.node_count(),
        hsr_pairs_total: h.pairs_total,
        hsr_pairs_used: h.pairs_used,
        params: params.clone(),
    })
}
