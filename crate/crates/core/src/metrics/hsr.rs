use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::MetricsError;
use crate::taxonomy::TaxonomyNode;

/// Pair budget before HSR switches to a seeded uniform sample.
pub const HSR_MAX_PAIRS: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct HsrResult {
    pub value: f64,
    /// Unordered shared-paper pairs in total.
    pub pairs_total: usize,
    /// Pairs actually averaged; below `pairs_total` when sampled.
    pub pairs_used: usize,
}

/// Positional path (child indices from the root) of the deepest node listing
/// each paper.
fn paper_paths(root: &TaxonomyNode) -> BTreeMap<&str, Vec<usize>> {
    fn go<'a>(n: &'a TaxonomyNode, path: &mut Vec<usize>, out: &mut BTreeMap<&'a str, Vec<usize>>) {
        for p in &n.papers {
            match out.get(p.as_str()) {
                Some(prev) if prev.len() >= path.len() => {}
                _ => {
                    out.insert(p, path.clone());
                }
            }
        }
        for (i, c) in n.children.iter().enumerate() {
            path.push(i);
            go(c, path, out);
            path.pop();
        }
    }
    let mut out = BTreeMap::new();
    go(root, &mut Vec::new(), &mut out);
    out
}

fn lca_depth(a: &[usize], b: &[usize]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

fn ratio(dp: usize, dg: usize) -> f64 {
    if dp == 0 && dg == 0 {
        1.0
    } else {
        dp.min(dg) as f64 / dp.max(dg) as f64
    }
}

/// Mean over shared paper pairs of `min(d_p, d_g) / max(d_p, d_g)`, where `d`
/// is the depth of the pair's lowest common ancestor (root at depth 0) and a
/// pair at depth 0 in both trees scores 1.
pub fn hsr(pred: &TaxonomyNode, gold: &TaxonomyNode, seed: u64) -> Result<HsrResult, MetricsError> {
    hsr_with_limit(pred, gold, seed, HSR_MAX_PAIRS)
}

/// [`hsr`] with an explicit pair budget; above it a reservoir sample of
/// `max_pairs` pairs (seeded) is averaged instead.
pub fn hsr_with_limit(
    pred: &TaxonomyNode,
    gold: &TaxonomyNode,
    seed: u64,
    max_pairs: usize,
) -> Result<HsrResult, MetricsError> {
    let (pp, gp) = (paper_paths(pred), paper_paths(gold));
    let shared: Vec<(&Vec<usize>, &Vec<usize>)> = pp
        .iter()
        .filter_map(|(id, a)| gp.get(id).map(|b| (a, b)))
        .collect();
    let n = shared.len();
    if n < 2 {
        return Err(MetricsError::TooFewShared(n));
    }
    let total = n * (n - 1) / 2;
    let score = |i: usize, j: usize| {
        let (a, b) = (shared[i], shared[j]);
        ratio(lca_depth(a.0, b.0), lca_depth(a.1, b.1))
    };
    let max_pairs = max_pairs.max(1);
    if total <= max_pairs {
        let mut sum = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                sum += score(i, j);
            }
        }
        return Ok(HsrResult {
            value: sum / total as f64,
            pairs_total: total,
            pairs_used: total,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reservoir: Vec<(usize, usize)> = Vec::with_capacity(max_pairs);
    let mut t = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            if t < max_pairs {
                reservoir.push((i, j));
            } else {
                let r = rng.random_range(0..=t);
                if r < max_pairs {
                    reservoir[r] = (i, j);
                }
            }
            t += 1;
        }
    }
    let sum: f64 = reservoir.iter().map(|&(i, j)| score(i, j)).sum();
    Ok(HsrResult {
        value: sum / max_pairs as f64,
        pairs_total: total,
        pairs_used: max_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(title: &str, papers: &[&str]) -> TaxonomyNode {
        TaxonomyNode::new("", title).with_papers(papers.iter().copied())
    }

    #[test]
    fn flat_prediction_against_two_groups() {
        let gold = TaxonomyNode::new("", "root")
            .with_children(vec![leaf("A", &["p1", "p2"]), leaf("B", &["p3"])]);
        let pred = leaf("root", &["p1", "p2", "p3"]);
        let r = hsr(&pred, &gold, 0).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-9);
        assert_eq!((r.pairs_total, r.pairs_used), (3, 3));
        assert_eq!(hsr(&gold, &pred, 0).unwrap().value, r.value);
        assert_eq!(hsr(&gold, &gold, 0).unwrap().value, 1.0);
    }

    #[test]
    fn one_level_deeper_is_penalized() {
        let gold = TaxonomyNode::new("", "root")
            .with_children(vec![leaf("A", &["p1", "p2"]), leaf("B", &["p3", "p4"])]);
        let pred = TaxonomyNode::new("", "root").with_children(vec![
            TaxonomyNode::new("", "A")
                .with_children(vec![leaf("A'", &["p1", "p2"]), leaf("x", &[])]),
            TaxonomyNode::new("", "B")
                .with_children(vec![leaf("B'", &["p3", "p4"]), leaf("y", &[])]),
        ]);
        // same-group pairs score 1/2, cross pairs 1
        let r = hsr(&pred, &gold, 0).unwrap();
        assert!((r.value - (2.0 * 0.5 + 4.0) / 6.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_seeded_and_close() {
        let gold = TaxonomyNode::new("", "root").with_children(vec![
            leaf("A", &["p1", "p2", "p3", "p4"]),
            leaf("B", &["p5", "p6", "p7", "p8"]),
        ]);
        let pred = leaf("root", &["p1", "p2", "p3", "p4", "p5", "p6", "p7", "p8"]);
        let exact = hsr(&pred, &gold, 0).unwrap();
        let a = hsr_with_limit(&pred, &gold, 7, 10).unwrap();
        let b = hsr_with_limit(&pred, &gold, 7, 10).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.pairs_total, a.pairs_used), (28, 10));
        assert!((0.0..=1.0).contains(&a.value));
        assert!((exact.value - 16.0 / 28.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_shared_papers() {
        let a = leaf("root", &["p1"]);
        assert!(matches!(hsr(&a, &a, 0), Err(MetricsError::TooFewShared(1))));
    }
}
