//! Brute-force tree edit distance for cross-checking the dynamic program.

use super::ted::Ordered;
use super::MetricsError;
use crate::taxonomy::TaxonomyNode;

/// Largest tree (in nodes) the oracle accepts.
pub const ORACLE_MAX_NODES: usize = 6;

/// Exact edit distance by enumerating every valid node mapping: one-to-one,
/// preserving ancestry and left-to-right order. The cheapest mapping costs
/// the substitutions of its pairs plus one per unmapped node on either side.
pub fn ted_oracle(
    a: &TaxonomyNode,
    b: &TaxonomyNode,
    sub: &dyn Fn(&str, &str) -> f64,
) -> Result<f64, MetricsError> {
    let (ta, tb) = (Ordered::new(a), Ordered::new(b));
    let largest = ta.len().max(tb.len());
    if largest > ORACLE_MAX_NODES {
        return Err(MetricsError::OracleTooLarge {
            nodes: largest,
            max: ORACLE_MAX_NODES,
        });
    }
    let mut best = f64::INFINITY;
    let mut pairs = Vec::new();
    search(&ta, &tb, 0, &mut pairs, 0.0, sub, &mut best);
    Ok(best)
}

fn compatible(
    ta: &Ordered<'_>,
    tb: &Ordered<'_>,
    pairs: &[(usize, usize)],
    i: usize,
    j: usize,
) -> bool {
    pairs.iter().all(|&(pi, pj)| {
        pj != j
            && ta.is_ancestor(pi, i) == tb.is_ancestor(pj, j)
            && ta.is_ancestor(i, pi) == tb.is_ancestor(j, pj)
            && (pi < i) == (pj < j)
    })
}

fn search(
    ta: &Ordered<'_>,
    tb: &Ordered<'_>,
    i: usize,
    pairs: &mut Vec<(usize, usize)>,
    subs: f64,
    sub: &dyn Fn(&str, &str) -> f64,
    best: &mut f64,
) {
    if i == ta.len() {
        let unmapped = (ta.len() - pairs.len()) + (tb.len() - pairs.len());
        *best = best.min(subs + unmapped as f64);
        return;
    }
    search(ta, tb, i + 1, pairs, subs, sub, best);
    for j in 0..tb.len() {
        if compatible(ta, tb, pairs, i, j) {
            pairs.push((i, j));
            search(
                ta,
                tb,
                i + 1,
                pairs,
                subs + sub(ta.labels[i], tb.labels[j]),
                sub,
                best,
            );
            pairs.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(a: &str, b: &str) -> f64 {
        if a == b {
            0.0
        } else {
            1.0
        }
    }

    fn node(title: &str, kids: Vec<TaxonomyNode>) -> TaxonomyNode {
        TaxonomyNode::new("", title).with_children(kids)
    }

    #[test]
    fn oracle_small_cases() {
        let three = node("r", vec![node("a", vec![]), node("b", vec![])]);
        assert_eq!(ted_oracle(&three, &three, &unit).unwrap(), 0.0);
        assert_eq!(ted_oracle(&three, &node("r", vec![]), &unit).unwrap(), 2.0);
        assert_eq!(
            ted_oracle(&node("x", vec![]), &node("y", vec![]), &unit).unwrap(),
            1.0
        );
    }

    #[test]
    fn oracle_rejects_large_trees() {
        let big = node("r", (0..6).map(|i| node(&i.to_string(), vec![])).collect());
        assert!(matches!(
            ted_oracle(&big, &big, &unit),
            Err(MetricsError::OracleTooLarge { nodes: 7, .. })
        ));
    }
}
