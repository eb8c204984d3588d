//! Ordered tree edit distance and the catalogue edit-distance similarity.

use std::collections::HashMap;

use super::MetricsError;
use crate::embedding::{cosine, Embedder};
use crate::fusion::TitleVectors;
use crate::taxonomy::TaxonomyNode;
use crate::text::normalize_title;

/// Title substitution cost. Insertions and deletions always cost 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SubstitutionCost {
    /// 0 for equal normalized titles or cosine `>= tau_sub`, else 1.
    Binary { tau_sub: f64 },
    /// 0 for equal normalized titles, else `1 - max(cosine, 0)`.
    Graded,
}

/// Post-order view of a tree: labels, leftmost leaf descendant per node.
pub(crate) struct Ordered<'a> {
    pub(crate) labels: Vec<&'a str>,
    pub(crate) lmld: Vec<usize>,
}

impl<'a> Ordered<'a> {
    pub(crate) fn new(root: &'a TaxonomyNode) -> Self {
        fn go<'a>(n: &'a TaxonomyNode, labels: &mut Vec<&'a str>, lmld: &mut Vec<usize>) -> usize {
            let mut first = None;
            for c in &n.children {
                let l = go(c, labels, lmld);
                first.get_or_insert(l);
            }
            let me = labels.len();
            labels.push(&n.title);
            let l = first.unwrap_or(me);
            lmld.push(l);
            l
        }
        let mut t = Ordered {
            labels: Vec::new(),
            lmld: Vec::new(),
        };
        go(root, &mut t.labels, &mut t.lmld);
        t
    }

    pub(crate) fn len(&self) -> usize {
        self.labels.len()
    }

    /// Whether `a` is a proper ancestor of `d`.
    #[cfg(any(test, feature = "oracle"))]
    pub(crate) fn is_ancestor(&self, a: usize, d: usize) -> bool {
        self.lmld[a] <= d && d < a
    }

    fn keyroots(&self) -> Vec<usize> {
        // highest node for every distinct leftmost leaf
        let mut by_leaf: HashMap<usize, usize> = HashMap::new();
        for i in 0..self.len() {
            by_leaf.insert(self.lmld[i], i);
        }
        let mut k: Vec<usize> = by_leaf.into_values().collect();
        k.sort_unstable();
        k
    }
}

/// Edit distance between ordered trees (children taken in the given order)
/// by the keyroot dynamic program. `sub` prices relabeling one title as
/// another.
pub fn tree_edit_distance(
    a: &TaxonomyNode,
    b: &TaxonomyNode,
    sub: &dyn Fn(&str, &str) -> f64,
) -> f64 {
    let (ta, tb) = (Ordered::new(a), Ordered::new(b));
    let (n, m) = (ta.len(), tb.len());
    let mut td = vec![vec![0.0f64; m]; n];
    let mut fd = vec![vec![0.0f64; m + 1]; n + 1];
    for &i in &ta.keyroots() {
        for &j in &tb.keyroots() {
            let (li, lj) = (ta.lmld[i], tb.lmld[j]);
            let (rows, cols) = (i - li + 1, j - lj + 1);
            fd[0][0] = 0.0;
            for x in 1..=rows {
                fd[x][0] = fd[x - 1][0] + 1.0;
            }
            for y in 1..=cols {
                fd[0][y] = fd[0][y - 1] + 1.0;
            }
            for x in 1..=rows {
                let u = li + x - 1;
                for y in 1..=cols {
                    let v = lj + y - 1;
                    let del = fd[x - 1][y] + 1.0;
                    let ins = fd[x][y - 1] + 1.0;
                    if ta.lmld[u] == li && tb.lmld[v] == lj {
                        let best = del
                            .min(ins)
                            .min(fd[x - 1][y - 1] + sub(ta.labels[u], tb.labels[v]));
                        fd[x][y] = best;
                        td[u][v] = best;
                    } else {
                        let (p, q) = (ta.lmld[u] - li, tb.lmld[v] - lj);
                        fd[x][y] = del.min(ins).min(fd[p][q] + td[u][v]);
                    }
                }
            }
        }
    }
    td[n - 1][m - 1]
}

/// Copy with children sorted recursively by normalized title; equal titles
/// are ordered by their canonical subtree, so input child order never matters.
pub fn canonicalize(root: &TaxonomyNode) -> TaxonomyNode {
    fn go(n: &TaxonomyNode) -> (TaxonomyNode, String) {
        let mut kids: Vec<(TaxonomyNode, String)> = n.children.iter().map(go).collect();
        kids.sort_by(|a, b| {
            normalize_title(&a.0.title)
                .cmp(&normalize_title(&b.0.title))
                .then_with(|| a.1.cmp(&b.1))
        });
        let key = format!(
            "{}({})",
            normalize_title(&n.title),
            kids.iter()
                .map(|k| k.1.as_str())
                .collect::<Vec<_>>()
                .join(",")
        );
        let mut out = n.clone();
        out.children = kids.into_iter().map(|k| k.0).collect();
        (out, key)
    }
    go(root).0
}

/// Build a title substitution function from `cost`, embedding each distinct
/// title once.
pub(crate) fn title_costs(
    a: &TaxonomyNode,
    b: &TaxonomyNode,
    embedder: &dyn Embedder,
    cost: SubstitutionCost,
) -> Result<HashMap<(String, String), f64>, MetricsError> {
    let mut vectors = TitleVectors::<f64>::new(embedder);
    let (ta, tb) = (a.titles(), b.titles());
    let mut out = HashMap::new();
    for x in &ta {
        for y in &tb {
            if out.contains_key(&(x.clone(), y.clone())) {
                continue;
            }
            let c = if normalize_title(x) == normalize_title(y) {
                0.0
            } else {
                let sim = cosine(&vectors.get(x)?, &vectors.get(y)?)?;
                match cost {
                    SubstitutionCost::Binary { tau_sub } => {
                        if sim >= tau_sub {
                            0.0
                        } else {
                            1.0
                        }
                    }
                    SubstitutionCost::Graded => 1.0 - sim.max(0.0),
                }
            };
            out.insert((x.clone(), y.clone()), c);
        }
    }
    Ok(out)
}

/// `1 - TED / max(|pred|, |gold|)` over canonicalized trees, clamped to [0, 1].
pub fn ceds(
    pred: &TaxonomyNode,
    gold: &TaxonomyNode,
    embedder: &dyn Embedder,
    cost: SubstitutionCost,
) -> Result<f64, MetricsError> {
    let (a, b) = (canonicalize(pred), canonicalize(gold));
    let costs = title_costs(&a, &b, embedder, cost)?;
    let sub = |x: &str, y: &str| {
        costs
            .get(&(x.to_string(), y.to_string()))
            .copied()
            .unwrap_or(1.0)
    };
    let ted = tree_edit_distance(&a, &b, &sub);
    let size = a.node_count().max(b.node_count()) as f64;
    Ok((1.0 - ted / size).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::HashEmbedder;

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
    fn classic_small_cases() {
        let one = node("r", vec![]);
        let three = node("r", vec![node("a", vec![]), node("b", vec![])]);
        assert_eq!(tree_edit_distance(&three, &three, &unit), 0.0);
        assert_eq!(tree_edit_distance(&three, &one, &unit), 2.0);
        assert_eq!(tree_edit_distance(&one, &three, &unit), 2.0);
        assert_eq!(tree_edit_distance(&one, &node("x", vec![]), &unit), 1.0);
    }

    #[test]
    fn textbook_example() {
        // f(d(a c(b)) e) vs f(c(d(a b)) e): distance 2
        let t1 = node(
            "f",
            vec![
                node(
                    "d",
                    vec![node("a", vec![]), node("c", vec![node("b", vec![])])],
                ),
                node("e", vec![]),
            ],
        );
        let t2 = node(
            "f",
            vec![
                node(
                    "c",
                    vec![node("d", vec![node("a", vec![]), node("b", vec![])])],
                ),
                node("e", vec![]),
            ],
        );
        assert_eq!(tree_edit_distance(&t1, &t2, &unit), 2.0);
    }

    #[test]
    fn ceds_ignores_child_order() {
        let e = HashEmbedder::new(64).unwrap();
        let a = node(
            "root",
            vec![node("pruning", vec![]), node("search", vec![])],
        );
        let b = node(
            "root",
            vec![node("search", vec![]), node("Pruning", vec![])],
        );
        assert_eq!(
            ceds(&a, &b, &e, SubstitutionCost::Binary { tau_sub: 0.85 }).unwrap(),
            1.0
        );
    }

    #[test]
    fn missing_children_cost_a_third() {
        let e = HashEmbedder::new(64).unwrap();
        let gold = node("root", vec![node("a", vec![]), node("b", vec![])]);
        let pred = node("root", vec![]);
        let v = ceds(&pred, &gold, &e, SubstitutionCost::Binary { tau_sub: 0.85 }).unwrap();
        assert!((v - (1.0 - 2.0 / 3.0)).abs() < 1e-9);
    }

    #[test]
    fn synonym_under_threshold_is_free() {
        let e = HashEmbedder::new(64).unwrap();
        // same token bag, different order: cosine 1 under the hash embedder
        let gold = node("root", vec![node("graph pruning", vec![])]);
        let pred = node("root", vec![node("pruning graph", vec![])]);
        assert_eq!(
            ceds(&pred, &gold, &e, SubstitutionCost::Binary { tau_sub: 0.85 }).unwrap(),
            1.0
        );
        assert!(ceds(&pred, &gold, &e, SubstitutionCost::Graded).unwrap() > 0.99);
    }

    #[test]
    fn canonical_order_breaks_title_ties_by_subtree() {
        let a = node(
            "r",
            vec![
                node("x", vec![node("b", vec![])]),
                node("x", vec![node("a", vec![])]),
            ],
        );
        let c = canonicalize(&a);
        assert_eq!(c.children[0].children[0].title, "a");
    }
}
