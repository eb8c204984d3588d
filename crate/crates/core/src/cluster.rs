//! Structural backbone: recursive breadth-first hierarchical clustering.
//!
//! Nodes are expanded level by level from a work queue. A node is split when
//! it is large enough and above the depth limit; the split itself is a flat
//! centroid-based k-partition whose `k` is chosen by mean silhouette. Splits
//! that would produce a single child are never made, so every internal node
//! has at least two children.
//!
//! Node ids are positional paths (`"0"`, `"0.1"`, `"0.1.0"`), which keeps them
//! unique when a subtree is rebuilt in place.

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{Embedding, EmbeddingSet};
use crate::scalar::Scalar;
use crate::taxonomy::TaxonomyNode;
use crate::text::sha256_hex;

#[derive(Debug, thiserror::Error)]
pub enum ClusterError {
    #[error("clustering needs at least 2 papers, got {0}")]
    TooFewPapers(usize),
    #[error("invalid cluster parameters: {0}")]
    InvalidParams(String),
    #[error("no embedding for paper {0:?}")]
    MissingEmbedding(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterParams {
    pub max_depth: usize,
    pub min_split_size: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub seed: u64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            max_depth: 3,
            min_split_size: 6,
            k_min: 2,
            k_max: 5,
            seed: 0,
        }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<(), ClusterError> {
        if self.max_depth < 1 {
            return Err(ClusterError::InvalidParams("max_depth must be >= 1".into()));
        }
        if self.min_split_size < 4 {
            return Err(ClusterError::InvalidParams(
                "min_split_size must be >= 4".into(),
            ));
        }
        if self.k_min < 2 || self.k_max < self.k_min {
            return Err(ClusterError::InvalidParams(format!(
                "k range [{}, {}] must satisfy 2 <= min <= max",
                self.k_min, self.k_max
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterNode<T = f64> {
    pub id: String,
    pub paper_ids: BTreeSet<String>,
    pub children: Vec<ClusterNode<T>>,
    pub depth: usize,
    pub centroid: Embedding<T>,
}

impl<T: Scalar> ClusterNode<T> {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn leaves(&self) -> Vec<&ClusterNode<T>> {
        let mut out = Vec::new();
        self.visit(&mut |n| {
            if n.is_leaf() {
                out.push(n);
            }
        });
        out
    }

    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a ClusterNode<T>)) {
        f(self);
        for c in &self.children {
            c.visit(f);
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(ClusterNode::node_count)
            .sum::<usize>()
    }

    pub fn height(&self) -> usize {
        self.children
            .iter()
            .map(|c| 1 + c.height())
            .max()
            .unwrap_or(0)
    }

    pub fn find(&self, id: &str) -> Option<&ClusterNode<T>> {
        if self.id == id {
            return Some(self);
        }
        self.children.iter().find_map(|c| c.find(id))
    }

    /// Unlabeled dump in the taxonomy schema, titled `cluster-<id>`; papers
    /// sit on the leaves.
    pub fn to_taxonomy(&self) -> TaxonomyNode {
        let mut node = TaxonomyNode::new(self.id.clone(), format!("cluster-{}", self.id));
        if self.is_leaf() {
            node.papers = self.paper_ids.clone();
        }
        node.children = self.children.iter().map(ClusterNode::to_taxonomy).collect();
        node
    }

    /// Replace the descendant (or self) with `id` by `replacement`.
    pub fn replace(&mut self, id: &str, replacement: ClusterNode<T>) -> bool {
        if self.id == id {
            *self = replacement;
            return true;
        }
        self.children
            .iter_mut()
            .any(|c| c.replace(id, replacement.clone()))
    }
}

/// Result of a single flat split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Split {
    Parts(Vec<BTreeSet<String>>),
    NoSplit,
}

fn derive_seed(seed: u64, salt: &str) -> u64 {
    let digest = sha256_hex(format!("{seed}:{salt}"));
    u64::from_str_radix(&digest[..16], 16).expect("hex digest")
}

/// Breadth-first construction of the cluster tree over (reduced) embeddings.
pub fn build_cluster_tree<T: Scalar>(
    embs: &EmbeddingSet<T>,
    params: &ClusterParams,
) -> Result<ClusterNode<T>, ClusterError> {
    params.validate()?;
    if embs.len() < 2 {
        return Err(ClusterError::TooFewPapers(embs.len()));
    }
    let papers: BTreeSet<String> = embs.ids().cloned().collect();
    grow("0".to_string(), papers, 0, embs, params, "")
}

struct Pending {
    id: String,
    papers: BTreeSet<String>,
    depth: usize,
    children: Vec<usize>,
}

fn grow<T: Scalar>(
    id: String,
    papers: BTreeSet<String>,
    depth: usize,
    embs: &EmbeddingSet<T>,
    params: &ClusterParams,
    salt: &str,
) -> Result<ClusterNode<T>, ClusterError> {
    for p in &papers {
        if embs.get(p).is_none() {
            return Err(ClusterError::MissingEmbedding(p.clone()));
        }
    }
    let mut arena = vec![Pending {
        id,
        papers,
        depth,
        children: Vec::new(),
    }];
    let mut queue = VecDeque::from([0usize]);
    while let Some(idx) = queue.pop_front() {
        let node = &arena[idx];
        if node.papers.len() < params.min_split_size || node.depth >= params.max_depth {
            continue;
        }
        let seed = derive_seed(params.seed, &format!("{}{salt}", node.id));
        let split = split_node(&node.papers, embs, params.k_min, params.k_max, seed)?;
        let Split::Parts(parts) = split else { continue };
        let (parent_id, child_depth) = (node.id.clone(), node.depth + 1);
        for (i, part) in parts.into_iter().enumerate() {
            arena.push(Pending {
                id: format!("{parent_id}.{i}"),
                papers: part,
                depth: child_depth,
                children: Vec::new(),
            });
            let child = arena.len() - 1;
            arena[idx].children.push(child);
            queue.push_back(child);
        }
    }
    Ok(assemble(&arena, 0, embs))
}

fn assemble<T: Scalar>(arena: &[Pending], idx: usize, embs: &EmbeddingSet<T>) -> ClusterNode<T> {
    let p = &arena[idx];
    ClusterNode {
        id: p.id.clone(),
        centroid: embs.centroid(&p.papers).expect("non-empty cluster"),
        paper_ids: p.papers.clone(),
        depth: p.depth,
        children: p
            .children
            .iter()
            .map(|&c| assemble(arena, c, embs))
            .collect(),
    }
}

/// Rebuild the subtree under `node` with a seed derived from the node id, so
/// the retry can differ from the original partition. Nodes below
/// `min_split_size` come back unchanged.
pub fn recluster_subtree<T: Scalar>(
    node: &ClusterNode<T>,
    embs: &EmbeddingSet<T>,
    params: &ClusterParams,
) -> Result<ClusterNode<T>, ClusterError> {
    params.validate()?;
    if node.paper_ids.len() < params.min_split_size {
        return Ok(node.clone());
    }
    grow(
        node.id.clone(),
        node.paper_ids.clone(),
        node.depth,
        embs,
        params,
        "#retry",
    )
}

/// Flat split of `paper_ids` into `k` parts, `k` in `[k_min, k_max]` chosen by
/// mean silhouette (ties within 1e-9 go to the smaller `k`). Parts are ordered
/// by size descending, then by smallest paper id.
pub fn split_node<T: Scalar>(
    paper_ids: &BTreeSet<String>,
    embs: &EmbeddingSet<T>,
    k_min: usize,
    k_max: usize,
    seed: u64,
) -> Result<Split, ClusterError> {
    let ids: Vec<&String> = paper_ids.iter().collect();
    let mut points = Vec::with_capacity(ids.len());
    for id in &ids {
        points.push(
            embs.get(id)
                .ok_or_else(|| ClusterError::MissingEmbedding((*id).clone()))?
                .values(),
        );
    }
    if points.len() < k_min.max(2) {
        return Ok(Split::NoSplit);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = rng.random_range(0..points.len());
    let mut scored = Vec::new();
    for k in k_min..=k_max.min(points.len()) {
        if let Some(labels) = kmeans(&points, k, start) {
            scored.push((k, silhouette(&points, &labels, k), labels));
        }
    }
    let labels = match select_k(scored.iter().map(|(k, s, _)| (*k, *s))) {
        Some(k) => scored
            .into_iter()
            .find(|(kk, _, _)| *kk == k)
            .map(|(_, _, l)| l)
            .expect("selected k was scored"),
        None => match median_split(&points) {
            Some(l) => l,
            None => return Ok(Split::NoSplit),
        },
    };
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut parts = vec![BTreeSet::new(); k];
    for (id, label) in ids.iter().zip(&labels) {
        parts[*label].insert((*id).clone());
    }
    parts.retain(|p| !p.is_empty());
    if parts.len() < 2 {
        return Ok(Split::NoSplit);
    }
    parts.sort_by(|a, b| {
        b.len()
            .cmp(&a.len())
            .then_with(|| a.first().cmp(&b.first()))
    });
    Ok(Split::Parts(parts))
}

/// Best `k` by score; a larger `k` must win by more than 1e-9.
pub fn select_k<T: Scalar>(scores: impl IntoIterator<Item = (usize, T)>) -> Option<usize> {
    let mut sorted: Vec<(usize, T)> = scores.into_iter().collect();
    sorted.sort_by_key(|(k, _)| *k);
    let tol = T::of(1e-9);
    let mut best: Option<(usize, T)> = None;
    for (k, s) in sorted {
        match best {
            Some((_, b)) if s <= b + tol => {}
            _ => best = Some((k, s)),
        }
    }
    best.map(|(k, _)| k)
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| (*x - *y) * (*x - *y)).sum()
}

/// Lloyd iterations from farthest-point seeding. `None` when the partition
/// degenerates (coincident seeds or an emptied cluster).
fn kmeans<T: Scalar>(points: &[&[T]], k: usize, start: usize) -> Option<Vec<usize>> {
    let n = points.len();
    let mut centers: Vec<Vec<T>> = vec![points[start].to_vec()];
    let mut nearest: Vec<T> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let (far, dist) = nearest
            .iter()
            .enumerate()
            .fold(
                (0, T::zero()),
                |best, (i, d)| if *d > best.1 { (i, *d) } else { best },
            );
        if dist <= T::zero() {
            return None;
        }
        centers.push(points[far].to_vec());
        for (i, p) in points.iter().enumerate() {
            nearest[i] = nearest[i].min(sq_dist(p, &centers[centers.len() - 1]));
        }
    }
    let mut labels = vec![usize::MAX; n];
    for _ in 0..50 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = centers
                .iter()
                .enumerate()
                .map(|(c, ctr)| (c, sq_dist(p, ctr)))
                .fold(
                    (0, T::infinity()),
                    |b, (c, d)| if d < b.1 { (c, d) } else { b },
                )
                .0;
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        let mut sums = vec![vec![T::zero(); points[0].len()]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p.iter()) {
                *s += *v;
            }
        }
        if counts.contains(&0) {
            return None;
        }
        for ((ctr, sum), &count) in centers.iter_mut().zip(sums).zip(&counts) {
            let c = T::of_usize(count);
            *ctr = sum.into_iter().map(|s| s / c).collect();
        }
        if !changed {
            break;
        }
    }
    Some(labels)
}

/// Mean silhouette width; singleton clusters contribute 0.
pub fn silhouette<T: Scalar>(points: &[&[T]], labels: &[usize], k: usize) -> T {
    let n = points.len();
    if n == 0 {
        return T::zero();
    }
    let sizes = labels.iter().fold(vec![0usize; k], |mut acc, &l| {
        acc[l] += 1;
        acc
    });
    let mut total = T::zero();
    for i in 0..n {
        let own = labels[i];
        if sizes[own] <= 1 {
            continue;
        }
        let mut sums = vec![T::zero(); k];
        for j in 0..n {
            if i != j {
                sums[labels[j]] += sq_dist(points[i], points[j]).sqrt();
            }
        }
        let a = sums[own] / T::of_usize(sizes[own] - 1);
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / T::of_usize(sizes[c]))
            .fold(T::infinity(), T::min);
        let denom = a.max(b);
        if denom > T::zero() && b.is_finite() {
            total += (b - a) / denom;
        }
    }
    total / T::of_usize(n)
}

/// Two-way split at the median projection on the first principal direction.
fn median_split<T: Scalar>(points: &[&[T]]) -> Option<Vec<usize>> {
    let n = points.len();
    let dim = points[0].len();
    let mean: Vec<T> = (0..dim)
        .map(|d| points.iter().map(|p| p[d]).sum::<T>() / T::of_usize(n))
        .collect();
    let centered: Vec<Vec<T>> = points
        .iter()
        .map(|p| p.iter().zip(&mean).map(|(v, m)| *v - *m).collect())
        .collect();
    let gram: Vec<Vec<T>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    centered[i]
                        .iter()
                        .zip(&centered[j])
                        .map(|(a, b)| *a * *b)
                        .sum()
                })
                .collect()
        })
        .collect();
    let (values, vectors) = crate::embedding::jacobi_eigen(gram);
    let top = (0..n).fold(0, |b, i| if values[i] > values[b] { i } else { b });
    // projections onto the top axis are proportional to the top Gram eigenvector
    let proj: Vec<T> = (0..n).map(|i| vectors[i][top]).collect();
    let mut sorted = proj.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let median = sorted[(n - 1) / 2];
    let labels: Vec<usize> = proj.iter().map(|p| usize::from(*p > median)).collect();
    let right = labels.iter().sum::<usize>();
    (right > 0 && right < n && values[top] > T::zero()).then_some(labels)
}
