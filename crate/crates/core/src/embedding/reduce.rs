//! Dimensionality reduction ahead of clustering.
//!
//! The default reducer is centered, truncated principal-component projection.
//! It is deterministic, which keeps whole builds reproducible; a manifold
//! learner can be swapped in through [`Reducer`].

use std::collections::BTreeMap;

use super::{EmbedError, Embedding, EmbeddingSet};
use crate::scalar::Scalar;

pub trait Reducer<T: Scalar>: Send + Sync {
    fn name(&self) -> &str;
    fn reduce(
        &self,
        embs: &EmbeddingSet<T>,
        target_dim: usize,
        seed: u64,
    ) -> Result<EmbeddingSet<T>, EmbedError>;
}

/// Principal-component projection. Each component's largest-magnitude
/// loading is made positive; components with (numerically) zero variance
/// project to zero.
#[derive(Clone, Copy, Debug, Default)]
pub struct PcaReducer;

impl<T: Scalar> Reducer<T> for PcaReducer {
    fn name(&self) -> &str {
        "pca"
    }

    fn reduce(
        &self,
        embs: &EmbeddingSet<T>,
        target_dim: usize,
        _seed: u64,
    ) -> Result<EmbeddingSet<T>, EmbedError> {
        if embs.len() < 2 {
            return Err(EmbedError::TooFewPoints(embs.len()));
        }
        if target_dim == 0 || target_dim >= embs.dim() {
            return Err(EmbedError::TargetDim {
                target: target_dim,
                dim: embs.dim(),
            });
        }
        let ids: Vec<&String> = embs.ids().collect();
        let rows = center(embs);
        let axes = principal_axes(&rows, embs.dim(), target_dim);
        let mut out = BTreeMap::new();
        for (id, row) in ids.into_iter().zip(&rows) {
            let projected = axes
                .iter()
                .map(|axis| match axis {
                    Some(v) => dot(row, v),
                    None => T::zero(),
                })
                .collect();
            out.insert(id.clone(), Embedding::new(projected));
        }
        EmbeddingSet::new(out)
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

fn center<T: Scalar>(embs: &EmbeddingSet<T>) -> Vec<Vec<T>> {
    let mean = Embedding::mean(embs.iter().map(|(_, e)| e)).expect("non-empty set");
    embs.iter()
        .map(|(_, e)| {
            e.values()
                .iter()
                .zip(mean.values())
                .map(|(v, m)| *v - *m)
                .collect()
        })
        .collect()
}

/// Unit principal axes in input space, strongest first; `None` marks a
/// component without variance.
fn principal_axes<T: Scalar>(rows: &[Vec<T>], dim: usize, k: usize) -> Vec<Option<Vec<T>>> {
    let n = rows.len();
    let (values, vectors, gram) = if n <= dim {
        // eigenvectors of X X^T, mapped back through X^T
        let g = symmetric_from(n, |i, j| dot(&rows[i], &rows[j]));
        let (vals, vecs) = jacobi_eigen(g);
        (vals, vecs, true)
    } else {
        let c = symmetric_from(dim, |i, j| rows.iter().map(|r| r[i] * r[j]).sum());
        let (vals, vecs) = jacobi_eigen(c);
        (vals, vecs, false)
    };
    let m = values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let largest = values.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    let floor = largest * T::epsilon() * T::of_usize(m.max(1) * 16);
    (0..k)
        .map(|c| {
            let idx = *order.get(c)?;
            let lambda = values[idx];
            if lambda <= floor || lambda <= T::zero() {
                return None;
            }
            let column: Vec<T> = (0..m).map(|r| vectors[r][idx]).collect();
            let mut axis = if gram {
                let scale = lambda.sqrt();
                (0..dim)
                    .map(|d| {
                        rows.iter()
                            .zip(&column)
                            .map(|(row, u)| row[d] * *u)
                            .sum::<T>()
                            / scale
                    })
                    .collect::<Vec<T>>()
            } else {
                column
            };
            let norm = dot(&axis, &axis).sqrt();
            if norm == T::zero() {
                return None;
            }
            axis.iter_mut().for_each(|v| *v /= norm);
            let pivot = axis
                .iter()
                .enumerate()
                .fold((0usize, T::zero()), |best, (i, v)| {
                    if v.abs() > best.1 {
                        (i, v.abs())
                    } else {
                        best
                    }
                })
                .0;
            if axis[pivot] < T::zero() {
                axis.iter_mut().for_each(|v| *v = -*v);
            }
            Some(axis)
        })
        .collect()
}

#[allow(clippy::needless_range_loop)]
fn symmetric_from<T: Scalar>(m: usize, f: impl Fn(usize, usize) -> T) -> Vec<Vec<T>> {
    let mut a = vec![vec![T::zero(); m]; m];
    for i in 0..m {
        for j in i..m {
            let v = f(i, j);
            a[i][j] = v;
            a[j][i] = v;
        }
    }
    a
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Returns the
/// eigenvalues and a matrix whose columns are the matching eigenvectors.
#[allow(clippy::needless_range_loop)]
pub(crate) fn jacobi_eigen<T: Scalar>(mut a: Vec<Vec<T>>) -> (Vec<T>, Vec<Vec<T>>) {
    let m = a.len();
    let mut v = vec![vec![T::zero(); m]; m];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = T::one();
    }
    let total: T = a.iter().flatten().map(|x| *x * *x).sum::<T>().sqrt();
    let tol = total * T::epsilon();
    for _sweep in 0..100 {
        let off: T = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<T>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                let apq = a[p][q];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (T::of(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..m).map(|i| a[i][i]).collect(), v)
}
