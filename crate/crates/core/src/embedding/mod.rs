//! Dense text representations and similarity.
//!
//! [`HashEmbedder`] is the offline encoder: signed feature hashing of
//! lowercase alphanumeric tokens followed by L2 normalization. Any other
//! encoder plugs in through [`Embedder`]; corpus embeddings go through an
//! on-disk content-addressed cache so reruns are reproducible.

mod cache;
mod reduce;

use std::collections::BTreeMap;
use std::sync::Arc;

pub use cache::EmbeddingCache;
pub(crate) use reduce::jacobi_eigen;
pub use reduce::{PcaReducer, Reducer};

use crate::corpus::Corpus;
use crate::parallel::map_bounded;
use crate::scalar::Scalar;
use crate::text::{sha256_hex, tokens};

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("embedding backend failed for paper {paper}: {message}")]
    Backend { paper: String, message: String },
    #[error("non-finite value in embedding of {0}")]
    NonFinite(String),
    #[error("cannot embed an empty corpus")]
    EmptyCorpus,
    #[error("reduction needs at least 2 papers, got {0}")]
    TooFewPoints(usize),
    #[error("target dimension {target} must be below the input dimension {dim}")]
    TargetDim { target: usize, dim: usize },
    #[error("hash embedding dimension must be >= 8, got {0}")]
    HashDim(usize),
    #[error("embedding cache error: {0}")]
    Cache(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Embedding<T = f64> {
    values: Vec<T>,
}

impl<T: Scalar> Embedding<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(vec![T::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn norm(&self) -> T {
        self.values.iter().map(|v| *v * *v).sum::<T>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Embedding<U> {
        Embedding::new(self.values.iter().map(|v| U::of(v.as_f64())).collect())
    }

    pub fn distance(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (*a - *b) * (*a - *b))
            .sum::<T>()
            .sqrt()
    }

    /// Arithmetic mean; `None` for an empty iterator.
    pub fn mean<'a>(items: impl IntoIterator<Item = &'a Embedding<T>>) -> Option<Embedding<T>> {
        let mut iter = items.into_iter();
        let first = iter.next()?;
        let mut acc = first.values.clone();
        let mut n = 1usize;
        for e in iter {
            for (a, v) in acc.iter_mut().zip(&e.values) {
                *a += *v;
            }
            n += 1;
        }
        let n = T::of_usize(n);
        Some(Embedding::new(acc.into_iter().map(|a| a / n).collect()))
    }
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine<T: Scalar>(a: &Embedding<T>, b: &Embedding<T>) -> Result<T, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == T::zero() || nb == T::zero() {
        return Ok(T::zero());
    }
    let dot: T = a.values.iter().zip(&b.values).map(|(x, y)| *x * *y).sum();
    Ok((dot / (na * nb)).max(-T::one()).min(T::one()))
}

/// Paper-id keyed embeddings sharing one dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet<T = f64> {
    by_id: BTreeMap<String, Embedding<T>>,
    dim: usize,
}

impl<T: Scalar> EmbeddingSet<T> {
    pub fn new(by_id: BTreeMap<String, Embedding<T>>) -> Result<Self, EmbedError> {
        let dim = by_id.values().next().map(Embedding::dim).unwrap_or(0);
        for (id, e) in &by_id {
            if e.dim() != dim {
                return Err(EmbedError::DimMismatch {
                    left: dim,
                    right: e.dim(),
                });
            }
            if !e.is_finite() {
                return Err(EmbedError::NonFinite(id.clone()));
            }
        }
        Ok(Self { by_id, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Embedding<T>> {
        self.by_id.get(id)
    }

    /// Entries in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (&String, &Embedding<T>)> {
        self.by_id.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = &String> {
        self.by_id.keys()
    }

    pub fn centroid<'a>(&self, ids: impl IntoIterator<Item = &'a String>) -> Option<Embedding<T>> {
        Embedding::mean(ids.into_iter().filter_map(|id| self.by_id.get(id)))
    }
}

/// Text encoder. Implementations must be deterministic: identical text gives
/// an identical vector.
pub trait Embedder: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, String>;
}

impl<E: Embedder + ?Sized> Embedder for Arc<E> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn embed(&self, text: &str) -> Result<Vec<f64>, String> {
        (**self).embed(text)
    }
}

impl<E: Embedder + ?Sized> Embedder for &E {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn embed(&self, text: &str) -> Result<Vec<f64>, String> {
        (**self).embed(text)
    }
}

/// Embed a short text (title, concept) directly, without caching.
pub fn embed_text<T: Scalar>(
    embedder: &dyn Embedder,
    text: &str,
) -> Result<Embedding<T>, EmbedError> {
    let raw = embedder
        .embed(text)
        .map_err(|message| EmbedError::Backend {
            paper: text.to_string(),
            message,
        })?;
    if raw.len() != embedder.dim() {
        return Err(EmbedError::DimMismatch {
            left: embedder.dim(),
            right: raw.len(),
        });
    }
    Ok(Embedding::new(raw.into_iter().map(T::of).collect()))
}

fn bucket_hash(token: &str, salt: u8) -> u64 {
    // FNV-1a with a salt byte, finished with the splitmix64 mixer
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in std::iter::once(salt).chain(token.bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Bucket index and sign for a token.
pub fn hash_slot(token: &str, dim: usize) -> (usize, f64) {
    let bucket = (bucket_hash(token, 0) % dim as u64) as usize;
    let sign = if bucket_hash(token, 1) & 1 == 0 {
        1.0
    } else {
        -1.0
    };
    (bucket, sign)
}

/// Signed bag-of-tokens feature hashing, L2-normalized. Text without tokens
/// maps to the zero vector.
pub fn hash_embed<T: Scalar>(text: &str, dim: usize) -> Result<Embedding<T>, EmbedError> {
    if dim < 8 {
        return Err(EmbedError::HashDim(dim));
    }
    let mut acc = vec![0.0f64; dim];
    for tok in tokens(text) {
        let (bucket, sign) = hash_slot(&tok, dim);
        acc[bucket] += sign;
    }
    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        acc.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(Embedding::new(acc.into_iter().map(T::of).collect()))
}

#[derive(Clone, Debug)]
pub struct HashEmbedder {
    dim: usize,
    name: String,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Result<Self, EmbedError> {
        if dim < 8 {
            return Err(EmbedError::HashDim(dim));
        }
        Ok(Self {
            dim,
            name: format!("hash{dim}"),
        })
    }
}

impl Embedder for HashEmbedder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, String> {
        hash_embed::<f64>(text, self.dim)
            .map(Embedding::into_values)
            .map_err(|e| e.to_string())
    }
}

/// Options for [`embed_corpus`].
#[derive(Clone, Debug)]
pub struct EmbedOptions<'a> {
    pub cache: Option<&'a EmbeddingCache>,
    pub parallelism: usize,
    pub attempts: usize,
}

impl Default for EmbedOptions<'_> {
    fn default() -> Self {
        Self {
            cache: None,
            parallelism: 4,
            attempts: 3,
        }
    }
}

/// One vector per paper for `title + "\n" + abstract`.
///
/// Values pass through `f32` whether or not they come from the cache, so a
/// cache hit and a fresh computation produce identical sets.
pub fn embed_corpus<T: Scalar>(
    embedder: &dyn Embedder,
    corpus: &Corpus,
    opts: &EmbedOptions<'_>,
) -> Result<EmbeddingSet<T>, EmbedError> {
    if corpus.is_empty() {
        return Err(EmbedError::EmptyCorpus);
    }
    let results = map_bounded(corpus.papers(), opts.parallelism, |paper| {
        let text = paper.embedding_text();
        let digest = sha256_hex(text.as_bytes());
        if let Some(cache) = opts.cache {
            if let Some(hit) = cache.get(embedder.name(), &digest) {
                return Ok(hit);
            }
        }
        let mut last = String::new();
        for _ in 0..opts.attempts.max(1) {
            match embedder.embed(&text) {
                Ok(v) => {
                    let v: Vec<f32> = v.into_iter().map(|x| x as f32).collect();
                    if let Some(cache) = opts.cache {
                        cache
                            .put(embedder.name(), &digest, &v)
                            .map_err(|e| EmbedError::Cache(e.to_string()))?;
                    }
                    return Ok(v);
                }
                Err(e) => last = e,
            }
        }
        Err(EmbedError::Backend {
            paper: paper.id.clone(),
            message: last,
        })
    });
    let mut by_id = BTreeMap::new();
    for (paper, res) in corpus.papers().iter().zip(results) {
        let v = res?;
        if v.len() != embedder.dim() {
            return Err(EmbedError::DimMismatch {
                left: embedder.dim(),
                right: v.len(),
            });
        }
        by_id.insert(
            paper.id.clone(),
            Embedding::new(v.into_iter().map(|x| T::of(f64::from(x))).collect()),
        );
    }
    EmbeddingSet::new(by_id)
}
