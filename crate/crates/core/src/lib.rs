//! Taxonomy induction for scientific paper collections.
//!
//! The build runs two initial paths over a corpus: a structural cluster tree
//! over paper embeddings ([`cluster`]) and a concept tree induced from
//! model-extracted terms ([`concept`]). Four fusion rounds ([`fusion`]) ground
//! the concepts in clusters, label the clusters, align titles vertically and
//! expand missing siblings; [`quality`] then scores, de-duplicates and
//! rebalances the result. [`metrics`] compares a taxonomy with a reference.

pub mod cluster;
pub mod concept;
pub mod corpus;
pub mod embedding;
pub mod fsutil;
pub mod fusion;
pub mod llm;
pub mod metrics;
pub mod parallel;
pub mod pipeline;
pub mod quality;
pub mod scalar;
pub mod taxonomy;
pub mod text;

pub use scalar::Scalar;

pub type Embedding32 = embedding::Embedding<f32>;
pub type Embedding64 = embedding::Embedding<f64>;
pub type EmbeddingSet32 = embedding::EmbeddingSet<f32>;
pub type EmbeddingSet64 = embedding::EmbeddingSet<f64>;
pub type ClusterNode32 = cluster::ClusterNode<f32>;
pub type ClusterNode64 = cluster::ClusterNode<f64>;
pub type FusionContext32<'a> = fusion::FusionContext<'a, f32>;
pub type FusionContext64<'a> = fusion::FusionContext<'a, f64>;
