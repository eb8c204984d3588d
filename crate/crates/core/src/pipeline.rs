//! End-to-end build: embed, cluster, concept path, fusion rounds, refinement.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::cluster::{build_cluster_tree, ClusterNode, ClusterParams};
use crate::concept::{
    concepts_to_jsonl, extract_concepts, induce_concept_tree, merge_and_filter, ConceptError,
    ConceptTree,
};
use crate::corpus::Corpus;
use crate::embedding::{
    embed_corpus, EmbedOptions, EmbeddingCache, EmbeddingSet, HashEmbedder, PcaReducer, Reducer,
};
use crate::fusion::{
    label_by_title_frequency, round1_validate, round2_label, round3_align, round4_expand,
    FusionContext, FusionError, FusionParams,
};
use crate::llm::{MockProvider, Provider, RemoteConfig, RemoteProvider, RuleSet};
use crate::quality::{
    check_structure, merge_redundant, score_and_prune, BuildProvenance, QualityError,
    QualityParams, StageTrace, Taxonomy,
};
use crate::taxonomy::TaxonomyNode;
use crate::text::sha256_hex;
use crate::Scalar;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: String, message: String },
}

impl PipelineError {
    fn stage(stage: &str, err: impl std::fmt::Display) -> Self {
        Self::Stage {
            stage: stage.to_string(),
            message: err.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedderConfig {
    /// Only "hash" is built in.
    pub name: String,
    pub dim: usize,
    /// Target dimension before clustering; 0 keeps the full vectors.
    pub reduce_dim: usize,
    pub cache_dir: Option<PathBuf>,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            name: "hash".into(),
            dim: 256,
            reduce_dim: 16,
            cache_dir: None,
        }
    }
}

/// Cluster settings; the seed comes from the top-level `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub max_depth: usize,
    pub min_split_size: usize,
    pub k_min: usize,
    pub k_max: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        let p = ClusterParams::default();
        Self {
            max_depth: p.max_depth,
            min_split_size: p.min_split_size,
            k_min: p.k_min,
            k_max: p.k_max,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConceptConfig {
    pub min_freq: usize,
    pub merge_sim: f64,
}

impl Default for ConceptConfig {
    fn default() -> Self {
        Self {
            min_freq: 2,
            merge_sim: 0.92,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProviderConfig {
    Mock {
        /// Directory of `<request digest>.txt` canned replies.
        #[serde(default)]
        fixtures: Option<PathBuf>,
        #[serde(default = "default_max_concepts")]
        max_concepts: usize,
    },
    Remote {
        #[serde(default)]
        base_url: Option<String>,
        #[serde(default)]
        model: Option<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
}

fn default_max_concepts() -> usize {
    RuleSet::default().max_concepts
}

fn default_timeout() -> u64 {
    60
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self::Mock {
            fixtures: None,
            max_concepts: default_max_concepts(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    /// Title-frequency labels on the cluster tree; no concept path, no rounds.
    pub bu_only: bool,
    /// Skip the alignment round.
    pub no_bi: bool,
    /// Skip the sibling expansion round.
    pub no_peer: bool,
    /// Skip scoring, redundancy merging and structure checks.
    pub no_refine: bool,
}

impl Ablation {
    /// Switch on one flag by its CLI name (`bu-only`, `no-bi`, ...).
    pub fn enable(&mut self, name: &str) -> Result<(), PipelineError> {
        match name.replace('_', "-").as_str() {
            "bu-only" => self.bu_only = true,
            "no-bi" => self.no_bi = true,
            "no-peer" => self.no_peer = true,
            "no-refine" => self.no_refine = true,
            other => return Err(PipelineError::Config(format!("unknown ablation {other:?}"))),
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildConfig {
    pub seed: u64,
    pub lang: String,
    pub parallelism: usize,
    pub embedder: EmbedderConfig,
    pub cluster: ClusterConfig,
    pub concept: ConceptConfig,
    pub fusion: FusionParams,
    pub quality: QualityParams,
    pub provider: ProviderConfig,
    pub ablation: Ablation,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            lang: "en".into(),
            parallelism: 4,
            embedder: EmbedderConfig::default(),
            cluster: ClusterConfig::default(),
            concept: ConceptConfig::default(),
            fusion: FusionParams::default(),
            quality: QualityParams::default(),
            provider: ProviderConfig::default(),
            ablation: Ablation::default(),
        }
    }
}

impl BuildConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(dir) = self.embedder.cache_dir.as_mut() {
            fix(dir);
        }
        if let ProviderConfig::Mock {
            fixtures: Some(dir),
            ..
        } = &mut self.provider
        {
            fix(dir);
        }
    }

    pub fn cluster_params(&self) -> ClusterParams {
        ClusterParams {
            max_depth: self.cluster.max_depth,
            min_split_size: self.cluster.min_split_size,
            k_min: self.cluster.k_min,
            k_max: self.cluster.k_max,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.lang.trim().is_empty() {
            return bad("lang must not be empty".into());
        }
        if self.parallelism == 0 {
            return bad("parallelism must be >= 1".into());
        }
        if self.embedder.name != "hash" {
            return bad(format!("unknown embedder {:?}", self.embedder.name));
        }
        if self.embedder.reduce_dim >= self.embedder.dim {
            return bad(format!(
                "reduce_dim {} must be below dim {}",
                self.embedder.reduce_dim, self.embedder.dim
            ));
        }
        if self.concept.min_freq < 1
            || !(self.concept.merge_sim > 0.0 && self.concept.merge_sim <= 1.0)
        {
            return bad("concept.min_freq must be >= 1 and merge_sim in (0, 1]".into());
        }
        if let ProviderConfig::Mock {
            max_concepts: 0, ..
        } = self.provider
        {
            return bad("provider.max_concepts must be >= 1".into());
        }
        self.cluster_params()
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        self.fusion
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        self.quality
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    /// SHA-256 of the config's canonical JSON form.
    pub fn digest(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes"))
    }

    pub fn embedder(&self) -> Result<HashEmbedder, PipelineError> {
        HashEmbedder::new(self.embedder.dim).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn provider(&self) -> Result<Arc<dyn Provider>, PipelineError> {
        Ok(match &self.provider {
            ProviderConfig::Mock {
                fixtures,
                max_concepts,
            } => Arc::new(MockProvider::new(
                fixtures.clone(),
                RuleSet {
                    max_concepts: *max_concepts,
                },
            )),
            ProviderConfig::Remote {
                base_url,
                model,
                timeout_secs,
            } => {
                let rc = RemoteConfig::resolve(
                    base_url.as_deref(),
                    model.as_deref(),
                    Duration::from_secs(*timeout_secs),
                )
                .map_err(PipelineError::Config)?;
                Arc::new(RemoteProvider::new(rc))
            }
        })
    }
}

/// Receives each stage's name and serialized output as it completes.
pub type StageSink<'a> = &'a mut dyn FnMut(&str, &str);

struct Tracer<'a> {
    last: String,
    stages: Vec<StageTrace>,
    sink: StageSink<'a>,
    started: Instant,
}

impl Tracer<'_> {
    fn start(&mut self) {
        self.started = Instant::now();
    }

    fn record(&mut self, stage: &str, doc: &str) {
        let out = sha256_hex(doc);
        self.stages.push(StageTrace {
            stage: stage.to_string(),
            input_digest: std::mem::replace(&mut self.last, out.clone()),
            output_digest: out,
            duration_ms: self.started.elapsed().as_millis() as u64,
        });
        log::debug!("stage {stage} done");
        (self.sink)(stage, doc);
    }
}

fn embeddings_doc<T: Scalar>(set: &EmbeddingSet<T>) -> String {
    let map: BTreeMap<&String, Vec<f64>> = set
        .iter()
        .map(|(id, e)| {
            (
                id,
                e.values()
                    .iter()
                    .map(|v| v.to_f64().unwrap_or(f64::NAN))
                    .collect(),
            )
        })
        .collect();
    serde_json::to_string(&map).expect("embeddings serialize")
}

fn concept_tree_doc(tree: &ConceptTree) -> String {
    let edges: Vec<_> = tree
        .concepts()
        .iter()
        .map(|c| json!({"concept": c, "parent": tree.parent(c)}))
        .collect();
    json!({"root": tree.root, "concepts": edges}).to_string()
}

/// Run every stage on `corpus` and return the refined taxonomy with its
/// stage trace. `sink` sees each intermediate result.
pub fn run_build<T: Scalar>(
    corpus: &Corpus,
    config: &BuildConfig,
    gateway: &crate::llm::Gateway,
    sink: StageSink<'_>,
) -> Result<Taxonomy, PipelineError> {
    config.validate()?;
    let embedder = config.embedder()?;
    let cache = config.embedder.cache_dir.as_ref().map(EmbeddingCache::new);
    let mut tr = Tracer {
        last: sha256_hex(corpus.to_jsonl()),
        stages: Vec::new(),
        sink,
        started: Instant::now(),
    };

    tr.start();
    let opts = EmbedOptions {
        cache: cache.as_ref(),
        parallelism: config.parallelism,
        ..EmbedOptions::default()
    };
    let full: EmbeddingSet<T> =
        embed_corpus(&embedder, corpus, &opts).map_err(|e| PipelineError::stage("embed", e))?;
    tr.record("embed", &embeddings_doc(&full));

    tr.start();
    let reduced = if config.embedder.reduce_dim == 0 {
        full.clone()
    } else {
        PcaReducer
            .reduce(&full, config.embedder.reduce_dim, config.seed)
            .map_err(|e| PipelineError::stage("reduce", e))?
    };
    tr.record("reduce", &embeddings_doc(&reduced));

    tr.start();
    let params = config.cluster_params();
    let tree: ClusterNode<T> =
        build_cluster_tree(&reduced, &params).map_err(|e| PipelineError::stage("cluster", e))?;
    tr.record("cluster", &tree.to_taxonomy().to_json());

    let ctx = FusionContext {
        corpus,
        gateway,
        embedder: &embedder,
        paper_embs: &full,
        lang: &config.lang,
    };
    let ab = &config.ablation;
    let mut tax = if ab.bu_only {
        tr.start();
        let t = label_by_title_frequency(&tree, corpus);
        tr.record("title_frequency_label", &t.to_json());
        t
    } else {
        concept_path(&ctx, config, &tree, &reduced, &params, &mut tr)?
    };

    if !ab.no_refine {
        tr.start();
        tax.assign_path_ids();
        tax = score_and_prune(
            &tax,
            corpus,
            gateway,
            config.quality.score_threshold,
            &config.lang,
            config.parallelism,
        );
        tr.record("score", &tax.to_json());

        tr.start();
        tax = merge_redundant(
            &tax,
            &embedder,
            gateway,
            config.quality.tau_red,
            &config.lang,
        )
        .map_err(|e: QualityError| PipelineError::stage("redundancy", e))?;
        tr.record("redundancy", &tax.to_json());

        tr.start();
        tax = check_structure(&tax, &config.quality);
        tr.record("structure", &tax.to_json());
    }
    tax.assign_path_ids();

    Ok(Taxonomy {
        root: tax,
        provenance: BuildProvenance {
            config_digest: config.digest(),
            provider: gateway.provider_name().to_string(),
            seed: config.seed,
            stages: tr.stages,
        },
    })
}

fn concept_path<T: Scalar>(
    ctx: &FusionContext<'_, T>,
    config: &BuildConfig,
    tree: &ClusterNode<T>,
    reduced: &EmbeddingSet<T>,
    params: &ClusterParams,
    tr: &mut Tracer<'_>,
) -> Result<TaxonomyNode, PipelineError> {
    let fusion_err = |stage: &'static str| move |e: FusionError| PipelineError::stage(stage, e);
    let concept_err = |stage: &'static str| move |e: ConceptError| PipelineError::stage(stage, e);

    tr.start();
    let raw = extract_concepts(ctx.corpus, ctx.gateway, config.parallelism)
        .map_err(concept_err("extract_concepts"))?;
    tr.record("extract_concepts", &concepts_to_jsonl(&raw));

    tr.start();
    let merged = merge_and_filter(
        &raw,
        ctx.embedder,
        config.concept.min_freq,
        config.concept.merge_sim,
    )
    .map_err(concept_err("merge_filter"))?;
    tr.record("merge_filter", &concepts_to_jsonl(&merged));

    tr.start();
    let ctree = if merged.is_empty() {
        log::warn!("no concepts survived merging; labels fall back to paper titles");
        ConceptTree::flat(None, Vec::new())
    } else {
        induce_concept_tree(&merged, ctx.gateway, &config.lang)
            .map_err(concept_err("induce_hierarchy"))?
    };
    tr.record("induce_hierarchy", &concept_tree_doc(&ctree));

    tr.start();
    let f = &config.fusion;
    let (valid, support) = round1_validate(&merged, tree, f.tau_conc, f.min_support);
    let doc = json!({
        "retained": valid.iter().map(|c| &c.surface).collect::<Vec<_>>(),
        "support": support,
    });
    tr.record("round1", &doc.to_string());

    tr.start();
    let r2 = round2_label(ctx, tree, &valid, &support, Some(&ctree), reduced, params)
        .map_err(fusion_err("round2"))?;
    tr.record("round2", &r2.taxonomy.to_json());
    let mut tax = r2.taxonomy;

    if !config.ablation.no_bi {
        tr.start();
        tax = round3_align(ctx, &tax, f.tau_align).map_err(fusion_err("round3"))?;
        tr.record("round3", &tax.to_json());
    }
    if !config.ablation.no_peer {
        tr.start();
        tax = round4_expand(ctx, &tax, f.min_claim, f.tau_claim).map_err(fusion_err("round4"))?;
        tr.record("round4", &tax.to_json());
    }
    Ok(tax)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synth_corpus, SynthSpec};
    use crate::llm::Gateway;

    fn synth() -> Corpus {
        synth_corpus(&SynthSpec {
            depth: 2,
            branching: 2,
            papers_per_leaf: 5,
            seed: 7,
        })
        .unwrap()
        .0
    }

    fn build(config: &BuildConfig) -> (Taxonomy, Vec<String>) {
        let gw = Gateway::new(config.provider().unwrap());
        let mut names = Vec::new();
        let t =
            run_build::<f64>(&synth(), config, &gw, &mut |s, _| names.push(s.to_string())).unwrap();
        (t, names)
    }

    #[test]
    fn config_defaults_and_unknown_keys() {
        let c = BuildConfig::from_toml("seed = 3\n[fusion]\ntau_conc = 0.6\n").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.fusion.tau_conc, 0.6);
        assert_eq!(c.embedder, EmbedderConfig::default());
        assert!(BuildConfig::from_toml("sede = 3").is_err());
        assert!(BuildConfig::from_toml("[fusion]\ntau = 1").is_err());
        assert!(BuildConfig::from_toml("[embedder]\ndim = 8\nreduce_dim = 8").is_err());
        let r = BuildConfig::from_toml("[provider]\nkind = \"remote\"\nmodel = \"m\"\n").unwrap();
        assert!(matches!(
            r.provider,
            ProviderConfig::Remote {
                timeout_secs: 60,
                ..
            }
        ));
    }

    #[test]
    fn digest_tracks_every_field() {
        let a = BuildConfig::default();
        let mut b = a.clone();
        b.ablation.enable("no-bi").unwrap();
        assert_ne!(a.digest(), b.digest());
        assert!(b.ablation.enable("nope").is_err());
    }

    #[test]
    fn stage_order_and_digest_chain() {
        let (t, names) = build(&BuildConfig::default());
        let expected = [
            "embed",
            "reduce",
            "cluster",
            "extract_concepts",
            "merge_filter",
            "induce_hierarchy",
            "round1",
            "round2",
            "round3",
            "round4",
            "score",
            "redundancy",
            "structure",
        ];
        assert_eq!(names, expected);
        let stages = &t.provenance.stages;
        assert_eq!(
            stages.iter().map(|s| s.stage.as_str()).collect::<Vec<_>>(),
            expected
        );
        for w in stages.windows(2) {
            assert_eq!(w[1].input_digest, w[0].output_digest);
        }
        assert_eq!(t.provenance.provider, "mock");
        assert!(t.violations(&QualityParams::default()).is_empty());
    }

    #[test]
    fn ablations_drop_their_stages() {
        let mut c = BuildConfig::default();
        c.ablation.no_bi = true;
        c.ablation.no_refine = true;
        let (_, names) = build(&c);
        assert!(!names.contains(&"round3".to_string()));
        assert!(!names.contains(&"score".to_string()));
        assert!(names.contains(&"round4".to_string()));
        let mut c = BuildConfig::default();
        c.ablation.bu_only = true;
        let (t, names) = build(&c);
        assert_eq!(names[3], "title_frequency_label");
        assert!(!names.iter().any(|n| n.starts_with("round")));
        assert_eq!(t.root.subtree_papers().len(), 20);
    }

    #[test]
    fn repeated_builds_match() {
        let (a, _) = build(&BuildConfig::default());
        let (b, _) = build(&BuildConfig::default());
        assert_eq!(a.root.to_json(), b.root.to_json());
        let digests = |t: &Taxonomy| {
            t.provenance
                .stages
                .iter()
                .map(|s| s.output_digest.clone())
                .collect::<Vec<_>>()
        };
        assert_eq!(digests(&a), digests(&b));
    }
}
