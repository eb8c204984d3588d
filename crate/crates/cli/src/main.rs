use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use taxo_core::corpus::{load_corpus, load_gold, save_corpus, save_gold, synth_corpus, SynthSpec};
use taxo_core::embedding::HashEmbedder;
use taxo_core::fsutil::write_atomic;
use taxo_core::llm::{fixtures_from_audit, AuditLog, Gateway};
use taxo_core::metrics::{evaluate, EvalParams};
use taxo_core::pipeline::{run_build, BuildConfig};
use taxo_core::taxonomy::{read_taxonomy, write_taxonomy};

mod render;

#[derive(Parser)]
#[command(
    name = "taxo",
    version,
    about = "Build and evaluate topic taxonomies over paper corpora"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a taxonomy from a corpus.
    Build(BuildArgs),
    /// Score a predicted taxonomy against a gold one.
    Eval(EvalArgs),
    /// Print a taxonomy as markdown or graphviz dot.
    Render(RenderArgs),
    /// Generate a synthetic corpus with its planted gold taxonomy.
    Synth(SynthArgs),
    /// Turn a build's audit log into mock fixtures.
    Fixtures(FixturesArgs),
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// TOML config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// bu_only, no_bi, no_peer or no_refine; repeatable.
    #[arg(long)]
    ablate: Vec<String>,
    /// Also write every intermediate result here.
    #[arg(long)]
    dump_stages: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 0.85)]
    tau_sub: f64,
    /// Graded (1 - cosine) substitution costs.
    #[arg(long)]
    graded: bool,
    #[arg(long, default_value_t = 256)]
    dim: usize,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum)]
    format: render::Format,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    depth: usize,
    #[arg(long)]
    branching: usize,
    #[arg(long)]
    per_leaf: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FixturesArgs {
    #[arg(long)]
    audit: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn stage_file(i: usize, stage: &str) -> String {
    let ext = if stage == "extract_concepts" || stage == "merge_filter" {
        "jsonl"
    } else {
        "json"
    };
    format!("{:02}_{stage}.{ext}", i + 1)
}

fn write_stages(dir: &Path, stages: &[(String, String)]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (i, (stage, doc)) in stages.iter().enumerate() {
        write_atomic(&dir.join(stage_file(i, stage)), doc.as_bytes())?;
    }
    Ok(())
}

fn cmd_build(a: BuildArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let mut config = match &a.config {
        Some(p) => BuildConfig::load(p)?,
        None => BuildConfig::default(),
    };
    for flag in &a.ablate {
        config.ablation.enable(flag)?;
    }
    let audit_path = sibling(&a.out, ".audit.jsonl");
    let gateway = Gateway::new(config.provider()?).with_audit(AuditLog::create(&audit_path)?);
    let mut stages: Vec<(String, String)> = Vec::new();
    let result = run_build::<f64>(&corpus, &config, &gateway, &mut |s, doc| {
        stages.push((s.to_string(), doc.to_string()))
    });
    if let Some(dir) = &a.dump_stages {
        write_stages(dir, &stages)?;
    }
    let tax = match result {
        Ok(t) => t,
        Err(e) => {
            let partial = sibling(&a.out, ".partial");
            write_stages(&partial, &stages)?;
            return Err(e).context(format!(
                "build failed; intermediates kept in {}",
                partial.display()
            ));
        }
    };
    let violations = tax.violations(&config.quality);
    if !config.ablation.no_refine && !violations.is_empty() {
        bail!(
            "built taxonomy violates invariants: {}",
            violations.join("; ")
        );
    }
    write_taxonomy(&a.out, &tax.root).with_context(|| format!("writing {}", a.out.display()))?;
    let prov = serde_json::to_string_pretty(&tax.provenance)?;
    write_atomic(&sibling(&a.out, ".provenance.json"), prov.as_bytes())?;
    log::info!(
        "wrote {} ({} nodes)",
        a.out.display(),
        tax.root.node_count()
    );
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let pred = read_taxonomy(&a.pred)?;
    let gold =
        load_gold(&a.gold, &corpus).with_context(|| format!("gold file {}", a.gold.display()))?;
    let embedder = HashEmbedder::new(a.dim)?;
    let params = EvalParams {
        tau_sub: a.tau_sub,
        graded: a.graded,
        ..EvalParams::default()
    };
    let report = evaluate(&pred, &gold.root, &embedder, &params)?;
    if let Some(path) = &a.report {
        let doc = serde_json::to_string_pretty(&report.to_json())?;
        write_atomic(path, doc.as_bytes())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "NMI={:.1} Purity={:.1} CEDS={:.1} HSR={:.1}",
        report.nmi * 100.0,
        report.purity * 100.0,
        report.ceds * 100.0,
        report.hsr * 100.0
    );
    Ok(())
}

fn cmd_render(a: RenderArgs) -> Result<()> {
    let tax = read_taxonomy(&a.input)?;
    print!("{}", render::render(&tax, a.format));
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        depth: a.depth,
        branching: a.branching,
        papers_per_leaf: a.per_leaf,
        seed: a.seed,
    };
    let (corpus, gold) = synth_corpus(&spec)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    save_corpus(&a.out.join("corpus.jsonl"), &corpus)?;
    save_gold(&a.out.join("gold.json"), &gold)?;
    Ok(())
}

fn cmd_fixtures(a: FixturesArgs) -> Result<()> {
    let n = fixtures_from_audit(&a.audit, &a.out)?;
    println!("{n} fixtures written to {}", a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Build(a) => cmd_build(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Render(a) => cmd_render(a),
        Cmd::Synth(a) => cmd_synth(a),
        Cmd::Fixtures(a) => cmd_fixtures(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
