mod common;

use std::fs;

use serde_json::Value;
use taxo_core::corpus::{save_corpus, Corpus, Paper};
use taxo_core::taxonomy::{write_taxonomy, TaxonomyNode};

use common::*;

fn stage_names(prov: &std::path::Path) -> Vec<String> {
    let v: Value = serde_json::from_str(&fs::read_to_string(prov).unwrap()).unwrap();
    v["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["stage"].as_str().unwrap().to_string())
        .collect()
}

#[test]
fn synth_writes_corpus_and_gold_deterministically() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ca, ga) = synth(a.path(), 2, 2, 3, 5);
    let (cb, gb) = synth(b.path(), 2, 2, 3, 5);
    assert_eq!(fs::read_to_string(&ca).unwrap().lines().count(), 12);
    assert_eq!(fs::read(&ca).unwrap(), fs::read(&cb).unwrap());
    assert_eq!(fs::read(&ga).unwrap(), fs::read(&gb).unwrap());
    let bad = taxo(&[
        "synth",
        "--depth",
        "0",
        "--branching",
        "2",
        "--per-leaf",
        "3",
        "--out",
        s(a.path()),
    ]);
    assert!(!bad.status.success());
}

#[test]
fn build_writes_taxonomy_trace_and_audit() {
    let d = tempfile::tempdir().unwrap();
    let (corpus, _) = synth(d.path(), 2, 2, 4, 3);
    let out = d.path().join("tax.json");
    ok(&taxo(&["build", "--corpus", s(&corpus), "--out", s(&out)]));
    let prov = d.path().join("tax.json.provenance.json");
    let v: Value = serde_json::from_str(&fs::read_to_string(&prov).unwrap()).unwrap();
    let stages = v["stages"].as_array().unwrap();
    for w in stages.windows(2) {
        assert_eq!(w[1]["input_digest"], w[0]["output_digest"]);
    }
    assert_eq!(v["provider"], "mock");
    assert!(
        fs::metadata(d.path().join("tax.json.audit.jsonl"))
            .unwrap()
            .len()
            > 0
    );
}

#[test]
fn each_ablation_removes_only_its_stages() {
    let d = tempfile::tempdir().unwrap();
    let (corpus, _) = synth(d.path(), 2, 2, 4, 3);
    let run = |flag: Option<&str>| {
        let out = d.path().join(format!("{}.json", flag.unwrap_or("full")));
        let mut args = vec!["build", "--corpus", s(&corpus), "--out", s(&out)];
        if let Some(f) = flag {
            args.extend(["--ablate", f]);
        }
        ok(&taxo(&args));
        stage_names(
            &d.path()
                .join(format!("{}.json.provenance.json", flag.unwrap_or("full"))),
        )
    };
    let full = run(None);
    let without = |gone: &[&str]| {
        full.iter()
            .filter(|s| !gone.contains(&s.as_str()))
            .cloned()
            .collect::<Vec<_>>()
    };
    assert_eq!(run(Some("no_bi")), without(&["round3"]));
    assert_eq!(run(Some("no_peer")), without(&["round4"]));
    assert_eq!(
        run(Some("no_refine")),
        without(&["score", "redundancy", "structure"])
    );
    let concept_and_rounds = [
        "extract_concepts",
        "merge_filter",
        "induce_hierarchy",
        "round1",
        "round2",
        "round3",
        "round4",
    ];
    let mut bu = without(&concept_and_rounds);
    bu.insert(3, "title_frequency_label".into());
    assert_eq!(run(Some("bu_only")), bu);
}

#[test]
fn failed_build_keeps_partial_intermediates() {
    let d = tempfile::tempdir().unwrap();
    let corpus = Corpus::new(
        vec![Paper::new("p1", "Lonely paper", "Only one here.")],
        "one",
    )
    .unwrap();
    let path = d.path().join("corpus.jsonl");
    save_corpus(&path, &corpus).unwrap();
    let out = d.path().join("tax.json");
    let r = taxo(&["build", "--corpus", s(&path), "--out", s(&out)]);
    assert!(!r.status.success());
    assert!(!out.exists());
    assert!(d
        .path()
        .join("tax.json.partial")
        .join("01_embed.json")
        .exists());
}

#[test]
fn bad_config_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    let (corpus, _) = synth(d.path(), 1, 2, 3, 1);
    let cfg = d.path().join("c.toml");
    fs::write(&cfg, "[fusion]\ntau_conc = 1.5\n").unwrap();
    let out = d.path().join("t.json");
    assert!(!taxo(&[
        "build",
        "--corpus",
        s(&corpus),
        "--config",
        s(&cfg),
        "--out",
        s(&out)
    ])
    .status
    .success());
    assert!(!taxo(&[
        "build",
        "--corpus",
        s(&corpus),
        "--ablate",
        "no_such",
        "--out",
        s(&out)
    ])
    .status
    .success());
}

#[test]
fn eval_identity_and_flat_prediction() {
    let d = tempfile::tempdir().unwrap();
    let corpus = Corpus::new(
        vec![
            Paper::new("p1", "a", ""),
            Paper::new("p2", "b", ""),
            Paper::new("p3", "c", ""),
        ],
        "three",
    )
    .unwrap();
    let cpath = d.path().join("corpus.jsonl");
    save_corpus(&cpath, &corpus).unwrap();
    let gold = TaxonomyNode::new("", "root").with_children(vec![
        TaxonomyNode::new("", "A").with_papers(["p1", "p2"]),
        TaxonomyNode::new("", "B").with_papers(["p3"]),
    ]);
    let gpath = d.path().join("gold.json");
    write_taxonomy(&gpath, &gold).unwrap();
    let report = d.path().join("report.json");
    let line = ok(&taxo(&[
        "eval",
        "--pred",
        s(&gpath),
        "--gold",
        s(&gpath),
        "--corpus",
        s(&cpath),
        "--report",
        s(&report),
    ]));
    assert_eq!(line.trim(), "NMI=100.0 Purity=100.0 CEDS=100.0 HSR=100.0");
    let r: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["hsr"].as_f64(), Some(100.0));

    let flat = TaxonomyNode::new("", "root").with_papers(["p1", "p2", "p3"]);
    let fpath = d.path().join("flat.json");
    write_taxonomy(&fpath, &flat).unwrap();
    let line = ok(&taxo(&[
        "eval",
        "--pred",
        s(&fpath),
        "--gold",
        s(&gpath),
        "--corpus",
        s(&cpath),
    ]));
    assert!(line.contains("HSR=66.7"), "{line}");

    let missing = d.path().join("nope.json");
    let r = taxo(&[
        "eval",
        "--pred",
        s(&fpath),
        "--gold",
        s(&missing),
        "--corpus",
        s(&cpath),
    ]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("nope.json"));
}

#[test]
fn render_formats() {
    let d = tempfile::tempdir().unwrap();
    let t = TaxonomyNode::new("", "root").with_children(vec![
        TaxonomyNode::new("", "b").with_papers(["p2"]),
        TaxonomyNode::new("", "a").with_papers(["p1"]),
    ]);
    let p = d.path().join("t.json");
    write_taxonomy(&p, &t).unwrap();
    let md = ok(&taxo(&["render", "--in", s(&p), "--format", "md"]));
    assert_eq!(
        md,
        "- root (2 papers)\n  - a (1 papers)\n  - b (1 papers)\n"
    );
    assert_eq!(md, ok(&taxo(&["render", "--in", s(&p), "--format", "md"])));
    let dot = ok(&taxo(&["render", "--in", s(&p), "--format", "dot"]));
    assert_eq!(dot.matches("[label=").count(), 3);
    assert!(!taxo(&["render", "--in", s(&p), "--format", "svg"])
        .status
        .success());
}

#[test]
fn audit_log_replays_as_fixtures() {
    let d = tempfile::tempdir().unwrap();
    let (corpus, _) = synth(d.path(), 1, 2, 3, 2);
    let out = d.path().join("t.json");
    ok(&taxo(&["build", "--corpus", s(&corpus), "--out", s(&out)]));
    let fx = d.path().join("fx");
    let audit = d.path().join("t.json.audit.jsonl");
    let msg = ok(&taxo(&["fixtures", "--audit", s(&audit), "--out", s(&fx)]));
    assert!(msg.contains("fixtures written"));
    let cfg = d.path().join("c.toml");
    fs::write(&cfg, "[provider]\nkind = \"mock\"\nfixtures = \"fx\"\n").unwrap();
    let replay = d.path().join("r.json");
    ok(&taxo(&[
        "build",
        "--corpus",
        s(&corpus),
        "--config",
        s(&cfg),
        "--out",
        s(&replay),
    ]));
    assert_eq!(fs::read(&out).unwrap(), fs::read(&replay).unwrap());
}

#[test]
fn example_config_matches_defaults() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../taxo.example.toml");
    let cfg = taxo_core::pipeline::BuildConfig::load(&path).unwrap();
    assert_eq!(cfg, taxo_core::pipeline::BuildConfig::default());
}
