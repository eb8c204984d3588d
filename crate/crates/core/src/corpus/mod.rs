//! Paper corpora and gold taxonomies.
//!
//! Corpora are line-delimited JSON records
//! `{"id": .., "title": .., "abstract": .., "lang": ..}`; gold trees use the
//! taxonomy document schema from [`crate::taxonomy`].

mod synth;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use synth::{synth_corpus, SynthSpec, SYNTH_ROOT_LABEL};

use crate::fsutil;
use crate::taxonomy::{NodeDoc, TaxonomyNode};
use crate::text::normalize_title;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paper {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    #[serde(default = "default_lang")]
    pub lang: String,
}

fn default_lang() -> String {
    "en".to_string()
}

impl Paper {
    pub fn new(
        id: impl Into<String>,
        title: impl Into<String>,
        abstract_text: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
            abstract_text: abstract_text.into(),
            lang: default_lang(),
        }
    }

    /// Text handed to embedders: title and abstract joined by a newline.
    pub fn embedding_text(&self) -> String {
        format!("{}\n{}", self.title, self.abstract_text)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record on line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate paper id {0:?}")]
    DuplicateId(String),
    #[error("paper {0:?} has an empty title")]
    EmptyTitle(String),
    #[error("invalid taxonomy document {path}: {message}")]
    TaxonomySchema { path: String, message: String },
    #[error("taxonomy references paper {0:?} which is not in the corpus")]
    UnknownPaper(String),
    #[error("paper {paper:?} is assigned to more than one node ({first} and {second})")]
    MultipleAssignment {
        paper: String,
        first: String,
        second: String,
    },
    #[error("cycle: node {0:?} appears as its own descendant")]
    Cycle(String),
    #[error("invalid synthetic corpus spec: {0}")]
    InvalidSynthSpec(String),
}

/// Ordered, id-unique paper collection.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    papers: Vec<Paper>,
    pub source: String,
}

impl Corpus {
    /// Validates id uniqueness and non-empty titles.
    pub fn new(papers: Vec<Paper>, source: impl Into<String>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for p in &papers {
            if p.title.trim().is_empty() {
                return Err(CorpusError::EmptyTitle(p.id.clone()));
            }
            if !seen.insert(p.id.as_str()) {
                return Err(CorpusError::DuplicateId(p.id.clone()));
            }
        }
        Ok(Self {
            papers,
            source: source.into(),
        })
    }

    pub fn papers(&self) -> &[Paper] {
        &self.papers
    }

    pub fn len(&self) -> usize {
        self.papers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Paper> {
        self.papers.iter().find(|p| p.id == id)
    }

    pub fn index(&self) -> BTreeMap<&str, &Paper> {
        self.papers.iter().map(|p| (p.id.as_str(), p)).collect()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.papers.iter().map(|p| p.id.as_str())
    }

    /// Language of the first paper, `"en"` for an empty corpus.
    pub fn primary_lang(&self) -> &str {
        self.papers.first().map(|p| p.lang.as_str()).unwrap_or("en")
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for p in &self.papers {
            out.push_str(&serde_json::to_string(p).expect("paper serializes"));
            out.push('\n');
        }
        out
    }

    pub fn parse_jsonl(raw: &str, source: impl Into<String>) -> Result<Self, CorpusError> {
        let mut papers = Vec::new();
        for (i, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let paper: Paper = serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })?;
            papers.push(paper);
        }
        Self::new(papers, source)
    }
}

pub fn load_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    let raw = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Corpus::parse_jsonl(&raw, path.display().to_string())
}

pub fn save_corpus(path: &Path, corpus: &Corpus) -> Result<(), CorpusError> {
    fsutil::write_atomic(path, corpus.to_jsonl().as_bytes()).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reference taxonomy validated against a corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct GoldTaxonomy {
    pub root: TaxonomyNode,
    /// paper id -> id of the node listing it
    pub coverage: BTreeMap<String, String>,
}

impl GoldTaxonomy {
    /// Checks corpus membership, single assignment and title cycles. Node ids
    /// are rewritten to positional paths.
    pub fn validate(mut root: TaxonomyNode, corpus: &Corpus) -> Result<Self, CorpusError> {
        root.assign_path_ids();
        check_cycles(&root, &mut Vec::new())?;
        let known: HashSet<&str> = corpus.ids().collect();
        let mut coverage: BTreeMap<String, String> = BTreeMap::new();
        let mut error = None;
        root.visit(&mut |n, _| {
            if error.is_some() {
                return;
            }
            for p in &n.papers {
                if !known.contains(p.as_str()) {
                    error = Some(CorpusError::UnknownPaper(p.clone()));
                    return;
                }
                if let Some(first) = coverage.insert(p.clone(), n.id.clone()) {
                    error = Some(CorpusError::MultipleAssignment {
                        paper: p.clone(),
                        first,
                        second: n.id.clone(),
                    });
                    return;
                }
            }
        });
        match error {
            Some(e) => Err(e),
            None => Ok(Self { root, coverage }),
        }
    }

    pub fn papers(&self) -> BTreeSet<&str> {
        self.coverage.keys().map(String::as_str).collect()
    }
}

/// The tree form cannot alias nodes, so a cycle shows up as a node whose
/// normalized title repeats one of its ancestors' titles.
fn check_cycles(node: &TaxonomyNode, ancestors: &mut Vec<String>) -> Result<(), CorpusError> {
    let key = normalize_title(&node.title);
    if ancestors.contains(&key) {
        return Err(CorpusError::Cycle(node.title.clone()));
    }
    ancestors.push(key);
    for c in &node.children {
        check_cycles(c, ancestors)?;
    }
    ancestors.pop();
    Ok(())
}

pub fn load_gold(path: &Path, corpus: &Corpus) -> Result<GoldTaxonomy, CorpusError> {
    let display = path.display().to_string();
    let raw = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: display.clone(),
        source,
    })?;
    let doc: NodeDoc = serde_json::from_str(&raw).map_err(|e| CorpusError::TaxonomySchema {
        path: display,
        message: e.to_string(),
    })?;
    GoldTaxonomy::validate(TaxonomyNode::from_doc(&doc), corpus)
}

pub fn save_gold(path: &Path, gold: &GoldTaxonomy) -> Result<(), CorpusError> {
    fsutil::write_atomic(path, gold.root.to_json().as_bytes()).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    fn three() -> Corpus {
        Corpus::new(
            vec![
                Paper::new("p1", "One", "a"),
                Paper::new("p2", "Two", "b"),
                Paper::new("p3", "Three", ""),
            ],
            "test",
        )
        .unwrap()
    }

    #[test]
    fn loads_records_in_file_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "c.jsonl",
            "{\"id\":\"b\",\"title\":\"B\",\"abstract\":\"x\",\"lang\":\"en\"}\n\
             {\"id\":\"a\",\"title\":\"A\",\"abstract\":\"\",\"lang\":\"zh\"}\n\
             {\"id\":\"c\",\"title\":\"C\",\"abstract\":\"y\",\"lang\":\"en\"}\n",
        );
        let c = load_corpus(&p).unwrap();
        assert_eq!(c.ids().collect::<Vec<_>>(), ["b", "a", "c"]);
        assert_eq!(c.papers()[1].lang, "zh");
    }

    #[test]
    fn duplicate_ids_are_named() {
        let dir = tempfile::tempdir().unwrap();
        let rec = |id: &str| {
            format!("{{\"id\":\"{id}\",\"title\":\"t\",\"abstract\":\"\",\"lang\":\"en\"}}\n")
        };
        let body = [rec("p0"), rec("p1"), rec("p2"), rec("p3"), rec("p1")].concat();
        let err = load_corpus(&write(&dir, "c.jsonl", &body)).unwrap_err();
        assert!(
            matches!(&err, CorpusError::DuplicateId(id) if id == "p1"),
            "{err}"
        );
    }

    #[test]
    fn malformed_line_is_reported_by_number() {
        let dir = tempfile::tempdir().unwrap();
        let body = "{\"id\":\"a\",\"title\":\"A\"}\nnot json\n";
        let err = load_corpus(&write(&dir, "c.jsonl", body)).unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 2, .. }));
    }

    #[test]
    fn blank_title_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let body = "{\"id\":\"x9\",\"title\":\"   \",\"abstract\":\"\",\"lang\":\"en\"}\n";
        let err = load_corpus(&write(&dir, "c.jsonl", body)).unwrap_err();
        assert!(err.to_string().contains("x9"));
    }

    #[test]
    fn empty_file_is_an_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_corpus(&write(&dir, "c.jsonl", "")).unwrap().is_empty());
    }

    #[test]
    fn gold_two_level_tree_validates() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "g.json",
            r#"{"title":"root","papers":[],"children":[
                {"title":"A","papers":["p1","p2"],"children":[]},
                {"title":"B","papers":["p3"],"children":[]}]}"#,
        );
        let gold = load_gold(&p, &three()).unwrap();
        assert_eq!(gold.coverage["p3"], "0.1");
        assert_eq!(gold.papers().len(), 3);
    }

    #[test]
    fn gold_unknown_paper_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "g.json", r#"{"title":"root","papers":["ghost"]}"#);
        let err = load_gold(&p, &three()).unwrap_err();
        assert!(err.to_string().contains("ghost"));
    }

    #[test]
    fn gold_double_assignment_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "g.json",
            r#"{"title":"root","papers":["p1"],"children":[{"title":"A","papers":["p1"]}]}"#,
        );
        assert!(matches!(
            load_gold(&p, &three()).unwrap_err(),
            CorpusError::MultipleAssignment { .. }
        ));
    }

    #[test]
    fn gold_self_descendant_is_a_cycle() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "g.json",
            r#"{"title":"root","children":[{"title":"A","children":[{"title":"B","children":[{"title":"a"}]}]}]}"#,
        );
        assert!(matches!(load_gold(&p, &three()).unwrap_err(), CorpusError::Cycle(t) if t == "a"));
    }

    #[test]
    fn save_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let c = three();
        let p = dir.path().join("c.jsonl");
        save_corpus(&p, &c).unwrap();
        let back = load_corpus(&p).unwrap();
        assert_eq!(back.papers(), c.papers());
    }
}
