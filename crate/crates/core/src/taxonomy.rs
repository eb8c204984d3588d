//! The labeled taxonomy tree and its on-disk document form.
//!
//! A node lists only the papers attached *directly* to it; the papers under a
//! node are the union over its subtree. The file form is a recursive JSON
//! document `{"title", "papers", "children", "score"?, "provenance"?}`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::fsutil;
use crate::text::normalize_title;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Provenance {
    Cluster,
    Expanded,
    Collapsed,
    /// Free-form provenance carried through from an input file.
    Other(String),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Cluster => f.write_str("cluster"),
            Provenance::Expanded => f.write_str("expanded"),
            Provenance::Collapsed => f.write_str("collapsed"),
            Provenance::Other(s) => f.write_str(s),
        }
    }
}

impl FromStr for Provenance {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "cluster" => Provenance::Cluster,
            "expanded" => Provenance::Expanded,
            "collapsed" => Provenance::Collapsed,
            other => Provenance::Other(other.to_string()),
        })
    }
}

/// Outcome of the vertical consistency check for a node title.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignFlag {
    #[default]
    Ok,
    Regenerated,
    Forced,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaxonomyNode {
    pub id: String,
    pub title: String,
    pub papers: BTreeSet<String>,
    pub children: Vec<TaxonomyNode>,
    pub provenance: Provenance,
    pub align_flag: AlignFlag,
    pub score: Option<f64>,
    /// Set when the score is a stand-in for a failed scoring call.
    pub score_defaulted: bool,
}

impl TaxonomyNode {
    pub fn new(id: impl Into<String>, title: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
            papers: BTreeSet::new(),
            children: Vec::new(),
            provenance: Provenance::Cluster,
            align_flag: AlignFlag::Ok,
            score: None,
            score_defaulted: false,
        }
    }

    pub fn with_papers<I, S>(mut self, papers: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.papers.extend(papers.into_iter().map(Into::into));
        self
    }

    pub fn with_children(mut self, children: Vec<TaxonomyNode>) -> Self {
        self.children = children;
        self
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// All papers in this subtree.
    pub fn subtree_papers(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |n, _| out.extend(n.papers.iter().cloned()));
        out
    }

    /// Every directly attached paper in the subtree, with repeats, sorted.
    pub fn paper_multiset(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |n, _| out.extend(n.papers.iter().cloned()));
        out.sort();
        out
    }

    pub fn node_count(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(TaxonomyNode::node_count)
            .sum::<usize>()
    }

    /// Depth of the deepest node, root = 0.
    pub fn height(&self) -> usize {
        self.children
            .iter()
            .map(|c| 1 + c.height())
            .max()
            .unwrap_or(0)
    }

    /// Pre-order visit with depth.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a TaxonomyNode, usize)) {
        fn go<'a>(n: &'a TaxonomyNode, depth: usize, f: &mut impl FnMut(&'a TaxonomyNode, usize)) {
            f(n, depth);
            for c in &n.children {
                go(c, depth + 1, f);
            }
        }
        go(self, 0, f);
    }

    pub fn find(&self, id: &str) -> Option<&TaxonomyNode> {
        if self.id == id {
            return Some(self);
        }
        self.children.iter().find_map(|c| c.find(id))
    }

    pub fn titles(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |n, _| out.push(n.title.clone()));
        out
    }

    /// Same shape: identical child counts at every position.
    pub fn same_structure(&self, other: &TaxonomyNode) -> bool {
        self.children.len() == other.children.len()
            && self
                .children
                .iter()
                .zip(&other.children)
                .all(|(a, b)| a.same_structure(b))
    }

    /// Replace every id with its positional path: root `"0"`, its children
    /// `"0.0"`, `"0.1"`, and so on.
    pub fn assign_path_ids(&mut self) {
        fn go(n: &mut TaxonomyNode, id: String) {
            for (i, c) in n.children.iter_mut().enumerate() {
                go(c, format!("{id}.{i}"));
            }
            n.id = id;
        }
        go(self, "0".to_string());
    }

    /// Map each directly attached paper to the ids of the nodes listing it.
    pub fn paper_locations(&self) -> BTreeMap<String, Vec<String>> {
        let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
        self.visit(&mut |n, _| {
            for p in &n.papers {
                out.entry(p.clone()).or_default().push(n.id.clone());
            }
        });
        out
    }

    pub fn to_doc(&self) -> NodeDoc {
        NodeDoc {
            title: self.title.clone(),
            papers: self.papers.iter().cloned().collect(),
            children: self.children.iter().map(TaxonomyNode::to_doc).collect(),
            score: self.score,
            provenance: Some(self.provenance.to_string()),
            align: (self.align_flag != AlignFlag::Ok).then_some(self.align_flag),
        }
    }

    /// Builds a tree from a document; ids are positional paths.
    pub fn from_doc(doc: &NodeDoc) -> Self {
        fn go(doc: &NodeDoc, id: String) -> TaxonomyNode {
            TaxonomyNode {
                children: doc
                    .children
                    .iter()
                    .enumerate()
                    .map(|(i, c)| go(c, format!("{id}.{i}")))
                    .collect(),
                id,
                title: doc.title.clone(),
                papers: doc.papers.iter().cloned().collect(),
                provenance: doc
                    .provenance
                    .as_deref()
                    .map(|p| p.parse().unwrap_or(Provenance::Cluster))
                    .unwrap_or(Provenance::Cluster),
                align_flag: doc.align.unwrap_or_default(),
                score: doc.score,
                score_defaulted: false,
            }
        }
        go(doc, "0".to_string())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_doc()).expect("taxonomy serializes");
        s.push('\n');
        s
    }
}

/// Serialized node: the taxonomy file schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub title: String,
    #[serde(default)]
    pub papers: Vec<String>,
    #[serde(default)]
    pub children: Vec<NodeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub align: Option<AlignFlag>,
}

#[derive(Debug, thiserror::Error)]
pub enum TaxonomyFileError {
    #[error("cannot read taxonomy file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid taxonomy document {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

pub fn read_taxonomy(path: &Path) -> Result<TaxonomyNode, TaxonomyFileError> {
    let display = path.display().to_string();
    let raw = std::fs::read_to_string(path).map_err(|source| TaxonomyFileError::Io {
        path: display.clone(),
        source,
    })?;
    let doc: NodeDoc = serde_json::from_str(&raw).map_err(|source| TaxonomyFileError::Parse {
        path: display,
        source,
    })?;
    Ok(TaxonomyNode::from_doc(&doc))
}

pub fn write_taxonomy(path: &Path, root: &TaxonomyNode) -> std::io::Result<()> {
    fsutil::write_atomic(path, root.to_json().as_bytes())
}

/// First pair of siblings (anywhere in the tree) whose normalized titles
/// collide, as `(parent id, title)`.
pub fn duplicate_sibling_title(root: &TaxonomyNode) -> Option<(String, String)> {
    let mut found = None;
    root.visit(&mut |n, _| {
        if found.is_some() {
            return;
        }
        let mut seen = BTreeSet::new();
        for c in &n.children {
            if !seen.insert(normalize_title(&c.title)) {
                found = Some((n.id.clone(), c.title.clone()));
                return;
            }
        }
    });
    found
}
