use std::collections::{BTreeMap, BTreeSet};

use super::{Concept, ConceptError};
use crate::llm::{
    parse_response, Gateway, Hierarchy, LlmError, LlmRequest, LlmResult, Payload, RequestKind,
};
use crate::text::normalize_term;

/// Concepts per hierarchy request.
pub const MAX_INDUCE_BATCH: usize = 100;

/// Preliminary hierarchy over concept surfaces. Concepts without a parent
/// hang directly under the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConceptTree {
    /// Label of the most general theme, when the model named one.
    pub root: Option<String>,
    parent: BTreeMap<String, String>,
    concepts: BTreeSet<String>,
}

impl ConceptTree {
    /// Flat tree: every concept directly under the root.
    pub fn flat(root: Option<String>, concepts: impl IntoIterator<Item = String>) -> Self {
        Self {
            root,
            parent: BTreeMap::new(),
            concepts: concepts.into_iter().collect(),
        }
    }

    pub fn concepts(&self) -> &BTreeSet<String> {
        &self.concepts
    }

    pub fn contains(&self, concept: &str) -> bool {
        self.concepts.contains(concept)
    }

    /// Parent concept, `None` for top-level concepts.
    pub fn parent(&self, concept: &str) -> Option<&str> {
        self.parent.get(concept).map(String::as_str)
    }

    pub fn children(&self, concept: Option<&str>) -> Vec<&str> {
        self.concepts
            .iter()
            .filter(|c| self.parent(c) == concept)
            .map(String::as_str)
            .collect()
    }

    /// Whether `a` is a proper ancestor of `b`.
    pub fn is_ancestor(&self, a: &str, b: &str) -> bool {
        let mut cur = self.parent(b);
        while let Some(p) = cur {
            if p == a {
                return true;
            }
            cur = self.parent(p);
        }
        false
    }

    /// Depth below the root (top-level concepts are at depth 1).
    pub fn depth(&self, concept: &str) -> Option<usize> {
        if !self.contains(concept) {
            return None;
        }
        let mut d = 1;
        let mut cur = self.parent(concept);
        while let Some(p) = cur {
            d += 1;
            cur = self.parent(p);
        }
        Some(d)
    }

    /// Root plus one node per concept.
    pub fn node_count(&self) -> usize {
        self.concepts.len() + 1
    }

    fn top_level(&self) -> Vec<String> {
        self.concepts
            .iter()
            .filter(|c| !self.parent.contains_key(*c))
            .cloned()
            .collect()
    }
}

/// Organize concept surfaces into a tree. Large inputs are split into batches
/// of [`MAX_INDUCE_BATCH`]; the batch tops are then organized by a further
/// request. Edges naming unknown concepts are repaired by re-prompting; what
/// still does not resolve is attached under the root.
pub fn induce_concept_tree(
    concepts: &[Concept],
    gateway: &Gateway,
    lang: &str,
) -> Result<ConceptTree, ConceptError> {
    if concepts.is_empty() {
        return Err(ConceptError::NoConcepts);
    }
    let surfaces: Vec<String> = concepts.iter().map(|c| c.surface.clone()).collect();
    Ok(induce(&surfaces, gateway, lang))
}

fn induce(surfaces: &[String], gateway: &Gateway, lang: &str) -> ConceptTree {
    if surfaces.len() <= MAX_INDUCE_BATCH {
        return induce_batch(surfaces, gateway, lang);
    }
    let parts: Vec<ConceptTree> = surfaces
        .chunks(MAX_INDUCE_BATCH)
        .map(|chunk| induce_batch(chunk, gateway, lang))
        .collect();
    let tops: Vec<String> = parts.iter().flat_map(ConceptTree::top_level).collect();
    let mut merged = ConceptTree::flat(None, surfaces.iter().cloned());
    for part in &parts {
        merged
            .parent
            .extend(part.parent.iter().map(|(k, v)| (k.clone(), v.clone())));
    }
    if tops.len() < surfaces.len() {
        let upper = induce(&tops, gateway, lang);
        merged.parent.extend(upper.parent);
        merged.root = upper.root;
    } else {
        // no batch found any structure; keep the most common batch root
        let mut votes: BTreeMap<&String, usize> = BTreeMap::new();
        for r in parts.iter().filter_map(|p| p.root.as_ref()) {
            *votes.entry(r).or_default() += 1;
        }
        merged.root = votes
            .iter()
            .fold(None::<(&String, usize)>, |best, (r, &n)| match best {
                Some((_, b)) if b >= n => best,
                _ => Some((r, n)),
            })
            .map(|(r, _)| r.clone());
    }
    merged
}

/// Lookup from normalized term to the supplied surface.
fn surface_index(surfaces: &[String]) -> BTreeMap<String, &String> {
    let mut idx = BTreeMap::new();
    for s in surfaces {
        idx.entry(normalize_term(s)).or_insert(s);
    }
    idx
}

fn induce_batch(surfaces: &[String], gateway: &Gateway, lang: &str) -> ConceptTree {
    let req = LlmRequest::new(
        Payload::InduceHierarchy {
            concepts: surfaces.to_vec(),
        },
        lang,
    );
    let idx = surface_index(surfaces);
    let check = |r: &LlmResult| -> Result<(), String> {
        let LlmResult::Hierarchy(h) = r else {
            return Err("not a hierarchy".into());
        };
        let root = h.root.as_deref().map(normalize_term);
        let unknown: Vec<&str> = h
            .edges
            .iter()
            .flat_map(|e| [&e.parent, &e.child])
            .filter(|t| {
                let n = normalize_term(t);
                !idx.contains_key(&n) && root.as_ref() != Some(&n)
            })
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(format!(
                "edges name concepts that were not supplied: {}",
                unknown.join(", ")
            ))
        }
    };
    let hierarchy = match gateway.complete_checked(&req, &check) {
        Ok(r) => match r.result {
            LlmResult::Hierarchy(h) => h,
            _ => Hierarchy::default(),
        },
        Err(LlmError::Unparseable { raw, .. }) => {
            match parse_response(RequestKind::InduceHierarchy, &raw) {
                Ok(LlmResult::Hierarchy(h)) => h,
                _ => Hierarchy::default(),
            }
        }
        Err(e) => {
            log::warn!("concept hierarchy request failed, using a flat tree: {e}");
            Hierarchy::default()
        }
    };
    from_hierarchy(surfaces, &idx, hierarchy)
}

/// Sanitize a reply: unknown children are dropped, parents that are not
/// supplied concepts (the root label included) become the root, the first edge per child wins, and edges closing a cycle are cut.
fn from_hierarchy(
    surfaces: &[String],
    idx: &BTreeMap<String, &String>,
    h: Hierarchy,
) -> ConceptTree {
    let root = h.root.filter(|r| !r.trim().is_empty());
    let mut tree = ConceptTree::flat(root, surfaces.iter().cloned());
    for edge in h.edges {
        let Some(&child) = idx.get(&normalize_term(&edge.child)) else {
            continue;
        };
        if tree.parent.contains_key(child) {
            continue;
        }
        let Some(&parent) = idx.get(&normalize_term(&edge.parent)) else {
            continue;
        };
        if parent == child || tree.is_ancestor(child, parent) {
            continue;
        }
        tree.parent.insert(child.clone(), parent.clone());
    }
    tree
}
