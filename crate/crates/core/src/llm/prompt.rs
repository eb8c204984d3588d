//! Prompt templates keyed by (request kind, language).
//!
//! Templates use `{name}` placeholders; anything in braces that is not a known
//! placeholder (such as the JSON schema examples) is left as written.

use std::collections::BTreeMap;

use super::{LlmError, LlmRequest, Payload, RequestKind, MAX_ABSTRACT_CHARS, MAX_PROMPT_PAPERS};
use crate::text::truncate_chars;

const FORMAT: &str = "Reply with a single <result>...</result> block containing JSON of the form {schema} and nothing else.";

const EN_EXTRACT: &str = "You are indexing scientific papers.\n\
Title: {title}\n\
Abstract: {abstract}\n\n\
List the key technical concepts of this paper (methods, tasks, problem settings), \
written exactly as they appear in the title or abstract. Give at most 10.\n{format}";

const EN_INDUCE: &str =
    "Organize the following technical concepts into a hierarchy from general to specific.\n\
Concepts:\n{concepts}\n\n\
Use only the listed concepts. Name the single most general theme as the root; \
each edge links a concept to a more specific one.\n{format}";

const EN_LABEL: &str = "Choose a heading for a group of papers.\n\
Candidate concepts (with the number of papers mentioning each):\n{candidates}\n\
Sub-topic headings:\n{children}\n\
Paper titles:\n{titles}\n\n\
Pick the candidate that best covers the whole group, or rephrase it minimally. \
If there are no candidates, write a short heading grounded in the paper titles.\n{format}";

const EN_ALIGN: &str = "Check a taxonomy heading against its context.\n\
Root topic of the taxonomy: {root}\n\
Parent heading: {parent}\n\
Current heading: {title}\n\
Papers under the heading:\n{papers}\n\n\
If the heading is a specific sub-topic of the parent, stays within the root topic \
and describes these papers, return it unchanged. Otherwise return a corrected heading \
that satisfies all three constraints.\n{format}";

const EN_EXPAND: &str = "A taxonomy node and its current sub-topics are listed below.\n\
Parent heading: {parent}\n\
Existing sub-topics:\n{siblings}\n\
Sample paper titles under the parent:\n{titles}\n\n\
Identify missing technical sub-topics of the parent. Each addition must sit at the same \
level of abstraction as the existing sub-topics, with no conceptual overlap or granularity \
mismatch with any of them. Return an empty list if nothing is missing.\n{format}";

const EN_SCORE: &str = "Rate a taxonomy heading from 1 to 10 for technical specificity, \
coverage of its papers and semantic consistency.\n\
Heading: {title}\n\
Number of papers: {count}\n\
Sample paper titles:\n{titles}\n{format}";

const EN_VERIFY: &str = "Do these two taxonomy headings name the same concept?\n\
A: {first}\n\
B: {second}\n{format}";

const REPAIR: &str = "\n\nYour previous reply could not be used: {problem}.\n{format}";

#[derive(Clone, Debug)]
pub struct TemplateSet {
    templates: BTreeMap<(RequestKind, String), String>,
}

impl TemplateSet {
    /// English templates for every request kind.
    pub fn builtin() -> Self {
        let mut set = Self::empty();
        for (kind, text) in [
            (RequestKind::ExtractConcepts, EN_EXTRACT),
            (RequestKind::InduceHierarchy, EN_INDUCE),
            (RequestKind::LabelCluster, EN_LABEL),
            (RequestKind::AlignTitle, EN_ALIGN),
            (RequestKind::ExpandSiblings, EN_EXPAND),
            (RequestKind::ScoreConcept, EN_SCORE),
            (RequestKind::VerifyRedundancy, EN_VERIFY),
        ] {
            set.insert(kind, "en", text);
        }
        set
    }

    pub fn empty() -> Self {
        Self {
            templates: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, kind: RequestKind, lang: &str, template: &str) {
        self.templates
            .insert((kind, lang.to_string()), template.to_string());
    }

    pub fn render(&self, req: &LlmRequest) -> Result<String, LlmError> {
        let kind = req.kind();
        let template = self
            .templates
            .get(&(kind, req.lang.clone()))
            .ok_or_else(|| LlmError::MissingTemplate {
                kind,
                lang: req.lang.clone(),
            })?;
        Ok(fill(template, &fields(&req.payload)))
    }
}

/// Render with the built-in templates.
pub fn render_prompt(req: &LlmRequest) -> Result<String, LlmError> {
    TemplateSet::builtin().render(req)
}

pub(super) fn repair_prompt(base: &str, kind: RequestKind, problem: &str) -> String {
    let tail = fill(
        REPAIR,
        &[
            ("problem", problem.to_string()),
            ("format", format_line(kind)),
        ],
    );
    format!("{base}{tail}")
}

fn format_line(kind: RequestKind) -> String {
    FORMAT.replace("{schema}", kind.response_schema())
}

fn bullets<'a>(items: impl IntoIterator<Item = &'a String>) -> String {
    let lines: Vec<String> = items.into_iter().map(|s| format!("- {s}")).collect();
    if lines.is_empty() {
        "(none)".to_string()
    } else {
        lines.join("\n")
    }
}

fn fields(payload: &Payload) -> Vec<(&'static str, String)> {
    let mut out = vec![("format", format_line(payload.kind()))];
    match payload {
        Payload::ExtractConcepts {
            title,
            abstract_text,
            ..
        } => {
            out.push(("title", title.clone()));
            let shown = if abstract_text.trim().is_empty() {
                "(none)"
            } else {
                abstract_text
            };
            out.push(("abstract", shown.to_string()));
        }
        Payload::InduceHierarchy { concepts } => out.push(("concepts", bullets(concepts))),
        Payload::LabelCluster {
            candidates,
            paper_titles,
            child_titles,
        } => {
            let cands: Vec<String> = candidates
                .iter()
                .map(|c| format!("{} ({})", c.term, c.count))
                .collect();
            out.push(("candidates", bullets(&cands)));
            out.push(("children", bullets(child_titles)));
            out.push((
                "titles",
                bullets(paper_titles.iter().take(MAX_PROMPT_PAPERS)),
            ));
        }
        Payload::AlignTitle {
            root_title,
            parent_title,
            title,
            papers,
        } => {
            out.push(("root", root_title.clone()));
            out.push(("parent", parent_title.clone()));
            out.push(("title", title.clone()));
            let shown: Vec<String> = papers
                .iter()
                .take(MAX_PROMPT_PAPERS)
                .map(|p| {
                    format!(
                        "{}\n  {}",
                        p.title,
                        truncate_chars(&p.abstract_text, MAX_ABSTRACT_CHARS)
                    )
                })
                .collect();
            out.push(("papers", bullets(&shown)));
        }
        Payload::ExpandSiblings {
            parent_title,
            siblings,
            paper_titles,
        } => {
            out.push(("parent", parent_title.clone()));
            out.push(("siblings", bullets(siblings)));
            out.push((
                "titles",
                bullets(paper_titles.iter().take(MAX_PROMPT_PAPERS)),
            ));
        }
        Payload::ScoreConcept {
            title,
            paper_count,
            sample_titles,
        } => {
            out.push(("title", title.clone()));
            out.push(("count", paper_count.to_string()));
            out.push((
                "titles",
                bullets(sample_titles.iter().take(MAX_PROMPT_PAPERS)),
            ));
        }
        Payload::VerifyRedundancy { first, second } => {
            out.push(("first", first.clone()));
            out.push(("second", second.clone()));
        }
    }
    out
}

/// Single left-to-right pass, so placeholder-like text inside substituted
/// values is never expanded.
fn fill(template: &str, values: &[(&str, String)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let known = after.find('}').and_then(|close| {
            let name = &after[..close];
            values
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| (v, close))
        });
        match known {
            Some((v, close)) => {
                out.push_str(v);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::PaperBrief;

    fn align() -> LlmRequest {
        LlmRequest::new(
            Payload::AlignTitle {
                root_title: "model compression".into(),
                parent_title: "knowledge distillation".into(),
                title: "offline distillation".into(),
                papers: vec![PaperBrief::truncated("Teacher ensembles", &"x".repeat(900))],
            },
            "en",
        )
    }

    #[test]
    fn align_prompt_carries_all_three_constraints() {
        let p = render_prompt(&align()).unwrap();
        for needle in [
            "model compression",
            "knowledge distillation",
            "offline distillation",
            "Teacher ensembles",
        ] {
            assert!(p.contains(needle), "{needle}");
        }
        assert!(p.contains(&"x".repeat(400)) && !p.contains(&"x".repeat(401)));
        assert!(p.contains(r#"{"title": "..."}"#));
        assert_eq!(p, render_prompt(&align()).unwrap());
    }

    #[test]
    fn expand_prompt_lists_siblings_and_overlap_rule() {
        let req = LlmRequest::new(
            Payload::ExpandSiblings {
                parent_title: "model compression".into(),
                siblings: vec!["pruning".into(), "quantization".into()],
                paper_titles: vec![],
            },
            "en",
        );
        let p = render_prompt(&req).unwrap();
        assert!(p.contains("no conceptual overlap or granularity mismatch"));
        assert!(p.contains("- pruning\n- quantization"));
    }

    #[test]
    fn missing_language_is_an_error() {
        let mut req = align();
        req.lang = "zh".into();
        match render_prompt(&req) {
            Err(LlmError::MissingTemplate { kind, lang }) => {
                assert_eq!((kind, lang.as_str()), (RequestKind::AlignTitle, "zh"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn substituted_values_are_not_re_expanded() {
        let s = fill("{a} {b} {c}", &[("a", "{b}".into()), ("b", "B".into())]);
        assert_eq!(s, "{b} B {c}");
    }
}
