//! Every model interaction goes through [`Gateway::complete`]: a typed request
//! is rendered to a prompt, sent to a [`Provider`], and the reply is parsed
//! and validated against the request kind's schema before anything downstream
//! sees it. Unparseable replies are re-prompted with a repair instruction;
//! transport failures are retried with backoff.
//!
//! Replies carry their structured part in a `<result>{json}</result>` block.
//! A bare JSON reply is accepted as well.

mod audit;
mod mock;
mod prompt;
mod remote;

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::text::{sha256_hex, truncate_chars};

pub use audit::{fixtures_from_audit, AuditLog, AuditRecord};
pub use mock::{MockProvider, RuleSet};
pub use prompt::{render_prompt, TemplateSet};
pub use remote::{RemoteConfig, RemoteProvider};

/// Paper samples shown in a prompt.
pub const MAX_PROMPT_PAPERS: usize = 10;
/// Abstract characters shown per sampled paper.
pub const MAX_ABSTRACT_CHARS: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    ExtractConcepts,
    InduceHierarchy,
    LabelCluster,
    AlignTitle,
    ExpandSiblings,
    ScoreConcept,
    VerifyRedundancy,
}

impl RequestKind {
    pub const ALL: [RequestKind; 7] = [
        RequestKind::ExtractConcepts,
        RequestKind::InduceHierarchy,
        RequestKind::LabelCluster,
        RequestKind::AlignTitle,
        RequestKind::ExpandSiblings,
        RequestKind::ScoreConcept,
        RequestKind::VerifyRedundancy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RequestKind::ExtractConcepts => "extract_concepts",
            RequestKind::InduceHierarchy => "induce_hierarchy",
            RequestKind::LabelCluster => "label_cluster",
            RequestKind::AlignTitle => "align_title",
            RequestKind::ExpandSiblings => "expand_siblings",
            RequestKind::ScoreConcept => "score_concept",
            RequestKind::VerifyRedundancy => "verify_redundancy",
        }
    }

    /// JSON shape the reply must take, quoted in prompts.
    pub fn response_schema(self) -> &'static str {
        match self {
            RequestKind::ExtractConcepts => r#"{"concepts": ["..."]}"#,
            RequestKind::InduceHierarchy => {
                r#"{"root": "...", "edges": [{"parent": "...", "child": "..."}]}"#
            }
            RequestKind::LabelCluster | RequestKind::AlignTitle => r#"{"title": "..."}"#,
            RequestKind::ExpandSiblings => r#"{"topics": ["..."]}"#,
            RequestKind::ScoreConcept => r#"{"score": 7}"#,
            RequestKind::VerifyRedundancy => r#"{"redundant": true}"#,
        }
    }
}

impl fmt::Display for RequestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperBrief {
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
}

impl PaperBrief {
    /// Abstract cut to [`MAX_ABSTRACT_CHARS`].
    pub fn truncated(title: &str, abstract_text: &str) -> Self {
        Self {
            title: title.to_string(),
            abstract_text: truncate_chars(abstract_text, MAX_ABSTRACT_CHARS).to_string(),
        }
    }
}

/// A candidate heading with its in-cluster support count.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub term: String,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    ExtractConcepts {
        paper_id: String,
        title: String,
        #[serde(rename = "abstract")]
        abstract_text: String,
    },
    InduceHierarchy {
        concepts: Vec<String>,
    },
    LabelCluster {
        candidates: Vec<Candidate>,
        paper_titles: Vec<String>,
        /// Titles of the node's children, when it has any.
        child_titles: Vec<String>,
    },
    AlignTitle {
        root_title: String,
        parent_title: String,
        title: String,
        papers: Vec<PaperBrief>,
    },
    ExpandSiblings {
        parent_title: String,
        siblings: Vec<String>,
        paper_titles: Vec<String>,
    },
    ScoreConcept {
        title: String,
        paper_count: usize,
        sample_titles: Vec<String>,
    },
    VerifyRedundancy {
        first: String,
        second: String,
    },
}

impl Payload {
    pub fn kind(&self) -> RequestKind {
        match self {
            Payload::ExtractConcepts { .. } => RequestKind::ExtractConcepts,
            Payload::InduceHierarchy { .. } => RequestKind::InduceHierarchy,
            Payload::LabelCluster { .. } => RequestKind::LabelCluster,
            Payload::AlignTitle { .. } => RequestKind::AlignTitle,
            Payload::ExpandSiblings { .. } => RequestKind::ExpandSiblings,
            Payload::ScoreConcept { .. } => RequestKind::ScoreConcept,
            Payload::VerifyRedundancy { .. } => RequestKind::VerifyRedundancy,
        }
    }

    /// Schema check run before dispatch.
    pub fn validate(&self) -> Result<(), String> {
        fn non_empty(field: &str, s: &str) -> Result<(), String> {
            if s.trim().is_empty() {
                Err(format!("{field} is empty"))
            } else {
                Ok(())
            }
        }
        match self {
            Payload::ExtractConcepts {
                paper_id, title, ..
            } => {
                non_empty("paper_id", paper_id)?;
                non_empty("title", title)
            }
            Payload::InduceHierarchy { concepts } => {
                if concepts.is_empty() {
                    return Err("no concepts".into());
                }
                concepts.iter().try_for_each(|c| non_empty("concept", c))
            }
            Payload::LabelCluster {
                candidates,
                paper_titles,
                ..
            } => {
                if candidates.is_empty() && paper_titles.is_empty() {
                    return Err("neither candidates nor paper titles".into());
                }
                candidates
                    .iter()
                    .try_for_each(|c| non_empty("candidate", &c.term))
            }
            Payload::AlignTitle {
                root_title,
                parent_title,
                title,
                papers,
            } => {
                non_empty("root_title", root_title)?;
                non_empty("parent_title", parent_title)?;
                non_empty("title", title)?;
                if papers.len() > MAX_PROMPT_PAPERS {
                    return Err(format!("more than {MAX_PROMPT_PAPERS} papers"));
                }
                if papers
                    .iter()
                    .any(|p| p.abstract_text.chars().count() > MAX_ABSTRACT_CHARS)
                {
                    return Err(format!(
                        "abstract longer than {MAX_ABSTRACT_CHARS} characters"
                    ));
                }
                Ok(())
            }
            Payload::ExpandSiblings { parent_title, .. } => non_empty("parent_title", parent_title),
            Payload::ScoreConcept { title, .. } => non_empty("title", title),
            Payload::VerifyRedundancy { first, second } => {
                non_empty("first", first)?;
                non_empty("second", second)
            }
        }
    }

    /// Canonical JSON (object keys sorted).
    pub fn canonical_json(&self) -> String {
        serde_json::to_value(self)
            .expect("payload serializes")
            .to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub payload: Payload,
    pub template_id: String,
    pub lang: String,
}

impl LlmRequest {
    pub fn new(payload: Payload, lang: impl Into<String>) -> Self {
        let template_id = format!("{}.v1", payload.kind());
        Self {
            payload,
            template_id,
            lang: lang.into(),
        }
    }

    pub fn kind(&self) -> RequestKind {
        self.payload.kind()
    }

    /// Fixture and audit key: digest of the kind and canonical payload.
    pub fn digest(&self) -> String {
        sha256_hex(format!(
            "{}\n{}",
            self.kind(),
            self.payload.canonical_json()
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub parent: String,
    pub child: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Hierarchy {
    #[serde(default)]
    pub root: Option<String>,
    #[serde(default)]
    pub edges: Vec<Edge>,
}

/// Structured reply, one variant per request kind family.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LlmResult {
    Concepts(Vec<String>),
    Hierarchy(Hierarchy),
    Title(String),
    Topics(Vec<String>),
    Score(u8),
    Redundant(bool),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LlmResponse {
    pub result: LlmResult,
    pub raw_text: String,
    pub attempts: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("invalid {kind} payload: {message}")]
    InvalidPayload { kind: RequestKind, message: String },
    #[error("no prompt template for ({kind}, {lang})")]
    MissingTemplate { kind: RequestKind, lang: String },
    #[error("provider transport failed after {attempts} attempts: {message}")]
    Transport { attempts: usize, message: String },
    #[error("unusable {kind} reply after {attempts} attempts ({message}): {raw:?}")]
    Unparseable {
        kind: RequestKind,
        attempts: usize,
        message: String,
        raw: String,
    },
    #[error("audit log: {0}")]
    Audit(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProviderError {
    /// Network or service failure; retried with backoff.
    Transport(String),
    /// Permanent refusal (bad credentials, malformed request); not retried.
    Rejected(String),
}

impl fmt::Display for ProviderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderError::Transport(m) => write!(f, "transport: {m}"),
            ProviderError::Rejected(m) => write!(f, "rejected: {m}"),
        }
    }
}

/// A model backend. Returns the raw reply text for a rendered prompt.
pub trait Provider: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, req: &LlmRequest, prompt: &str) -> Result<String, ProviderError>;
}

impl<P: Provider + ?Sized> Provider for Arc<P> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn complete(&self, req: &LlmRequest, prompt: &str) -> Result<String, ProviderError> {
        (**self).complete(req, prompt)
    }
}

/// Text of the structured block: the `<result>` body when present, else the
/// outermost `{...}` span, else the trimmed reply.
fn result_block(raw: &str) -> &str {
    if let Some(start) = raw.find("<result>") {
        let body = &raw[start + "<result>".len()..];
        let end = body.find("</result>").unwrap_or(body.len());
        return body[..end].trim();
    }
    let trimmed = raw.trim();
    match (trimmed.find('{'), trimmed.rfind('}')) {
        (Some(a), Some(b)) if a < b => &trimmed[a..=b],
        _ => trimmed,
    }
}

fn string_list(v: &Value, field: &str) -> Result<Vec<String>, String> {
    let items = v
        .get(field)
        .and_then(Value::as_array)
        .ok_or_else(|| format!("missing array field {field:?}"))?;
    items
        .iter()
        .map(|item| match item.as_str() {
            Some(s) if !s.trim().is_empty() => Ok(s.trim().to_string()),
            _ => Err(format!("{field:?} must hold non-empty strings")),
        })
        .collect()
}

/// Parse and validate a reply against the grammar of `kind`.
pub fn parse_response(kind: RequestKind, raw: &str) -> Result<LlmResult, String> {
    let block = result_block(raw);
    let value: Value = serde_json::from_str(block).map_err(|e| format!("not JSON: {e}"))?;
    match kind {
        RequestKind::ExtractConcepts => string_list(&value, "concepts").map(LlmResult::Concepts),
        RequestKind::ExpandSiblings => string_list(&value, "topics").map(LlmResult::Topics),
        RequestKind::InduceHierarchy => {
            let h: Hierarchy =
                serde_json::from_value(value).map_err(|e| format!("bad hierarchy: {e}"))?;
            if h.edges
                .iter()
                .any(|e| e.parent.trim().is_empty() || e.child.trim().is_empty())
            {
                return Err("edge with an empty endpoint".into());
            }
            Ok(LlmResult::Hierarchy(h))
        }
        RequestKind::LabelCluster | RequestKind::AlignTitle => {
            match value.get("title").and_then(Value::as_str) {
                Some(t) if !t.trim().is_empty() => Ok(LlmResult::Title(t.trim().to_string())),
                _ => Err("missing non-empty \"title\"".into()),
            }
        }
        RequestKind::ScoreConcept => {
            let n = value
                .get("score")
                .unwrap_or(&value)
                .as_f64()
                .ok_or_else(|| "missing numeric \"score\"".to_string())?;
            if n.fract() != 0.0 || !(1.0..=10.0).contains(&n) {
                return Err(format!("score {n} outside the integers 1..=10"));
            }
            Ok(LlmResult::Score(n as u8))
        }
        RequestKind::VerifyRedundancy => value
            .get("redundant")
            .unwrap_or(&value)
            .as_bool()
            .map(LlmResult::Redundant)
            .ok_or_else(|| "missing boolean \"redundant\"".into()),
    }
}

#[derive(Clone, Debug)]
pub struct RetryPolicy {
    /// Provider calls per exchange before a transport error is reported.
    pub transport_attempts: usize,
    /// Re-prompts after an unusable reply.
    pub repair_retries: usize,
    /// Initial backoff, doubled after each transport failure.
    pub backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            transport_attempts: 3,
            repair_retries: 2,
            backoff: Duration::from_millis(250),
        }
    }
}

/// Check applied to a parsed reply on top of the kind's grammar; a failure is
/// treated like a parse failure and triggers a repair prompt.
pub type ReplyCheck<'a> = &'a (dyn Fn(&LlmResult) -> Result<(), String> + Sync);

pub struct Gateway {
    provider: Arc<dyn Provider>,
    templates: TemplateSet,
    audit: Option<AuditLog>,
    policy: RetryPolicy,
}

impl Gateway {
    pub fn new(provider: Arc<dyn Provider>) -> Self {
        Self {
            provider,
            templates: TemplateSet::builtin(),
            audit: None,
            policy: RetryPolicy::default(),
        }
    }

    pub fn with_audit(mut self, audit: AuditLog) -> Self {
        self.audit = Some(audit);
        self
    }

    pub fn with_policy(mut self, policy: RetryPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_templates(mut self, templates: TemplateSet) -> Self {
        self.templates = templates;
        self
    }

    pub fn provider_name(&self) -> &str {
        self.provider.name()
    }

    pub fn complete(&self, req: &LlmRequest) -> Result<LlmResponse, LlmError> {
        self.complete_checked(req, &|_| Ok(()))
    }

    pub fn complete_checked(
        &self,
        req: &LlmRequest,
        check: ReplyCheck<'_>,
    ) -> Result<LlmResponse, LlmError> {
        let kind = req.kind();
        req.payload
            .validate()
            .map_err(|message| LlmError::InvalidPayload { kind, message })?;
        let base_prompt = self.templates.render(req)?;
        let mut prompt = base_prompt.clone();
        let mut attempts = 0;
        let mut last_raw = String::new();
        let mut last_problem = String::new();
        for _ in 0..=self.policy.repair_retries {
            let raw = self.call_with_backoff(req, &prompt, &mut attempts)?;
            match parse_response(kind, &raw).and_then(|r| check(&r).map(|()| r)) {
                Ok(result) => {
                    self.record(req, &prompt, &raw, attempts, true)?;
                    return Ok(LlmResponse {
                        result,
                        raw_text: raw,
                        attempts,
                    });
                }
                Err(problem) => {
                    log::debug!("{kind} reply rejected: {problem}");
                    prompt = prompt::repair_prompt(&base_prompt, kind, &problem);
                    last_raw = raw;
                    last_problem = problem;
                }
            }
        }
        self.record(req, &prompt, &last_raw, attempts, false)?;
        Err(LlmError::Unparseable {
            kind,
            attempts,
            message: last_problem,
            raw: last_raw,
        })
    }

    fn call_with_backoff(
        &self,
        req: &LlmRequest,
        prompt: &str,
        attempts: &mut usize,
    ) -> Result<String, LlmError> {
        let mut delay = self.policy.backoff;
        let tries = self.policy.transport_attempts.max(1);
        let mut last = String::new();
        for i in 0..tries {
            *attempts += 1;
            match self.provider.complete(req, prompt) {
                Ok(raw) => return Ok(raw),
                Err(ProviderError::Rejected(m)) => {
                    return Err(LlmError::Transport {
                        attempts: *attempts,
                        message: m,
                    })
                }
                Err(ProviderError::Transport(m)) => {
                    log::warn!("{} call failed ({}/{tries}): {m}", req.kind(), i + 1);
                    last = m;
                    if i + 1 < tries && !delay.is_zero() {
                        std::thread::sleep(delay);
                        delay *= 2;
                    }
                }
            }
        }
        Err(LlmError::Transport {
            attempts: *attempts,
            message: last,
        })
    }

    fn record(
        &self,
        req: &LlmRequest,
        prompt: &str,
        raw: &str,
        attempts: usize,
        ok: bool,
    ) -> Result<(), LlmError> {
        match &self.audit {
            Some(log) => log.append(&AuditRecord {
                kind: req.kind(),
                payload_digest: req.digest(),
                prompt: prompt.to_string(),
                response: raw.to_string(),
                attempts,
                ok,
            }),
            None => Ok(()),
        }
    }
}

/// Wrap a JSON value in the reply block format.
pub fn result_text(value: &Value) -> String {
    format!("<result>{value}</result>")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;
    use std::sync::Mutex;

    /// Replies from a fixed script, then repeats the last entry.
    struct Scripted {
        replies: Mutex<Vec<Result<String, ProviderError>>>,
        prompts: Mutex<Vec<String>>,
    }

    impl Scripted {
        fn new(replies: Vec<Result<&str, ProviderError>>) -> Self {
            Self {
                replies: Mutex::new(
                    replies
                        .into_iter()
                        .rev()
                        .map(|r| r.map(String::from))
                        .collect(),
                ),
                prompts: Mutex::new(Vec::new()),
            }
        }
    }

    impl Provider for Scripted {
        fn name(&self) -> &str {
            "scripted"
        }
        fn complete(&self, _req: &LlmRequest, prompt: &str) -> Result<String, ProviderError> {
            self.prompts.lock().unwrap().push(prompt.to_string());
            let mut r = self.replies.lock().unwrap();
            if r.len() > 1 {
                r.pop().unwrap()
            } else {
                r.last().cloned().unwrap()
            }
        }
    }

    fn fast(p: Scripted) -> (Arc<Scripted>, Gateway) {
        let p = Arc::new(p);
        let g = Gateway::new(p.clone()).with_policy(RetryPolicy {
            backoff: Duration::ZERO,
            ..RetryPolicy::default()
        });
        (p, g)
    }

    fn score_req() -> LlmRequest {
        LlmRequest::new(
            Payload::ScoreConcept {
                title: "graph pruning".into(),
                paper_count: 3,
                sample_titles: vec![],
            },
            "en",
        )
    }

    #[test]
    fn malformed_then_valid_takes_two_attempts() {
        let (p, g) = fast(Scripted::new(vec![
            Ok("sure, seven"),
            Ok("<result>{\"score\": 7}</result>"),
        ]));
        let r = g.complete(&score_req()).unwrap();
        assert_eq!(r.result, LlmResult::Score(7));
        assert_eq!(r.attempts, 2);
        let prompts = p.prompts.lock().unwrap();
        assert!(prompts[1].contains("could not be used"));
    }

    #[test]
    fn out_of_range_score_exhausts_repairs() {
        let (_, g) = fast(Scripted::new(vec![Ok("11")]));
        match g.complete(&score_req()) {
            Err(LlmError::Unparseable { attempts, raw, .. }) => {
                assert_eq!(attempts, 3);
                assert_eq!(raw, "11");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn transport_failures_are_retried_three_times() {
        let (_, g) = fast(Scripted::new(vec![
            Err(ProviderError::Transport("reset".into())),
            Err(ProviderError::Transport("reset".into())),
            Ok("{\"score\": 4}"),
        ]));
        assert_eq!(g.complete(&score_req()).unwrap().attempts, 3);
        let (_, g) = fast(Scripted::new(vec![Err(ProviderError::Transport(
            "down".into(),
        ))]));
        assert!(matches!(
            g.complete(&score_req()),
            Err(LlmError::Transport { attempts: 3, .. })
        ));
        let (_, g) = fast(Scripted::new(vec![Err(ProviderError::Rejected(
            "401".into(),
        ))]));
        assert!(matches!(
            g.complete(&score_req()),
            Err(LlmError::Transport { attempts: 1, .. })
        ));
    }

    #[test]
    fn grammar_per_kind() {
        use RequestKind::*;
        assert_eq!(
            parse_response(ScoreConcept, " 3 ").unwrap(),
            LlmResult::Score(3)
        );
        assert!(parse_response(ScoreConcept, "0").is_err());
        assert!(parse_response(ScoreConcept, "{\"score\": 6.5}").is_err());
        assert_eq!(
            parse_response(
                LabelCluster,
                "Heading:\n<result>{\"title\": \" Pruning \"}</result> done"
            )
            .unwrap(),
            LlmResult::Title("Pruning".into())
        );
        assert!(parse_response(AlignTitle, "{\"title\": \"\"}").is_err());
        assert_eq!(
            parse_response(VerifyRedundancy, "{\"redundant\": false}").unwrap(),
            LlmResult::Redundant(false)
        );
        assert_eq!(
            parse_response(ExtractConcepts, "Here: {\"concepts\": [\"a\", \"b\"]}").unwrap(),
            LlmResult::Concepts(vec!["a".into(), "b".into()])
        );
        assert!(parse_response(ExpandSiblings, "{\"topics\": [1]}").is_err());
        let h = parse_response(
            InduceHierarchy,
            r#"{"edges": [{"parent": "x", "child": "y"}]}"#,
        )
        .unwrap();
        assert_eq!(
            h,
            LlmResult::Hierarchy(Hierarchy {
                root: None,
                edges: vec![Edge {
                    parent: "x".into(),
                    child: "y".into()
                }]
            })
        );
    }

    #[test]
    fn reply_checks_trigger_repair() {
        let (_, g) = fast(Scripted::new(vec![
            Ok("{\"title\": \"unknown\"}"),
            Ok("{\"title\": \"known\"}"),
        ]));
        let req = LlmRequest::new(
            Payload::LabelCluster {
                candidates: vec![Candidate {
                    term: "known".into(),
                    count: 1,
                }],
                paper_titles: vec![],
                child_titles: vec![],
            },
            "en",
        );
        let check = |r: &LlmResult| match r {
            LlmResult::Title(t) if t == "known" => Ok(()),
            _ => Err("not a candidate".to_string()),
        };
        let r = g.complete_checked(&req, &check).unwrap();
        assert_eq!(
            (r.result, r.attempts),
            (LlmResult::Title("known".into()), 2)
        );
    }

    #[test]
    fn invalid_payload_is_rejected_before_dispatch() {
        let (p, g) = fast(Scripted::new(vec![Ok("{}")]));
        let req = LlmRequest::new(Payload::InduceHierarchy { concepts: vec![] }, "en");
        assert!(matches!(
            g.complete(&req),
            Err(LlmError::InvalidPayload { .. })
        ));
        assert!(p.prompts.lock().unwrap().is_empty());
    }

    #[test]
    fn digest_is_stable_and_payload_sensitive() {
        let a = score_req();
        assert_eq!(a.digest(), score_req().digest());
        let mut b = score_req();
        b.payload = Payload::ScoreConcept {
            title: "graph pruning".into(),
            paper_count: 4,
            sample_titles: vec![],
        };
        assert_ne!(a.digest(), b.digest());
        assert_eq!(
            a.payload.canonical_json(),
            json!({"score_concept": {"paper_count": 3, "sample_titles": [], "title": "graph pruning"}}).to_string()
        );
    }
}
