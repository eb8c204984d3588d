use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{LlmError, RequestKind};
use crate::fsutil;

/// One completed exchange; `response` is the final raw reply.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub kind: RequestKind,
    pub payload_digest: String,
    pub prompt: String,
    pub response: String,
    pub attempts: usize,
    pub ok: bool,
}

/// Append-only line-delimited log shared by concurrent callers.
#[derive(Debug)]
pub struct AuditLog {
    file: Mutex<File>,
}

impl AuditLog {
    /// Creates (truncating) the log file.
    pub fn create(path: &Path) -> Result<Self, LlmError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| LlmError::Audit(e.to_string()))?;
        }
        let file =
            File::create(path).map_err(|e| LlmError::Audit(format!("{}: {e}", path.display())))?;
        Ok(Self {
            file: Mutex::new(file),
        })
    }

    pub fn append(&self, record: &AuditRecord) -> Result<(), LlmError> {
        let mut line = serde_json::to_string(record).map_err(|e| LlmError::Audit(e.to_string()))?;
        line.push('\n');
        let mut file = self.file.lock().unwrap_or_else(|p| p.into_inner());
        file.write_all(line.as_bytes())
            .map_err(|e| LlmError::Audit(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Vec<AuditRecord>, LlmError> {
        let file =
            File::open(path).map_err(|e| LlmError::Audit(format!("{}: {e}", path.display())))?;
        let mut out = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| LlmError::Audit(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(
                serde_json::from_str(&line)
                    .map_err(|e| LlmError::Audit(format!("line {}: {e}", i + 1)))?,
            );
        }
        Ok(out)
    }
}

/// Turn the successful exchanges of an audit log into mock fixtures, so a
/// rerun replays the logged replies. Returns the number of fixtures written.
pub fn fixtures_from_audit(log: &Path, dir: &Path) -> Result<usize, LlmError> {
    let mut written = 0;
    for record in AuditLog::read(log)?.into_iter().filter(|r| r.ok) {
        fsutil::write_atomic(
            &dir.join(format!("{}.txt", record.payload_digest)),
            record.response.as_bytes(),
        )
        .map_err(|e| LlmError::Audit(e.to_string()))?;
        written += 1;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{Gateway, LlmRequest, MockProvider, Payload, Provider, RuleSet};
    use std::sync::Arc;

    #[test]
    fn log_replays_as_fixtures() {
        let dir = tempfile::tempdir().unwrap();
        let log_path = dir.path().join("audit.jsonl");
        let g = Gateway::new(Arc::new(MockProvider::default()))
            .with_audit(AuditLog::create(&log_path).unwrap());
        let req = LlmRequest::new(
            Payload::ScoreConcept {
                title: "pruning".into(),
                paper_count: 1,
                sample_titles: vec![],
            },
            "en",
        );
        let first = g.complete(&req).unwrap();
        let records = AuditLog::read(&log_path).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].payload_digest, req.digest());
        assert!(records[0].prompt.contains("pruning"));

        let fixtures = dir.path().join("fx");
        assert_eq!(fixtures_from_audit(&log_path, &fixtures).unwrap(), 1);
        let replay = MockProvider::new(Some(fixtures), RuleSet { max_concepts: 0 });
        assert_eq!(replay.complete(&req, "").unwrap(), first.raw_text);
    }
}
