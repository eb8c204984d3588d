//! OpenAI-compatible chat-completion backend.

use std::time::Duration;

use serde_json::{json, Value};

use super::{LlmRequest, Provider, ProviderError};

pub const ENV_BASE_URL: &str = "TAXO_LLM_BASE_URL";
pub const ENV_MODEL: &str = "TAXO_LLM_MODEL";
pub const ENV_KEY: &str = "TAXO_LLM_KEY";

const SYSTEM: &str = "You help organize scientific literature into taxonomies. Follow the requested reply format exactly.";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RemoteConfig {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl RemoteConfig {
    /// Explicit values win; missing ones come from the environment. The key is
    /// only ever read from the environment.
    pub fn resolve(
        base_url: Option<&str>,
        model: Option<&str>,
        timeout: Duration,
    ) -> Result<Self, String> {
        let pick = |explicit: Option<&str>, var: &str| {
            explicit
                .map(str::to_string)
                .or_else(|| std::env::var(var).ok())
                .filter(|v| !v.trim().is_empty())
                .ok_or_else(|| {
                    format!("remote provider needs {var} (or the matching config field)")
                })
        };
        Ok(Self {
            base_url: pick(base_url, ENV_BASE_URL)?,
            model: pick(model, ENV_MODEL)?,
            api_key: std::env::var(ENV_KEY).ok().filter(|k| !k.is_empty()),
            timeout,
        })
    }
}

pub struct RemoteProvider {
    config: RemoteConfig,
    agent: ureq::Agent,
    name: String,
}

impl RemoteProvider {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .new_agent();
        let name = format!("remote:{}", config.model);
        Self {
            config,
            agent,
            name,
        }
    }

    fn endpoint(&self) -> String {
        format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        )
    }
}

impl Provider for RemoteProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, _req: &LlmRequest, prompt: &str) -> Result<String, ProviderError> {
        let body = json!({
            "model": self.config.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": SYSTEM},
                {"role": "user", "content": prompt},
            ],
        });
        let mut call = self.agent.post(self.endpoint());
        if let Some(key) = &self.config.api_key {
            call = call.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = call
            .send_json(&body)
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        match status {
            200..=299 => {}
            408 | 429 | 500..=599 => {
                return Err(ProviderError::Transport(format!("HTTP {status}: {text}")))
            }
            _ => return Err(ProviderError::Rejected(format!("HTTP {status}: {text}"))),
        }
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| ProviderError::Transport(format!("bad completion body: {e}")))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ProviderError::Transport("completion without message content".into()))
    }
}
