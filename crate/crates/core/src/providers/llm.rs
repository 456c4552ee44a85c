//! Chat-completion transport plus replay and recording wrappers.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{with_retries, LlmBackend, ProviderError};

/// Endpoint settings for an OpenAI-style chat-completion server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    /// Full URL of the chat-completions route.
    pub url: String,
    pub model: String,
    /// Environment variable holding the bearer token, if any.
    pub token_env: Option<String>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub retries: usize,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            url: String::new(),
            model: String::new(),
            token_env: Some("TAXOFORGE_LLM_TOKEN".into()),
            temperature: 0.0,
            max_tokens: 1024,
            timeout_secs: 120,
            retries: 3,
        }
    }
}

pub struct HttpLlm {
    config: LlmConfig,
    token: Option<String>,
    agent: ureq::Agent,
}

impl HttpLlm {
    pub fn new(config: LlmConfig) -> Result<Self, ProviderError> {
        if config.url.trim().is_empty() {
            return Err(ProviderError::Config("LLM endpoint URL is not set".into()));
        }
        if config.model.trim().is_empty() {
            return Err(ProviderError::Config("LLM model name is not set".into()));
        }
        let token = config.token_env.as_deref().and_then(|v| std::env::var(v).ok()).filter(|t| !t.is_empty());
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(config.timeout_secs)).build();
        Ok(HttpLlm { config, token, agent })
    }

    fn call_once(&self, prompt: &str) -> Result<String, ProviderError> {
        let mut req = self.agent.post(&self.config.url).set("Content-Type", "application/json");
        if let Some(t) = &self.token {
            req = req.set("Authorization", &format!("Bearer {t}"));
        }
        let body = serde_json::json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        });
        let resp = req.send_json(body).map_err(ProviderError::from_ureq)?;
        let value: serde_json::Value =
            resp.into_json().map_err(|e| ProviderError::InvalidResponse(format!("completion body: {e}")))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| ProviderError::InvalidResponse("no choices[0].message.content in response".into()))
    }
}

impl LlmBackend for HttpLlm {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        with_retries(self.config.retries, 500, || self.call_once(prompt))
    }

    fn name(&self) -> String {
        format!("http:{}#{}", self.config.url, self.config.model)
    }
}

/// Hex SHA-256 of the prompt text; the replay file name stem.
pub fn prompt_key(prompt: &str) -> String {
    let digest = Sha256::digest(prompt.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Answers from `<dir>/<prompt_key>.txt`. A missing file is an error, so a
/// replay run never silently diverges from its recording.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    dir: PathBuf,
}

impl ReplayBackend {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, ProviderError> {
        let dir = dir.into();
        if !dir.is_dir() {
            return Err(ProviderError::Config(format!("replay directory {} does not exist", dir.display())));
        }
        Ok(ReplayBackend { dir })
    }

    pub fn path_for(&self, prompt: &str) -> PathBuf {
        self.dir.join(format!("{}.txt", prompt_key(prompt)))
    }
}

impl LlmBackend for ReplayBackend {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        let path = self.path_for(prompt);
        std::fs::read_to_string(&path).map_err(|_| ProviderError::ReplayMiss { key: prompt_key(prompt) })
    }

    fn name(&self) -> String {
        format!("replay:{}", self.dir.display())
    }
}

/// Passes calls through to `inner` and stores each response in replay
/// format.
pub struct RecordingBackend<B> {
    inner: B,
    dir: PathBuf,
}

impl<B: LlmBackend> RecordingBackend<B> {
    pub fn new(inner: B, dir: &Path) -> Result<Self, ProviderError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| ProviderError::Config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(RecordingBackend { inner, dir: dir.to_path_buf() })
    }
}

impl<B: LlmBackend> LlmBackend for RecordingBackend<B> {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        let out = self.inner.complete(prompt)?;
        let path = self.dir.join(format!("{}.txt", prompt_key(prompt)));
        if let Err(e) = std::fs::write(&path, &out) {
            tracing::warn!(path = %path.display(), error = %e, "could not record response");
        }
        Ok(out)
    }

    fn name(&self) -> String {
        format!("record:{}", self.inner.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Echo;
    impl LlmBackend for Echo {
        fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
            Ok(format!("echo {prompt}"))
        }
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let rec = RecordingBackend::new(Echo, dir.path()).unwrap();
        assert_eq!(rec.complete("hi").unwrap(), "echo hi");
        let replay = ReplayBackend::new(dir.path()).unwrap();
        assert_eq!(replay.complete("hi").unwrap(), "echo hi");
        assert!(matches!(replay.complete("other"), Err(ProviderError::ReplayMiss { .. })));
    }

    #[test]
    fn key_is_sha256_hex() {
        assert_eq!(prompt_key(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn missing_endpoint_is_a_config_error() {
        assert!(matches!(HttpLlm::new(LlmConfig::default()), Err(ProviderError::Config(_))));
    }
}
