//! Text-generation backends: scripted (deterministic) and live (HTTP).

use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::error::{BackendError, GatewayError};
use super::template::TemplateId;

pub struct BackendRequest<'a> {
    pub template: TemplateId,
    pub prompt: &'a str,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BackendReply {
    pub text: String,
    pub tokens_used: u64,
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &str;

    fn generate(&self, request: &BackendRequest<'_>) -> Result<BackendReply, BackendError>;

    /// Scripted backends must be driven sequentially to stay deterministic.
    fn is_deterministic(&self) -> bool {
        false
    }
}

/// Which requests a script entry may answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Matcher {
    Any,
    Template(TemplateId),
}

impl Matcher {
    fn matches(self, template: TemplateId) -> bool {
        match self {
            Matcher::Any => true,
            Matcher::Template(t) => t == template,
        }
    }
}

impl Serialize for Matcher {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Matcher::Any => s.serialize_str("*"),
            Matcher::Template(t) => s.serialize_str(t.as_str()),
        }
    }
}

impl<'de> Deserialize<'de> for Matcher {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        if raw == "*" {
            Ok(Matcher::Any)
        } else {
            raw.parse().map(Matcher::Template).map_err(serde::de::Error::custom)
        }
    }
}

fn one() -> u32 {
    1
}

fn is_one(n: &u32) -> bool {
    *n == 1
}

/// One scripted reply, optionally usable `repeat` times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub template: Matcher,
    pub text: String,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub repeat: u32,
}

/// Deterministic backend replaying a fixed list of replies.
///
/// A request consumes the earliest entry whose matcher accepts its template.
/// Entries are never reused beyond their `repeat` count; running out is an error.
pub struct ScriptedBackend {
    entries: Vec<ScriptEntry>,
    remaining: Mutex<Vec<u32>>,
}

impl ScriptedBackend {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        let remaining = entries.iter().map(|e| e.repeat).collect();
        Self {
            entries,
            remaining: Mutex::new(remaining),
        }
    }

    /// Replies answering any template, in order.
    pub fn sequence<I, S>(texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(
            texts
                .into_iter()
                .map(|t| ScriptEntry {
                    template: Matcher::Any,
                    text: t.into(),
                    repeat: 1,
                })
                .collect(),
        )
    }

    pub fn from_jsonl(body: &str) -> Result<Self, GatewayError> {
        let mut entries = Vec::new();
        for (i, line) in body.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: ScriptEntry = serde_json::from_str(line)
                .map_err(|e| GatewayError::Config(format!("script line {}: {e}", i + 1)))?;
            entries.push(entry);
        }
        Ok(Self::new(entries))
    }

    pub fn entries(&self) -> &[ScriptEntry] {
        &self.entries
    }

    /// Number of replies not yet consumed.
    pub fn remaining(&self) -> u64 {
        self.remaining
            .lock()
            .expect("script state poisoned")
            .iter()
            .map(|&n| n as u64)
            .sum()
    }
}

/// Builder for scripts keyed by template.
#[derive(Clone, Debug, Default)]
pub struct Script {
    entries: Vec<ScriptEntry>,
}

impl Script {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reply(mut self, template: TemplateId, text: impl Into<String>) -> Self {
        self.push(template, text);
        self
    }

    pub fn push(&mut self, template: TemplateId, text: impl Into<String>) -> &mut Self {
        self.push_repeated(template, text, 1)
    }

    pub fn push_repeated(
        &mut self,
        template: TemplateId,
        text: impl Into<String>,
        repeat: u32,
    ) -> &mut Self {
        self.entries.push(ScriptEntry {
            template: Matcher::Template(template),
            text: text.into(),
            repeat,
        });
        self
    }

    pub fn extend(&mut self, other: Script) -> &mut Self {
        self.entries.extend(other.entries);
        self
    }

    pub fn entries(&self) -> &[ScriptEntry] {
        &self.entries
    }

    /// Reads the line-delimited form written by [`Script::to_jsonl`].
    pub fn from_jsonl(body: &str) -> Result<Self, GatewayError> {
        Ok(Self {
            entries: ScriptedBackend::from_jsonl(body)?.entries,
        })
    }

    pub fn to_jsonl(&self) -> String {
        self.entries
            .iter()
            .map(|e| serde_json::to_string(e).expect("script entry serializes") + "\n")
            .collect()
    }

    pub fn build(&self) -> ScriptedBackend {
        ScriptedBackend::new(self.entries.clone())
    }
}

impl Backend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn generate(&self, request: &BackendRequest<'_>) -> Result<BackendReply, BackendError> {
        let mut remaining = self.remaining.lock().expect("script state poisoned");
        let slot = self
            .entries
            .iter()
            .zip(remaining.iter())
            .position(|(entry, left)| *left > 0 && entry.template.matches(request.template))
            .ok_or(BackendError::ScriptExhausted(request.template))?;
        remaining[slot] -= 1;
        let text = self.entries[slot].text.clone();
        Ok(BackendReply {
            tokens_used: text.split_whitespace().count() as u64,
            text,
        })
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

/// Credentials and endpoint for an OpenAI-compatible chat completions API.
#[derive(Clone, Default, Deserialize)]
pub struct LiveConfig {
    #[serde(default)]
    pub api_key: Option<String>,
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl std::fmt::Debug for LiveConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LiveConfig")
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("base_url", &self.base_url)
            .field("model", &self.model)
            .finish()
    }
}

pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

impl LiveConfig {
    /// Reads `MOOSE_API_KEY`, `MOOSE_API_BASE_URL` and `MOOSE_MODEL`.
    pub fn from_env() -> Self {
        Self {
            api_key: std::env::var("MOOSE_API_KEY").ok(),
            base_url: std::env::var("MOOSE_API_BASE_URL").ok(),
            model: std::env::var("MOOSE_MODEL").ok(),
            seed: None,
        }
    }

    /// Fields set here win; the rest fall back to `fallback`.
    pub fn or(self, fallback: LiveConfig) -> Self {
        Self {
            api_key: self.api_key.or(fallback.api_key),
            base_url: self.base_url.or(fallback.base_url),
            model: self.model.or(fallback.model),
            seed: self.seed.or(fallback.seed),
        }
    }
}

pub struct LiveBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: String,
    model: String,
    seed: Option<u64>,
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Result<Self, GatewayError> {
        let api_key = config
            .api_key
            .filter(|k| !k.is_empty())
            .ok_or_else(|| GatewayError::Config("MOOSE_API_KEY is not set".into()))?;
        let model = config
            .model
            .filter(|m| !m.is_empty())
            .ok_or_else(|| GatewayError::Config("MOOSE_MODEL is not set".into()))?;
        let base = config
            .base_url
            .unwrap_or_else(|| DEFAULT_BASE_URL.to_string());
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(180))
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: format!("{}/chat/completions", base.trim_end_matches('/')),
            api_key,
            model,
            seed: config.seed,
        })
    }
}

impl Backend for LiveBackend {
    fn name(&self) -> &str {
        &self.model
    }

    fn generate(&self, request: &BackendRequest<'_>) -> Result<BackendReply, BackendError> {
        let mut body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        if let Some(seed) = self.seed {
            body["seed"] = json!(seed);
        }
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(BackendError::Transport(format!("http {status}")));
        }
        if !status.is_success() {
            let detail = response.text().unwrap_or_default();
            return Err(BackendError::Rejected(format!("http {status}: {detail}")));
        }
        let value: serde_json::Value = response
            .json()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let text = value["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| BackendError::Rejected("response has no message content".into()))?
            .to_string();
        let tokens_used = value["usage"]["total_tokens"]
            .as_u64()
            .unwrap_or_else(|| text.split_whitespace().count() as u64);
        Ok(BackendReply { text, tokens_used })
    }
}
