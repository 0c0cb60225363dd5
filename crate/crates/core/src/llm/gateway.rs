use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use super::backend::{Backend, BackendRequest};
use super::error::{BackendError, GatewayError};
use super::fields::parse_fields;
use super::template::{TemplateId, TemplateSet};

/// Parse repairs allowed after the first reply.
pub const MAX_REPAIRS: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationRequest {
    pub template_id: TemplateId,
    pub variables: BTreeMap<String, String>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl GenerationRequest {
    pub fn new(template_id: TemplateId) -> Self {
        Self {
            template_id,
            variables: BTreeMap::new(),
            temperature: template_id.default_temperature(),
            max_tokens: 1024,
        }
    }

    pub fn var(mut self, name: &str, value: impl Into<String>) -> Self {
        self.variables.insert(name.to_string(), value.into());
        self
    }

    pub fn temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    fn validate(&self) -> Result<(), GatewayError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationResult {
    pub text: String,
    pub backend: String,
    pub tokens_used: u64,
    pub call_index: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_millis(250),
        }
    }
}

impl RetryPolicy {
    pub fn immediate() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::ZERO,
        }
    }
}

/// Counting semaphore bounding in-flight backend calls.
struct Limiter {
    permits: Mutex<usize>,
    freed: Condvar,
}

impl Limiter {
    fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits.max(1)),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut permits = self.permits.lock().expect("limiter poisoned");
        while *permits == 0 {
            permits = self.freed.wait(permits).expect("limiter poisoned");
        }
        *permits -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Limiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().expect("limiter poisoned") += 1;
        self.0.freed.notify_one();
    }
}

/// Uniform entry point to a text-generation backend.
///
/// Counts every call that returns, per template, so engines and the
/// evaluation harness can reconcile their step accounting against it.
pub struct Gateway {
    backend: Arc<dyn Backend>,
    templates: Arc<TemplateSet>,
    retry: RetryPolicy,
    limiter: Limiter,
    call_index: AtomicU64,
    per_template: [AtomicU64; 6],
    tokens: AtomicU64,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("backend", &self.backend.name())
            .field("calls", &self.calls())
            .finish()
    }
}

pub const DEFAULT_IN_FLIGHT: usize = 4;

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>) -> Self {
        let retry = if backend.is_deterministic() {
            RetryPolicy::immediate()
        } else {
            RetryPolicy::default()
        };
        Self {
            backend,
            templates: Arc::new(TemplateSet::builtin()),
            retry,
            limiter: Limiter::new(DEFAULT_IN_FLIGHT),
            call_index: AtomicU64::new(0),
            per_template: Default::default(),
            tokens: AtomicU64::new(0),
        }
    }

    pub fn with_templates(mut self, templates: Arc<TemplateSet>) -> Self {
        self.templates = templates;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_max_in_flight(mut self, limit: usize) -> Self {
        self.limiter = Limiter::new(limit);
        self
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn is_deterministic(&self) -> bool {
        self.backend.is_deterministic()
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    /// Total calls that returned a reply.
    pub fn calls(&self) -> u64 {
        self.call_index.load(Ordering::SeqCst)
    }

    pub fn calls_for(&self, template: TemplateId) -> u64 {
        self.per_template[template.index()].load(Ordering::SeqCst)
    }

    pub fn tokens_used(&self) -> u64 {
        self.tokens.load(Ordering::SeqCst)
    }

    pub fn complete(&self, request: &GenerationRequest) -> Result<GenerationResult, GatewayError> {
        request.validate()?;
        let prompt = self.templates.render(request.template_id, &request.variables)?;
        self.send(request, &prompt)
    }

    fn send(
        &self,
        request: &GenerationRequest,
        prompt: &str,
    ) -> Result<GenerationResult, GatewayError> {
        let backend_request = BackendRequest {
            template: request.template_id,
            prompt,
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        };
        let mut last = String::new();
        for attempt in 0..self.retry.max_attempts.max(1) {
            if attempt > 0 && !self.retry.base_delay.is_zero() {
                std::thread::sleep(self.retry.base_delay * 2u32.pow(attempt - 1));
            }
            let outcome = {
                let _permit = self.limiter.acquire();
                self.backend.generate(&backend_request)
            };
            match outcome {
                Ok(reply) => {
                    let call_index = self.call_index.fetch_add(1, Ordering::SeqCst) + 1;
                    self.per_template[request.template_id.index()].fetch_add(1, Ordering::SeqCst);
                    self.tokens.fetch_add(reply.tokens_used, Ordering::SeqCst);
                    return Ok(GenerationResult {
                        text: reply.text,
                        backend: self.backend.name().to_string(),
                        tokens_used: reply.tokens_used,
                        call_index,
                    });
                }
                Err(BackendError::Transport(e)) => {
                    tracing::warn!(template = %request.template_id, attempt, error = %e, "backend call failed");
                    last = e;
                }
                Err(BackendError::ScriptExhausted(t)) => return Err(GatewayError::ScriptExhausted(t)),
                Err(BackendError::Rejected(e)) => return Err(GatewayError::Rejected(e)),
            }
        }
        Err(GatewayError::BackendUnavailable {
            attempts: self.retry.max_attempts.max(1),
            last,
        })
    }

    /// Completes and extracts every field in `schema`, repairing at most twice.
    pub fn complete_parsed(
        &self,
        request: &GenerationRequest,
        schema: &[&str],
    ) -> Result<BTreeMap<String, String>, GatewayError> {
        self.complete_with(request, schema, |fields| Ok(fields.clone()))
    }

    /// Like [`Gateway::complete_parsed`] but also runs `accept` on the parsed
    /// fields; a rejection triggers the same bounded repair loop.
    pub fn complete_with<T>(
        &self,
        request: &GenerationRequest,
        schema: &[&str],
        accept: impl Fn(&BTreeMap<String, String>) -> Result<T, String>,
    ) -> Result<T, GatewayError> {
        request.validate()?;
        let prompt = self.templates.render(request.template_id, &request.variables)?;
        let mut current = prompt.clone();
        let mut failure = (String::new(), String::new());
        for _ in 0..=MAX_REPAIRS {
            let result = self.send(request, &current)?;
            match parse_fields(&result.text, schema).and_then(|f| accept(&f)) {
                Ok(value) => return Ok(value),
                Err(reason) => {
                    current = repair_prompt(&prompt, &reason, schema);
                    failure = (result.text, reason);
                }
            }
        }
        Err(GatewayError::ParseFailure {
            raw: failure.0,
            reason: failure.1,
        })
    }
}

fn repair_prompt(original: &str, reason: &str, schema: &[&str]) -> String {
    let fields: Vec<String> = schema.iter().map(|f| format!("«{f}»…«/{f}»")).collect();
    format!(
        "{original}\n\nYour previous answer could not be used: {reason}.\nReply again and include exactly these fields: {}",
        fields.join(" ")
    )
}
