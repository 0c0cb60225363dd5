use thiserror::Error;

use super::template::TemplateId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    /// Network or server-side failure worth retrying.
    #[error("transport error: {0}")]
    Transport(String),
    #[error("script exhausted: no response left for {0}")]
    ScriptExhausted(TemplateId),
    #[error("backend rejected request: {0}")]
    Rejected(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("backend unavailable after {attempts} attempts: {last}")]
    BackendUnavailable { attempts: u32, last: String },
    #[error("script exhausted: no response left for {0}")]
    ScriptExhausted(TemplateId),
    #[error("template {template} needs variable {{{variable}}}")]
    TemplateVariableMissing {
        template: TemplateId,
        variable: String,
    },
    #[error("could not parse model output ({reason})")]
    ParseFailure { raw: String, reason: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend rejected request: {0}")]
    Rejected(String),
    #[error("backend configuration: {0}")]
    Config(String),
}
