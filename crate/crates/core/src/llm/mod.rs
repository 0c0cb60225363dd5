//! Text-generation gateway: prompt templates, structured-output parsing,
//! retries, call accounting and pluggable backends.

mod backend;
mod error;
mod fields;
mod gateway;
mod synthetic;
mod template;

pub use backend::{
    Backend, BackendReply, BackendRequest, LiveBackend, LiveConfig, Matcher, Script, ScriptEntry,
    ScriptedBackend, DEFAULT_BASE_URL,
};
pub use error::{BackendError, GatewayError};
pub use fields::{extract_field, field_or_raw, parse_fields, render_field};
pub use gateway::{
    Gateway, GenerationRequest, GenerationResult, RetryPolicy, DEFAULT_IN_FLIGHT, MAX_REPAIRS,
};
pub use synthetic::SyntheticBackend;
pub use template::{TemplateId, TemplateSet};
