use std::sync::Arc;

use crate::llm::{Gateway, LiveBackend, LiveConfig, Script, SyntheticBackend};

/// Builds the gateway a session talks to. Credentials in `config` live only
/// in the returned gateway; nothing here is persisted.
pub trait BackendProvider: Send + Sync {
    fn gateway(&self, config: &LiveConfig) -> Result<Gateway, String>;
}

impl<F> BackendProvider for F
where
    F: Fn(&LiveConfig) -> Result<Gateway, String> + Send + Sync,
{
    fn gateway(&self, config: &LiveConfig) -> Result<Gateway, String> {
        self(config)
    }
}

/// OpenAI-compatible endpoint; request fields override the environment.
pub struct LiveProvider;

impl BackendProvider for LiveProvider {
    fn gateway(&self, config: &LiveConfig) -> Result<Gateway, String> {
        let merged = config.clone().or(LiveConfig::from_env());
        let backend = LiveBackend::new(merged).map_err(|e| e.to_string())?;
        Ok(Gateway::new(Arc::new(backend)))
    }
}

/// Every session gets a fresh copy of the same script.
pub struct ScriptedProvider(pub Script);

impl BackendProvider for ScriptedProvider {
    fn gateway(&self, _: &LiveConfig) -> Result<Gateway, String> {
        Ok(Gateway::new(Arc::new(self.0.build())))
    }
}

pub struct SyntheticProvider(pub u64);

impl BackendProvider for SyntheticProvider {
    fn gateway(&self, config: &LiveConfig) -> Result<Gateway, String> {
        Ok(Gateway::new(Arc::new(SyntheticBackend::new(config.seed.unwrap_or(self.0)))))
    }
}
