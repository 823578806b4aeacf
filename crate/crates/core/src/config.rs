//! One-file run configuration shared by the CLI and the service.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assessment::AssessmentConfig;
use crate::cognitive::CognitiveConfig;
use crate::provider::{ProviderError, RemoteConfig, RemoteProvider, ReplayProvider, ScriptedProvider, TextProvider};
use crate::simulation::{build_context, EventConfig, PairCriteria};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
    #[error("provider: {0}")]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderSelection {
    /// Offline deterministic provider; needs the run-level seed.
    Scripted {
        #[serde(default)]
        script: Option<PathBuf>,
        #[serde(default)]
        strict: bool,
    },
    Replay { tape: PathBuf },
    Remote(#[serde(default)] RemoteConfig),
}

impl Default for ProviderSelection {
    fn default() -> Self {
        ProviderSelection::Scripted {
            script: None,
            strict: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub provider: ProviderSelection,
    /// Session-context overrides by parameter key.
    pub context: BTreeMap<String, serde_json::Value>,
    pub rounds: Option<u32>,
    pub batch_size: usize,
    pub threshold: f64,
    pub criteria: PairCriteria,
    pub cognitive: CognitiveConfig,
    pub assessment: AssessmentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let event = EventConfig::default();
        Self {
            seed: None,
            provider: ProviderSelection::default(),
            context: BTreeMap::new(),
            rounds: None,
            batch_size: event.batch_size,
            threshold: event.threshold,
            criteria: event.criteria,
            cognitive: CognitiveConfig::default(),
            assessment: AssessmentConfig::default(),
        }
    }
}

impl RunConfig {
    /// A scripted run with the given seed and every other default.
    pub fn scripted(seed: u64) -> Self {
        Self {
            seed: Some(seed),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if matches!(self.provider, ProviderSelection::Scripted { .. }) && self.seed.is_none() {
            return Err(ConfigError::Invalid("seed is required for scripted runs".into()));
        }
        if let ProviderSelection::Remote(r) = &self.provider {
            if r.base_url.trim().is_empty() || r.model.trim().is_empty() {
                return Err(ConfigError::Invalid("remote provider needs base_url and model".into()));
            }
            if r.max_attempts == 0 {
                return Err(ConfigError::Invalid("remote max_attempts must be >= 1".into()));
            }
        }
        self.cognitive.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.assessment.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.event_config()?;
        Ok(())
    }

    pub fn event_config(&self) -> Result<EventConfig, ConfigError> {
        let mut context = build_context(&self.context).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Some(r) = self.rounds {
            context.rounds = r;
        }
        let cfg = EventConfig {
            context,
            batch_size: self.batch_size,
            threshold: self.threshold,
            criteria: self.criteria.clone(),
        };
        cfg.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    pub fn build_provider(&self) -> Result<Arc<dyn TextProvider>, ConfigError> {
        Ok(match &self.provider {
            ProviderSelection::Scripted { script, strict } => {
                let seed = self
                    .seed
                    .ok_or_else(|| ConfigError::Invalid("seed is required for scripted runs".into()))?;
                let base = match script {
                    Some(path) => ScriptedProvider::from_file(path)?,
                    None => ScriptedProvider::seeded(seed),
                };
                Arc::new(base.with_seed(seed).with_strict(*strict))
            }
            ProviderSelection::Replay { tape } => Arc::new(ReplayProvider::from_file(tape)?),
            ProviderSelection::Remote(r) => Arc::new(RemoteProvider::new(r.clone())),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_needs_seed() {
        assert!(RunConfig::default().validate().is_err());
        RunConfig::scripted(1).validate().unwrap();
    }

    #[test]
    fn rounds_override_context() {
        let mut cfg = RunConfig::scripted(1);
        cfg.rounds = Some(3);
        cfg.context.insert("duration".into(), "6 minutes".into());
        let ev = cfg.event_config().unwrap();
        assert_eq!(ev.context.rounds, 3);
        assert_eq!(ev.context.get("duration"), Some("6 minutes"));
        cfg.context.insert("weather".into(), "rain".into());
        assert!(cfg.validate().is_err());
    }
}
