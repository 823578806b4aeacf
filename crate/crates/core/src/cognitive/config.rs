use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memory::MemoryConfig;
use crate::provider::SamplingParams;
use crate::types::PerModule;

#[derive(Debug, Error, PartialEq)]
#[error("invalid cognitive parameter {name} = {value}: {expected}")]
pub struct ConfigRangeError {
    pub name: &'static str,
    pub value: f64,
    pub expected: &'static str,
}

/// Coefficients β_{m,·} applied to a module's salience features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureWeights {
    pub confidence: f64,
    pub trait_gain: f64,
    pub recency: f64,
}

impl Default for FeatureWeights {
    fn default() -> Self {
        Self {
            confidence: 1.0,
            trait_gain: 1.0,
            recency: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SalienceConfig {
    /// Baseline salience α per module.
    pub alpha: PerModule<f64>,
    pub beta: PerModule<FeatureWeights>,
    /// Softmax temperature τ_sal.
    pub temperature: f64,
}

impl Default for SalienceConfig {
    fn default() -> Self {
        Self {
            alpha: PerModule::splat(0.0),
            beta: PerModule::splat(FeatureWeights::default()),
            temperature: 1.0,
        }
    }
}

/// Logits `base_m + gain·trait_m` behind the personality integration weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PersonalityMapping {
    pub base: PerModule<f64>,
    pub gain: f64,
}

impl Default for PersonalityMapping {
    fn default() -> Self {
        Self {
            base: PerModule::splat(0.0),
            gain: 1.0,
        }
    }
}

/// Tension between two keys that never co-occur in one payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossKeyEntry {
    pub a: String,
    pub b: String,
    pub weight: f64,
}

impl CrossKeyEntry {
    pub fn new(a: &str, b: &str, weight: f64) -> Self {
        Self {
            a: a.into(),
            b: b.into(),
            weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConflictConfig {
    /// θ_conf: pairs scoring strictly above this are resolved.
    pub threshold: f64,
    /// κ_conf: fraction of `conflict·weight` removed from each member.
    pub adjustment: f64,
    pub cross_keys: Vec<CrossKeyEntry>,
}

impl ConflictConfig {
    pub fn default_cross_keys() -> Vec<CrossKeyEntry> {
        vec![
            CrossKeyEntry::new("valence", "plan_feasibility", 0.55),
            CrossKeyEntry::new("valence", "goal_alignment", 0.15),
            CrossKeyEntry::new("valence", "formality", 0.10),
            CrossKeyEntry::new("valence", "retrieval_strength", 0.10),
            CrossKeyEntry::new("arousal", "formality", 0.10),
            CrossKeyEntry::new("retrieval_strength", "plan_feasibility", 0.20),
            CrossKeyEntry::new("retrieval_strength", "goal_alignment", 0.10),
            CrossKeyEntry::new("retrieval_strength", "formality", 0.05),
            CrossKeyEntry::new("formality", "plan_feasibility", 0.10),
            CrossKeyEntry::new("formality", "goal_alignment", 0.05),
            CrossKeyEntry::new("plan_feasibility", "goal_alignment", 0.05),
        ]
    }
}

impl Default for ConflictConfig {
    fn default() -> Self {
        Self {
            threshold: 0.3,
            adjustment: 0.2,
            cross_keys: Self::default_cross_keys(),
        }
    }
}

/// Every tunable of one agent turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CognitiveConfig {
    pub salience: SalienceConfig,
    pub personality: PersonalityMapping,
    pub conflict: ConflictConfig,
    pub memory: MemoryConfig,
    /// T, upper bound on competition cycles per turn.
    pub max_iterations: usize,
    /// ε, convergence threshold on the payload L∞ change.
    pub epsilon: f64,
    /// η, preference learning rate.
    pub learning_rate: f64,
    /// Base retrieval breadth before openness scaling.
    pub memory_k: usize,
    pub module_sampling: SamplingParams,
    pub response_sampling: SamplingParams,
    /// Require module completions to be a bare JSON object.
    pub strict_payloads: bool,
}

impl Default for CognitiveConfig {
    fn default() -> Self {
        Self {
            salience: SalienceConfig::default(),
            personality: PersonalityMapping::default(),
            conflict: ConflictConfig::default(),
            memory: MemoryConfig::default(),
            max_iterations: 3,
            epsilon: 0.05,
            learning_rate: 0.1,
            memory_k: 4,
            module_sampling: SamplingParams::MODULE,
            response_sampling: SamplingParams::RESPONSE,
            strict_payloads: false,
        }
    }
}

impl CognitiveConfig {
    pub fn validate(&self) -> Result<(), ConfigRangeError> {
        let check = |name, value: f64, ok: bool, expected| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(ConfigRangeError { name, value, expected })
            }
        };
        let t = self.salience.temperature;
        check("salience.temperature", t, t > 0.0, "must be > 0")?;
        let th = self.conflict.threshold;
        check("conflict.threshold", th, (0.0..=1.0).contains(&th), "must be in [0, 1]")?;
        let k = self.conflict.adjustment;
        check("conflict.adjustment", k, (0.0..=1.0).contains(&k), "must be in [0, 1]")?;
        check("epsilon", self.epsilon, self.epsilon > 0.0, "must be > 0")?;
        let eta = self.learning_rate;
        check("learning_rate", eta, eta > 0.0 && eta <= 1.0, "must be in (0, 1]")?;
        let t_max = self.max_iterations as f64;
        check("max_iterations", t_max, self.max_iterations >= 1, "must be >= 1")?;
        let mk = self.memory_k as f64;
        check("memory_k", mk, self.memory_k >= 1, "must be >= 1")?;
        let lambda = self.memory.salience_blend;
        check("memory.salience_blend", lambda, (0.0..=1.0).contains(&lambda), "must be in [0, 1]")?;
        for e in &self.conflict.cross_keys {
            check("conflict.cross_keys.weight", e.weight, (0.0..=1.0).contains(&e.weight), "must be in [0, 1]")?;
        }
        Ok(())
    }
}
