use serde::{Deserialize, Serialize};

use super::{AssessmentError, Scenario, ScenarioPool};
use crate::types::{PerTrait, PersonalityProfile, TableKey, Trait};

/// A trait reading on the 0–100 display scale with its evidence weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraitEstimate {
    pub value: f64,
    pub confidence: f64,
}

impl TraitEstimate {
    pub const UNKNOWN: Self = Self {
        value: 50.0,
        confidence: 0.0,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitEstimateState {
    pub traits: PerTrait<TraitEstimate>,
    pub scenarios_seen: usize,
    /// Ids of completed scenarios, in order.
    pub seen: Vec<String>,
    pub transcript: Vec<super::AssessmentEvent>,
}

impl Default for TraitEstimateState {
    fn default() -> Self {
        Self {
            traits: PerTrait::splat(TraitEstimate::UNKNOWN),
            scenarios_seen: 0,
            seen: Vec::new(),
            transcript: Vec::new(),
        }
    }
}

impl TraitEstimateState {
    pub fn min_confidence(&self) -> f64 {
        self.traits.values().map(|t| t.confidence).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssessmentConfig {
    pub max_scenarios: usize,
    pub min_scenarios: usize,
    pub confidence_threshold: f64,
}

impl Default for AssessmentConfig {
    fn default() -> Self {
        Self {
            max_scenarios: 15,
            min_scenarios: 12,
            confidence_threshold: 1.4,
        }
    }
}

impl AssessmentConfig {
    pub fn validate(&self) -> Result<(), AssessmentError> {
        if self.max_scenarios == 0 || self.min_scenarios > self.max_scenarios {
            return Err(AssessmentError::Config(format!(
                "need 0 < min_scenarios ({}) <= max_scenarios ({})",
                self.min_scenarios, self.max_scenarios
            )));
        }
        if !self.confidence_threshold.is_finite() || self.confidence_threshold < 0.0 {
            return Err(AssessmentError::Config(format!(
                "confidence_threshold {} must be finite and >= 0",
                self.confidence_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Next<'a> {
    Scenario(&'a Scenario),
    Done { low_confidence: bool },
}

/// Pick the unseen scenario whose targets best cover the traits still
/// short of the confidence threshold, or stop.
pub fn next_scenario<'a>(state: &TraitEstimateState, pool: &'a ScenarioPool, cfg: &AssessmentConfig) -> Result<Next<'a>, AssessmentError> {
    if pool.is_empty() {
        return Err(AssessmentError::EmptyPool);
    }
    let thr = cfg.confidence_threshold;
    let confident = state.min_confidence() >= thr;
    if state.scenarios_seen >= cfg.max_scenarios {
        return Ok(Next::Done {
            low_confidence: !confident,
        });
    }
    if confident && state.scenarios_seen >= cfg.min_scenarios {
        return Ok(Next::Done { low_confidence: false });
    }
    let score = |s: &Scenario| -> f64 {
        Trait::ALL
            .iter()
            .map(|t| s.target(*t) * (thr - state.traits[*t].confidence).max(0.0))
            .sum()
    };
    let best = pool
        .scenarios()
        .iter()
        .filter(|s| !state.seen.contains(&s.id))
        .map(|s| (score(s), s))
        .reduce(|best, cand| {
            if cand.0 > best.0 || (cand.0 == best.0 && cand.1.id < best.1.id) {
                cand
            } else {
                best
            }
        });
    Ok(match best {
        Some((_, s)) => Next::Scenario(s),
        None => Next::Done {
            low_confidence: !(confident && state.scenarios_seen >= cfg.min_scenarios),
        },
    })
}

/// Confidence-weighted running mean per trait.
pub fn apply_update(traits: &PerTrait<TraitEstimate>, deltas: &PerTrait<TraitEstimate>) -> PerTrait<TraitEstimate> {
    traits.map(|t, cur| {
        let d = deltas[t];
        if d.confidence <= 0.0 {
            return cur;
        }
        let total = cur.confidence + d.confidence;
        TraitEstimate {
            value: ((cur.value * cur.confidence + d.value * d.confidence) / total).clamp(0.0, 100.0),
            confidence: total,
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalProfile {
    pub profile: PersonalityProfile,
    pub display: PerTrait<TraitEstimate>,
    /// Traits with no evidence, reported at 0.5.
    pub defaulted: Vec<Trait>,
}

pub fn finalize(state: &TraitEstimateState) -> Result<FinalProfile, AssessmentError> {
    let mut defaulted = Vec::new();
    let core = state.traits.map(|t, e| {
        if e.confidence > 0.0 {
            (e.value / 100.0).clamp(0.0, 1.0)
        } else {
            defaulted.push(t);
            0.5
        }
    });
    let profile = PersonalityProfile::from_traits(&core);
    profile.validate().map_err(AssessmentError::Profile)?;
    Ok(FinalProfile {
        profile,
        display: state.traits,
        defaulted,
    })
}
