use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AssessmentError;
use crate::types::Trait;

/// One interactive scenario with its answer options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub prompt: String,
    pub options: Vec<String>,
    /// How strongly the scenario probes each trait, in `[0, 1]`.
    pub trait_targets: BTreeMap<Trait, f64>,
    /// Follow-up question; `{choice}` is replaced with the chosen option.
    pub follow_up_template: String,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), AssessmentError> {
        let bad = |why: String| Err(AssessmentError::Scenario { id: self.id.clone(), reason: why });
        if self.id.trim().is_empty() {
            return bad("empty id".into());
        }
        if self.options.len() < 2 {
            return bad(format!("needs at least 2 options, has {}", self.options.len()));
        }
        if let Some((t, v)) = self.trait_targets.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return bad(format!("target for {t} is {v}, outside [0, 1]"));
        }
        if !self.trait_targets.values().any(|v| *v > 0.0) {
            return bad("no positive trait target".into());
        }
        Ok(())
    }

    pub fn target(&self, t: Trait) -> f64 {
        self.trait_targets.get(&t).copied().unwrap_or(0.0)
    }

    pub fn follow_up(&self, option_index: usize) -> String {
        let choice = self.options.get(option_index).map(String::as_str).unwrap_or("");
        self.follow_up_template.replace("{choice}", choice)
    }
}

const BUILTIN: &str = include_str!("../../data/scenarios.json");

/// A validated scenario list with unique ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Scenario>", into = "Vec<Scenario>")]
pub struct ScenarioPool {
    scenarios: Vec<Scenario>,
}

impl TryFrom<Vec<Scenario>> for ScenarioPool {
    type Error = AssessmentError;

    fn try_from(scenarios: Vec<Scenario>) -> Result<Self, Self::Error> {
        Self::new(scenarios)
    }
}

impl From<ScenarioPool> for Vec<Scenario> {
    fn from(p: ScenarioPool) -> Self {
        p.scenarios
    }
}

impl ScenarioPool {
    pub fn new(scenarios: Vec<Scenario>) -> Result<Self, AssessmentError> {
        let mut ids = std::collections::BTreeSet::new();
        for s in &scenarios {
            s.validate()?;
            if !ids.insert(s.id.as_str()) {
                return Err(AssessmentError::Scenario {
                    id: s.id.clone(),
                    reason: "duplicate id".into(),
                });
            }
        }
        Ok(Self { scenarios })
    }

    /// The twelve scenarios shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN).expect("bundled scenario pool is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, AssessmentError> {
        let list: Vec<Scenario> = serde_json::from_str(text).map_err(|e| AssessmentError::Pool(e.to_string()))?;
        Self::new(list)
    }

    pub fn from_file(path: &Path) -> Result<Self, AssessmentError> {
        let text = std::fs::read_to_string(path).map_err(|e| AssessmentError::Pool(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn get(&self, id: &str) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.id == id)
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }
}
