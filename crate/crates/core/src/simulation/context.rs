use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::SimulationError;

/// How many utterances a conversation round produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnAccounting {
    /// Every round has two query/response exchanges except the last, which
    /// has one: `4·rounds − 2` turns.
    #[default]
    SkipFinalExchange,
    /// Every round has both exchanges: `4·rounds` turns.
    FullRounds,
}

impl TurnAccounting {
    pub fn turns(self, rounds: u32) -> usize {
        let full = 4 * rounds as usize;
        match self {
            TurnAccounting::SkipFinalExchange => full.saturating_sub(2),
            TurnAccounting::FullRounds => full,
        }
    }
}

/// Environment parameters of one speed-dating session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionContext {
    pub physical: BTreeMap<String, String>,
    pub temporal: BTreeMap<String, String>,
    pub social: BTreeMap<String, String>,
    pub cultural: BTreeMap<String, String>,
    pub rounds: u32,
    #[serde(default)]
    pub turn_accounting: TurnAccounting,
}

type Group = (&'static str, &'static [(&'static str, &'static str)]);

const GROUPS: [Group; 4] = [
    (
        "physical",
        &[
            ("spatial_layout", "bar-restaurant tables"),
            ("proximity", "seated face to face across a small table"),
            ("sensory_conditions", "soft background music and the hum of other conversations"),
        ],
    ),
    (
        "temporal",
        &[
            ("duration", "4 minutes"),
            ("pacing", "brisk alternating turns"),
            ("sequence_structure", "one of several back-to-back rotations"),
        ],
    ),
    (
        "social",
        &[
            ("group_size", "two participants"),
            ("relationship_dynamics", "strangers meeting for the first time"),
            ("power_structure", "equal peers"),
        ],
    ),
    (
        "cultural",
        &[
            ("normative_expectations", "polite first-date small talk"),
            ("communication_styles", "casual and friendly"),
        ],
    ),
];

/// Every text parameter key, in rendering order.
pub fn parameter_keys() -> Vec<&'static str> {
    GROUPS.iter().flat_map(|(_, ps)| ps.iter().map(|(k, _)| *k)).collect()
}

impl Default for SessionContext {
    fn default() -> Self {
        let group = |i: usize| -> BTreeMap<String, String> {
            GROUPS[i].1.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
        };
        Self {
            physical: group(0),
            temporal: group(1),
            social: group(2),
            cultural: group(3),
            rounds: 8,
            turn_accounting: TurnAccounting::default(),
        }
    }
}

impl SessionContext {
    fn group_mut(&mut self, name: &str) -> &mut BTreeMap<String, String> {
        match name {
            "physical" => &mut self.physical,
            "temporal" => &mut self.temporal,
            "social" => &mut self.social,
            _ => &mut self.cultural,
        }
    }

    fn group(&self, name: &str) -> &BTreeMap<String, String> {
        match name {
            "physical" => &self.physical,
            "temporal" => &self.temporal,
            "social" => &self.social,
            _ => &self.cultural,
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        GROUPS
            .iter()
            .find(|(_, ps)| ps.iter().any(|(k, _)| *k == key))
            .and_then(|(g, _)| self.group(g).get(key))
            .map(String::as_str)
    }

    /// Total utterances a session under this context produces.
    pub fn expected_turns(&self) -> usize {
        self.turn_accounting.turns(self.rounds)
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.rounds == 0 {
            return Err(SimulationError::Config("rounds must be >= 1".into()));
        }
        for (g, ps) in GROUPS {
            for (k, _) in ps {
                if !self.group(g).contains_key(*k) {
                    return Err(SimulationError::Config(format!("context is missing {g}.{k}")));
                }
            }
        }
        Ok(())
    }

    /// Natural-language scene description carrying every parameter.
    pub fn render_scene(&self) -> String {
        let v = |k: &str| self.get(k).unwrap_or_default().to_string();
        format!(
            "Setting: {} ({}; {}). Time: {} with {}, {}. People: {}, {}, {}. Expectations: {}; style {}.",
            v("spatial_layout"),
            v("proximity"),
            v("sensory_conditions"),
            v("duration"),
            v("pacing"),
            v("sequence_structure"),
            v("group_size"),
            v("relationship_dynamics"),
            v("power_structure"),
            v("normative_expectations"),
            v("communication_styles"),
        )
    }
}

fn valid_keys() -> String {
    let mut keys = parameter_keys();
    keys.push("rounds");
    keys.push("turn_accounting");
    keys.join(", ")
}

/// Defaults overridden by flat `key → value` pairs.
pub fn build_context(overrides: &BTreeMap<String, Value>) -> Result<SessionContext, SimulationError> {
    let mut ctx = SessionContext::default();
    for (key, value) in overrides {
        match key.as_str() {
            "rounds" => {
                let r = value
                    .as_u64()
                    .filter(|r| *r >= 1 && *r <= u32::MAX as u64)
                    .ok_or_else(|| SimulationError::Config(format!("rounds must be an integer >= 1, got {value}")))?;
                ctx.rounds = r as u32;
            }
            "turn_accounting" => {
                ctx.turn_accounting = serde_json::from_value(value.clone()).map_err(|_| {
                    SimulationError::Config(format!(
                        "turn_accounting must be skip_final_exchange or full_rounds, got {value}"
                    ))
                })?;
            }
            k => {
                let group = GROUPS
                    .iter()
                    .find(|(_, ps)| ps.iter().any(|(p, _)| *p == k))
                    .map(|(g, _)| *g)
                    .ok_or_else(|| {
                        SimulationError::Config(format!("unknown context key `{k}`; valid keys: {}", valid_keys()))
                    })?;
                let text = match value {
                    Value::String(s) => s.clone(),
                    Value::Number(n) => n.to_string(),
                    Value::Bool(b) => b.to_string(),
                    other => {
                        return Err(SimulationError::Config(format!("context key `{k}` must be text, got {other}")))
                    }
                };
                ctx.group_mut(group).insert(k.to_string(), text);
            }
        }
    }
    ctx.validate()?;
    Ok(ctx)
}
