use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cognitive::AgentState;

type Predicate = Arc<dyn Fn(&AgentState, &AgentState) -> bool + Send + Sync>;

/// Which unordered agent pairs are eligible to meet.
#[derive(Clone, Default)]
pub enum PairCriteria {
    /// Both genders known and different.
    #[default]
    Heterosexual,
    /// Every distinct pair.
    All,
    Custom(Predicate),
}

impl PairCriteria {
    pub fn custom(f: impl Fn(&AgentState, &AgentState) -> bool + Send + Sync + 'static) -> Self {
        PairCriteria::Custom(Arc::new(f))
    }

    pub fn admits(&self, a: &AgentState, b: &AgentState) -> bool {
        match self {
            PairCriteria::Heterosexual => {
                !a.gender.is_empty() && !b.gender.is_empty() && !a.gender.eq_ignore_ascii_case(&b.gender)
            }
            PairCriteria::All => true,
            PairCriteria::Custom(f) => f(a, b),
        }
    }
}

impl fmt::Debug for PairCriteria {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairCriteria::Heterosexual => f.write_str("Heterosexual"),
            PairCriteria::All => f.write_str("All"),
            PairCriteria::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Serialize for PairCriteria {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            PairCriteria::Heterosexual => s.serialize_str("heterosexual"),
            PairCriteria::All => s.serialize_str("all"),
            PairCriteria::Custom(_) => Err(serde::ser::Error::custom("custom pair criteria are not serializable")),
        }
    }
}

impl<'de> Deserialize<'de> for PairCriteria {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        match name.as_str() {
            "heterosexual" => Ok(PairCriteria::Heterosexual),
            "all" => Ok(PairCriteria::All),
            other => Err(serde::de::Error::unknown_variant(other, &["heterosexual", "all"])),
        }
    }
}

/// Index pairs `(i, j)`, `i < j`, in row-major order.
pub fn generate_pairs(agents: &[AgentState], criteria: &PairCriteria) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..agents.len() {
        for j in i + 1..agents.len() {
            if agents[i].id != agents[j].id && criteria.admits(&agents[i], &agents[j]) {
                out.push((i, j));
            }
        }
    }
    if out.is_empty() && agents.len() >= 2 {
        tracing::warn!(agents = agents.len(), "no eligible pairs");
    }
    out
}

pub fn decide(score: f64, threshold: f64) -> bool {
    score >= threshold
}

/// Yes/no decisions and the symmetric mutual-match relation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchMatrix {
    pub decisions: BTreeMap<String, BTreeMap<String, bool>>,
    #[serde(with = "match_list")]
    pub matches: BTreeMap<(String, String), bool>,
}

impl MatchMatrix {
    pub fn is_match(&self, a: &str, b: &str) -> bool {
        self.matches.get(&(a.to_string(), b.to_string())).copied().unwrap_or(false)
    }

    pub fn match_count(&self) -> usize {
        self.matches.iter().filter(|((a, b), m)| **m && a < b).count()
    }
}

/// `matches[(i, j)] = decisions[i][j] ∧ decisions[j][i]`, stored in both orders.
pub fn build_match_matrix(decisions: &BTreeMap<String, BTreeMap<String, bool>>) -> MatchMatrix {
    let mut matches = BTreeMap::new();
    for (i, row) in decisions {
        for (j, &d_ij) in row {
            let d_ji = decisions.get(j).and_then(|r| r.get(i)).copied().unwrap_or(false);
            let m = d_ij && d_ji;
            matches.insert((i.clone(), j.clone()), m);
            matches.insert((j.clone(), i.clone()), m);
        }
    }
    MatchMatrix {
        decisions: decisions.clone(),
        matches,
    }
}

mod match_list {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Entry {
        a: String,
        b: String,
        matched: bool,
    }

    pub fn serialize<S: Serializer>(m: &BTreeMap<(String, String), bool>, s: S) -> Result<S::Ok, S::Error> {
        let list: Vec<Entry> = m
            .iter()
            .map(|((a, b), matched)| Entry {
                a: a.clone(),
                b: b.clone(),
                matched: *matched,
            })
            .collect();
        list.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(String, String), bool>, D::Error> {
        let list = Vec::<Entry>::deserialize(d)?;
        Ok(list.into_iter().map(|e| ((e.a, e.b), e.matched)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::PersonalityProfile;

    fn pool(genders: &[&str]) -> Vec<AgentState> {
        genders
            .iter()
            .enumerate()
            .map(|(i, g)| AgentState::new(format!("a{i}"), *g, PersonalityProfile::neutral()))
            .collect()
    }

    #[test]
    fn three_by_three() {
        let agents = pool(&["m", "m", "m", "f", "f", "f"]);
        assert_eq!(generate_pairs(&agents, &PairCriteria::Heterosexual).len(), 9);
        assert!(generate_pairs(&agents, &PairCriteria::custom(|_, _| false)).is_empty());
        assert_eq!(generate_pairs(&agents, &PairCriteria::All).len(), 15);
    }

    #[test]
    fn conjunction() {
        let mut d = BTreeMap::new();
        d.insert("x".to_string(), BTreeMap::from([("y".to_string(), decide(0.8, 0.5))]));
        d.insert("y".to_string(), BTreeMap::from([("x".to_string(), decide(0.9, 0.5))]));
        let m = build_match_matrix(&d);
        assert!(m.is_match("x", "y") && m.is_match("y", "x"));
        d.get_mut("y").unwrap().insert("x".to_string(), decide(0.3, 0.5));
        let m = build_match_matrix(&d);
        assert!(!m.is_match("x", "y") && !m.is_match("y", "x"));
    }

    #[test]
    fn matrix_serializes_as_list() {
        let d = BTreeMap::from([("x".to_string(), BTreeMap::from([("y".to_string(), true)]))]);
        let m = build_match_matrix(&d);
        let json = serde_json::to_string(&m).unwrap();
        let back: MatchMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
