//! Shared domain vocabulary: cognitive module kinds, Big Five traits, the six
//! dating attributes, and fixed-size keyed tables over each of them.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A closed enumeration usable as the key of a keyed table.
pub trait TableKey: Copy + Eq + fmt::Debug + 'static {
    const ALL: &'static [Self];
    fn index(self) -> usize;
    fn key(self) -> &'static str;

    fn from_key(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.key() == name)
    }
}

macro_rules! keyed_table {
    ($(#[$meta:meta])* $name:ident, $key:ty, $n:expr) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct $name<T>(pub [T; $n]);

        impl<T: Copy> $name<T> {
            pub fn splat(value: T) -> Self {
                Self([value; $n])
            }

            pub fn from_fn(mut f: impl FnMut($key) -> T) -> Self {
                let mut out = [None; $n];
                for k in <$key>::ALL {
                    out[k.index()] = Some(f(*k));
                }
                Self(out.map(|v| v.expect("every key visited")))
            }

            pub fn map<U: Copy>(&self, mut f: impl FnMut($key, T) -> U) -> $name<U> {
                $name::from_fn(|k| f(k, self.0[k.index()]))
            }
        }

        impl<T> $name<T> {
            pub fn iter(&self) -> impl Iterator<Item = ($key, &T)> + '_ {
                <$key>::ALL.iter().map(move |k| (*k, &self.0[k.index()]))
            }

            pub fn values(&self) -> impl Iterator<Item = &T> + '_ {
                self.0.iter()
            }
        }

        impl<T: Copy> $name<T> {
            /// Build from a map that must cover every key.
            pub fn try_from_map(map: &std::collections::BTreeMap<$key, T>) -> Result<Self, MissingKey> {
                for k in <$key>::ALL {
                    if !map.contains_key(k) {
                        return Err(MissingKey(k.key()));
                    }
                }
                Ok(Self::from_fn(|k| map[&k]))
            }
        }

        impl $name<f64> {
            pub fn sum(&self) -> f64 {
                self.0.iter().sum()
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|v| v.is_finite())
            }
        }

        impl<T> Index<$key> for $name<T> {
            type Output = T;
            fn index(&self, k: $key) -> &T {
                &self.0[k.index()]
            }
        }

        impl<T> IndexMut<$key> for $name<T> {
            fn index_mut(&mut self, k: $key) -> &mut T {
                &mut self.0[k.index()]
            }
        }

        impl<T: Serialize> Serialize for $name<T> {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                let mut map = serializer.serialize_map(Some($n))?;
                for k in <$key>::ALL {
                    map.serialize_entry(k.key(), &self.0[k.index()])?;
                }
                map.end()
            }
        }

        impl<'de, T: Deserialize<'de> + Copy> Deserialize<'de> for $name<T> {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                struct TableVisitor<T>(std::marker::PhantomData<T>);

                impl<'de, T: Deserialize<'de> + Copy> Visitor<'de> for TableVisitor<T> {
                    type Value = $name<T>;

                    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                        write!(f, "a map covering every {} key", stringify!($key))
                    }

                    fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                        let mut out: [Option<T>; $n] = [None; $n];
                        while let Some(name) = access.next_key::<String>()? {
                            let k = <$key>::from_key(&name).ok_or_else(|| {
                                de::Error::unknown_field(&name, &[])
                            })?;
                            out[k.index()] = Some(access.next_value()?);
                        }
                        let mut values = [None; $n];
                        for k in <$key>::ALL {
                            let v = out[k.index()]
                                .ok_or_else(|| de::Error::missing_field(k.key()))?;
                            values[k.index()] = Some(v);
                        }
                        Ok($name(values.map(|v| v.expect("checked above"))))
                    }
                }

                deserializer.deserialize_map(TableVisitor(std::marker::PhantomData))
            }
        }
    };
}

/// The five competing cognitive processors.
///
/// Declaration order is the fixed tie-break order for salience competition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModuleKind {
    Emotion,
    Memory,
    Planning,
    SocialNorms,
    GoalTracking,
}

impl TableKey for ModuleKind {
    const ALL: &'static [Self] = &[
        ModuleKind::Emotion,
        ModuleKind::Memory,
        ModuleKind::Planning,
        ModuleKind::SocialNorms,
        ModuleKind::GoalTracking,
    ];

    fn index(self) -> usize {
        self as usize
    }

    fn key(self) -> &'static str {
        match self {
            ModuleKind::Emotion => "Emotion",
            ModuleKind::Memory => "Memory",
            ModuleKind::Planning => "Planning",
            ModuleKind::SocialNorms => "SocialNorms",
            ModuleKind::GoalTracking => "GoalTracking",
        }
    }
}

impl ModuleKind {
    /// The Big Five trait that gates this module.
    pub fn paired_trait(self) -> Trait {
        match self {
            ModuleKind::Emotion => Trait::Neuroticism,
            ModuleKind::Memory => Trait::Openness,
            ModuleKind::Planning => Trait::Conscientiousness,
            ModuleKind::SocialNorms => Trait::Agreeableness,
            ModuleKind::GoalTracking => Trait::Extraversion,
        }
    }

    /// Upper-case label used in prompts, e.g. `SOCIAL NORMS`.
    pub fn label(self) -> &'static str {
        match self {
            ModuleKind::Emotion => "EMOTION",
            ModuleKind::Memory => "MEMORY",
            ModuleKind::Planning => "PLANNING",
            ModuleKind::SocialNorms => "SOCIAL NORMS",
            ModuleKind::GoalTracking => "GOAL TRACKING",
        }
    }

    /// Canonical payload keys with their closed value ranges.
    pub fn canonical_keys(self) -> &'static [(&'static str, f64, f64)] {
        match self {
            ModuleKind::Emotion => &[("valence", -1.0, 1.0), ("arousal", 0.0, 1.0)],
            ModuleKind::Memory => &[("retrieval_strength", 0.0, 1.0)],
            ModuleKind::Planning => &[("plan_feasibility", 0.0, 1.0)],
            ModuleKind::SocialNorms => &[("formality", 0.0, 1.0)],
            ModuleKind::GoalTracking => &[("goal_alignment", 0.0, 1.0)],
        }
    }
}

impl fmt::Display for ModuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Five-Factor personality dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trait {
    Openness,
    Conscientiousness,
    Extraversion,
    Agreeableness,
    Neuroticism,
}

impl TableKey for Trait {
    const ALL: &'static [Self] = &[
        Trait::Openness,
        Trait::Conscientiousness,
        Trait::Extraversion,
        Trait::Agreeableness,
        Trait::Neuroticism,
    ];

    fn index(self) -> usize {
        self as usize
    }

    fn key(self) -> &'static str {
        match self {
            Trait::Openness => "openness",
            Trait::Conscientiousness => "conscientiousness",
            Trait::Extraversion => "extraversion",
            Trait::Agreeableness => "agreeableness",
            Trait::Neuroticism => "neuroticism",
        }
    }
}

impl fmt::Display for Trait {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// The six partner-evaluation attributes of the speed-dating protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Attractiveness,
    Sincerity,
    Intelligence,
    Fun,
    Ambition,
    SharedInterests,
}

impl TableKey for Attribute {
    const ALL: &'static [Self] = &[
        Attribute::Attractiveness,
        Attribute::Sincerity,
        Attribute::Intelligence,
        Attribute::Fun,
        Attribute::Ambition,
        Attribute::SharedInterests,
    ];

    fn index(self) -> usize {
        self as usize
    }

    fn key(self) -> &'static str {
        match self {
            Attribute::Attractiveness => "attractiveness",
            Attribute::Sincerity => "sincerity",
            Attribute::Intelligence => "intelligence",
            Attribute::Fun => "fun",
            Attribute::Ambition => "ambition",
            Attribute::SharedInterests => "shared_interests",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

keyed_table!(
    /// One value per cognitive module, serialized as a name-keyed map.
    PerModule, ModuleKind, 5
);
keyed_table!(
    /// One value per Big Five trait.
    PerTrait, Trait, 5
);
keyed_table!(
    /// One value per dating attribute.
    PerAttribute, Attribute, 6
);

#[derive(Debug, Error, PartialEq)]
#[error("missing required key `{0}`")]
pub struct MissingKey(pub &'static str);

#[derive(Debug, Error, PartialEq)]
pub enum ValidationError {
    #[error("{field} = {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        field: String,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("importance allocation sums to {sum}, expected 100")]
    ImportanceSum { sum: f64 },
}

fn check_range(field: impl Into<String>, value: f64, lo: f64, hi: f64) -> Result<(), ValidationError> {
    if value.is_finite() && (lo..=hi).contains(&value) {
        Ok(())
    } else {
        Err(ValidationError::OutOfRange {
            field: field.into(),
            value,
            lo,
            hi,
        })
    }
}

/// Big Five trait vector, every trait in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonalityProfile {
    pub openness: f64,
    pub conscientiousness: f64,
    pub extraversion: f64,
    pub agreeableness: f64,
    pub neuroticism: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mbti_label: Option<String>,
}

impl PersonalityProfile {
    pub fn new(o: f64, c: f64, e: f64, a: f64, n: f64) -> Self {
        Self {
            openness: o,
            conscientiousness: c,
            extraversion: e,
            agreeableness: a,
            neuroticism: n,
            mbti_label: None,
        }
    }

    pub fn neutral() -> Self {
        Self::new(0.5, 0.5, 0.5, 0.5, 0.5)
    }

    pub fn from_traits(traits: &PerTrait<f64>) -> Self {
        Self::new(
            traits[Trait::Openness],
            traits[Trait::Conscientiousness],
            traits[Trait::Extraversion],
            traits[Trait::Agreeableness],
            traits[Trait::Neuroticism],
        )
    }

    pub fn traits(&self) -> PerTrait<f64> {
        PerTrait::from_fn(|t| self.get(t))
    }

    pub fn get(&self, t: Trait) -> f64 {
        match t {
            Trait::Openness => self.openness,
            Trait::Conscientiousness => self.conscientiousness,
            Trait::Extraversion => self.extraversion,
            Trait::Agreeableness => self.agreeableness,
            Trait::Neuroticism => self.neuroticism,
        }
    }

    pub fn set(&mut self, t: Trait, value: f64) {
        let slot = match t {
            Trait::Openness => &mut self.openness,
            Trait::Conscientiousness => &mut self.conscientiousness,
            Trait::Extraversion => &mut self.extraversion,
            Trait::Agreeableness => &mut self.agreeableness,
            Trait::Neuroticism => &mut self.neuroticism,
        };
        *slot = value;
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        for t in Trait::ALL {
            check_range(t.key(), self.get(*t), 0.0, 1.0)?;
        }
        Ok(())
    }
}

/// Partner-preference state: self-ratings on a 1–10 scale and a 100-point
/// importance allocation over the six attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatingAttributes {
    pub self_ratings: PerAttribute<f64>,
    pub importance: PerAttribute<f64>,
}

impl DatingAttributes {
    pub const IMPORTANCE_TOTAL: f64 = 100.0;

    pub fn neutral() -> Self {
        Self {
            self_ratings: PerAttribute::splat(5.5),
            importance: PerAttribute::splat(Self::IMPORTANCE_TOTAL / 6.0),
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        for (a, v) in self.self_ratings.iter() {
            check_range(format!("self_ratings.{a}"), *v, 1.0, 10.0)?;
        }
        for (a, v) in self.importance.iter() {
            check_range(format!("importance.{a}"), *v, 0.0, Self::IMPORTANCE_TOTAL)?;
        }
        let sum = self.importance.sum();
        if (sum - Self::IMPORTANCE_TOTAL).abs() > 1e-6 {
            return Err(ValidationError::ImportanceSum { sum });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurnKind {
    Query,
    Response,
}

/// One utterance in a conversation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationTurn {
    pub speaker: String,
    pub kind: TurnKind,
    pub text: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_module_serializes_in_tie_break_order() {
        let table = PerModule([1.0, 2.0, 3.0, 4.0, 5.0]);
        let json = serde_json::to_string(&table).unwrap();
        assert_eq!(
            json,
            r#"{"Emotion":1.0,"Memory":2.0,"Planning":3.0,"SocialNorms":4.0,"GoalTracking":5.0}"#
        );
        let back: PerModule<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn table_deserialize_rejects_missing_key() {
        let err = serde_json::from_str::<PerAttribute<f64>>(r#"{"fun": 1.0}"#).unwrap_err();
        assert!(err.to_string().contains("missing field"));
    }

    #[test]
    fn trait_pairing_is_a_bijection() {
        let mut traits: Vec<Trait> = ModuleKind::ALL.iter().map(|m| m.paired_trait()).collect();
        traits.sort();
        assert_eq!(traits, Trait::ALL.to_vec());
    }

    #[test]
    fn profile_validation() {
        assert!(PersonalityProfile::neutral().validate().is_ok());
        let mut p = PersonalityProfile::neutral();
        p.extraversion = 1.2;
        assert!(p.validate().is_err());
        p.extraversion = f64::NAN;
        assert!(p.validate().is_err());
    }

    #[test]
    fn dating_attributes_validation() {
        let mut attrs = DatingAttributes::neutral();
        assert!(attrs.validate().is_ok());
        attrs.importance[Attribute::Fun] += 1.0;
        assert!(matches!(attrs.validate(), Err(ValidationError::ImportanceSum { .. })));
    }
}
