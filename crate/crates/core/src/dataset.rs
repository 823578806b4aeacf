//! Speed-dating survey records: CSV ingest, validation, export, and the
//! mapping from ratings to a Big Five profile.
//!
//! The input has one row per (participant, partner) date. Participant-level
//! columns repeat on every row; rows are grouped by participant id.
//!
//! Trait inference, with `d(x) = (x − 5.5)/9` for a self-rating and
//! `u(x) = x/100` for an importance share:
//!
//! ```text
//! O = 0.5 + 0.5·d(intelligence) + 1.5·(u(shared_interests) − 1/6)
//! C = 0.5 + 0.5·d(ambition)     + 1.5·(u(ambition) − 1/6)
//! E = 0.5 + 0.5·d(fun)          + 0.5·d(attractiveness)
//! A = 0.5 + d(sincerity)
//! N = 0.5 − 0.5·(mean − 5.5)/4.5 + 0.25·sd/4.5
//! ```
//!
//! where `mean` and `sd` are the mean and population standard deviation of
//! the six self-ratings. Every trait is clamped to `[0, 1]`.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cognitive::AgentState;
use crate::memory::{MemoryConfig, MemoryStore};
use crate::types::{Attribute, DatingAttributes, PerAttribute, PersonalityProfile, TableKey};

/// Tolerance on importance sums, for survey rounding.
pub const IMPORTANCE_TOLERANCE: f64 = 0.5;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("column mapping: {0}")]
    Mapping(String),
}

/// Which CSV columns hold which fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub participant_id: String,
    pub partner_id: String,
    pub gender: String,
    pub age: String,
    pub decision: String,
    pub self_ratings: BTreeMap<Attribute, String>,
    pub importance_t1: BTreeMap<Attribute, String>,
    pub post_ratings: BTreeMap<Attribute, String>,
    /// Optional: columns absent from the header are skipped.
    pub importance_t2: BTreeMap<Attribute, String>,
}

fn columns(suffix: &str, names: [&str; 6]) -> BTreeMap<Attribute, String> {
    Attribute::ALL
        .iter()
        .zip(names)
        .map(|(a, n)| (*a, format!("{n}{suffix}")))
        .collect()
}

const STEMS: [&str; 6] = ["attr", "sinc", "intel", "fun", "amb", "shar"];

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            participant_id: "iid".into(),
            partner_id: "pid".into(),
            gender: "gender".into(),
            age: "age".into(),
            decision: "dec".into(),
            self_ratings: columns("3_1", STEMS),
            importance_t1: columns("1_1", STEMS),
            post_ratings: columns("", STEMS),
            importance_t2: columns("1_2", STEMS),
        }
    }
}

impl ColumnMapping {
    pub fn from_json(text: &str) -> Result<Self, DatasetError> {
        let m: Self = serde_json::from_str(text).map_err(|e| DatasetError::Mapping(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn from_file(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    fn validate(&self) -> Result<(), DatasetError> {
        for (name, map) in [
            ("self_ratings", &self.self_ratings),
            ("importance_t1", &self.importance_t1),
            ("post_ratings", &self.post_ratings),
        ] {
            for a in Attribute::ALL {
                if !map.contains_key(a) {
                    return Err(DatasetError::Mapping(format!("{name} has no column for {a}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub participant_id: String,
    pub gender: String,
    pub age: Option<u32>,
    pub self_ratings: PerAttribute<f64>,
    pub importance_t1: PerAttribute<f64>,
    /// Ratings this participant gave each partner; attributes left blank in
    /// the source are absent.
    pub post_ratings: BTreeMap<String, BTreeMap<Attribute, f64>>,
    pub decisions: BTreeMap<String, bool>,
    pub importance_t2: Option<PerAttribute<f64>>,
}

impl ParticipantRecord {
    /// An agent with inferred traits and the T1 allocation rescaled to
    /// exactly 100.
    pub fn to_agent(&self, memory: MemoryConfig) -> AgentState {
        let total = self.importance_t1.sum();
        let importance = if total > 0.0 {
            self.importance_t1.map(|_, v| v * DatingAttributes::IMPORTANCE_TOTAL / total)
        } else {
            PerAttribute::splat(DatingAttributes::IMPORTANCE_TOTAL / 6.0)
        };
        AgentState {
            id: self.participant_id.clone(),
            gender: self.gender.clone(),
            age: self.age,
            profile: infer_profile(self),
            attributes: DatingAttributes {
                self_ratings: self.self_ratings,
                importance,
            },
            memory: MemoryStore::new(memory),
            workspace: Default::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    /// 1-based line number in the file, header being line 1.
    pub row: usize,
    pub participant_id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub records: Vec<ParticipantRecord>,
    pub rejections: Vec<Rejection>,
    pub rows_read: usize,
}

struct Header {
    index: HashMap<String, usize>,
}

impl Header {
    fn require(&self, name: &str) -> Result<usize, DatasetError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| DatasetError::MissingColumn(name.to_string()))
    }
}

struct Cols {
    id: usize,
    partner: usize,
    gender: usize,
    age: usize,
    decision: usize,
    self_ratings: [usize; 6],
    importance_t1: [usize; 6],
    post: [usize; 6],
    importance_t2: Option<[usize; 6]>,
}

fn attr_cols(h: &Header, map: &BTreeMap<Attribute, String>) -> Result<[usize; 6], DatasetError> {
    let mut out = [0; 6];
    for a in Attribute::ALL {
        out[a.index()] = h.require(&map[a])?;
    }
    Ok(out)
}

fn parse_num(field: &str, raw: &str) -> Result<Option<f64>, String> {
    let t = raw.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    t.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(Some)
        .ok_or_else(|| format!("{field} is not a number: {t:?}"))
}

fn required(field: &str, raw: &str) -> Result<f64, String> {
    parse_num(field, raw)?.ok_or_else(|| format!("{field} is missing"))
}

fn rated(field: &str, v: f64, lo: f64, hi: f64) -> Result<f64, String> {
    if (lo..=hi).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{field} {v} outside [{lo}, {hi}]"))
    }
}

fn allocation(row: &csv::StringRecord, cols: &[usize; 6], stems: &BTreeMap<Attribute, String>) -> Result<PerAttribute<f64>, String> {
    let mut out = PerAttribute::splat(0.0);
    for a in Attribute::ALL {
        let v = required(&stems[a], &row[cols[a.index()]])?;
        out[*a] = rated(&stems[a], v, 0.0, 100.0)?;
    }
    let sum = out.sum();
    if (sum - DatingAttributes::IMPORTANCE_TOTAL).abs() > IMPORTANCE_TOLERANCE {
        return Err(format!("importance sum {sum} ≠ 100"));
    }
    Ok(out)
}

struct Row {
    id: String,
    gender: String,
    age: Option<u32>,
    self_ratings: PerAttribute<f64>,
    importance_t1: PerAttribute<f64>,
    importance_t2: Option<PerAttribute<f64>>,
    partner: Option<(String, BTreeMap<Attribute, f64>, Option<bool>)>,
}

fn parse_row(row: &csv::StringRecord, c: &Cols, m: &ColumnMapping) -> Result<Row, String> {
    let id = row[c.id].trim().to_string();
    if id.is_empty() {
        return Err(format!("{} is missing", m.participant_id));
    }
    let age = match parse_num(&m.age, &row[c.age])? {
        None => None,
        Some(v) if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => Some(v as u32),
        Some(v) => return Err(format!("{} {v} is not a whole number", m.age)),
    };
    let mut self_ratings = PerAttribute::splat(0.0);
    for a in Attribute::ALL {
        let name = &m.self_ratings[a];
        self_ratings[*a] = rated(name, required(name, &row[c.self_ratings[a.index()]])?, 1.0, 10.0)?;
    }
    let importance_t1 = allocation(row, &c.importance_t1, &m.importance_t1)?;
    let importance_t2 = match &c.importance_t2 {
        Some(cols) if cols.iter().any(|i| !row[*i].trim().is_empty()) => {
            Some(allocation(row, cols, &m.importance_t2).map_err(|e| format!("T2 {e}"))?)
        }
        _ => None,
    };
    let partner_id = row[c.partner].trim().to_string();
    let partner = if partner_id.is_empty() {
        None
    } else {
        let mut ratings = BTreeMap::new();
        for a in Attribute::ALL {
            let name = &m.post_ratings[a];
            if let Some(v) = parse_num(name, &row[c.post[a.index()]])? {
                ratings.insert(*a, rated(name, v, 1.0, 10.0)?);
            }
        }
        let decision = match row[c.decision].trim() {
            "" => None,
            "1" | "true" | "yes" => Some(true),
            "0" | "false" | "no" => Some(false),
            other => return Err(format!("{} must be 0 or 1, got {other:?}", m.decision)),
        };
        Some((partner_id, ratings, decision))
    };
    Ok(Row {
        id,
        gender: row[c.gender].trim().to_string(),
        age,
        self_ratings,
        importance_t1,
        importance_t2,
        partner,
    })
}

/// Parse CSV text. Invalid rows are reported, never fatal; a missing
/// required column is.
pub fn parse_reader(input: impl Read, mapping: &ColumnMapping) -> Result<IngestReport, DatasetError> {
    mapping.validate()?;
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(input);
    let header = Header {
        index: reader
            .headers()?
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_string(), i))
            .collect(),
    };
    let t2: BTreeMap<Attribute, usize> = mapping
        .importance_t2
        .iter()
        .filter_map(|(a, n)| header.index.get(n).map(|i| (*a, *i)))
        .collect();
    let cols = Cols {
        id: header.require(&mapping.participant_id)?,
        partner: header.require(&mapping.partner_id)?,
        gender: header.require(&mapping.gender)?,
        age: header.require(&mapping.age)?,
        decision: header.require(&mapping.decision)?,
        self_ratings: attr_cols(&header, &mapping.self_ratings)?,
        importance_t1: attr_cols(&header, &mapping.importance_t1)?,
        post: attr_cols(&header, &mapping.post_ratings)?,
        importance_t2: (t2.len() == 6).then(|| {
            let mut out = [0; 6];
            for (a, i) in &t2 {
                out[a.index()] = *i;
            }
            out
        }),
    };
    let mut report = IngestReport::default();
    let mut order: Vec<String> = Vec::new();
    let mut by_id: HashMap<String, ParticipantRecord> = HashMap::new();
    for (n, row) in reader.records().enumerate() {
        let line = n + 2;
        report.rows_read += 1;
        let row = row?;
        let parsed = match parse_row(&row, &cols, mapping) {
            Ok(r) => r,
            Err(reason) => {
                let id = row.get(cols.id).map(|s| s.trim().to_string()).filter(|s| !s.is_empty());
                report.rejections.push(Rejection {
                    row: line,
                    participant_id: id,
                    reason,
                });
                continue;
            }
        };
        let rec = by_id.entry(parsed.id.clone()).or_insert_with(|| {
            order.push(parsed.id.clone());
            ParticipantRecord {
                participant_id: parsed.id.clone(),
                gender: parsed.gender.clone(),
                age: parsed.age,
                self_ratings: parsed.self_ratings,
                importance_t1: parsed.importance_t1,
                post_ratings: BTreeMap::new(),
                decisions: BTreeMap::new(),
                importance_t2: parsed.importance_t2,
            }
        });
        if let Some((partner, ratings, decision)) = parsed.partner {
            rec.post_ratings.insert(partner.clone(), ratings);
            if let Some(d) = decision {
                rec.decisions.insert(partner, d);
            }
        }
    }
    report.records = order.into_iter().map(|id| by_id.remove(&id).expect("inserted")).collect();
    Ok(report)
}

pub fn parse_csv(path: &Path, mapping: &ColumnMapping) -> Result<IngestReport, DatasetError> {
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_reader(file, mapping)
}

fn fmt(v: f64) -> String {
    v.to_string()
}

/// Write records back in the input layout, one row per partner.
pub fn export_csv(records: &[ParticipantRecord], mapping: &ColumnMapping, out: impl Write) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        mapping.participant_id.clone(),
        mapping.partner_id.clone(),
        mapping.gender.clone(),
        mapping.age.clone(),
        mapping.decision.clone(),
    ];
    for map in [&mapping.self_ratings, &mapping.importance_t1, &mapping.post_ratings, &mapping.importance_t2] {
        header.extend(Attribute::ALL.iter().map(|a| map[a].clone()));
    }
    w.write_record(&header)?;
    for r in records {
        let mut partners: Vec<&String> = r.post_ratings.keys().chain(r.decisions.keys()).collect();
        partners.sort();
        partners.dedup();
        let rows: Vec<Option<&String>> = if partners.is_empty() {
            vec![None]
        } else {
            partners.into_iter().map(Some).collect()
        };
        for p in rows {
            let mut fields = vec![
                r.participant_id.clone(),
                p.cloned().unwrap_or_default(),
                r.gender.clone(),
                r.age.map(|a| a.to_string()).unwrap_or_default(),
                p.and_then(|p| r.decisions.get(p))
                    .map(|d| if *d { "1" } else { "0" }.to_string())
                    .unwrap_or_default(),
            ];
            fields.extend(r.self_ratings.values().map(|v| fmt(*v)));
            fields.extend(r.importance_t1.values().map(|v| fmt(*v)));
            let ratings = p.and_then(|p| r.post_ratings.get(p));
            fields.extend(
                Attribute::ALL
                    .iter()
                    .map(|a| ratings.and_then(|m| m.get(a)).map(|v| fmt(*v)).unwrap_or_default()),
            );
            match &r.importance_t2 {
                Some(t2) => fields.extend(t2.values().map(|v| fmt(*v))),
                None => fields.extend(std::iter::repeat_n(String::new(), 6)),
            }
            w.write_record(&fields)?;
        }
    }
    w.flush().map_err(|source| DatasetError::Io {
        path: "<output>".into(),
        source,
    })?;
    Ok(())
}

/// Deterministic rating → trait mapping; see the module docs.
pub fn infer_profile(record: &ParticipantRecord) -> PersonalityProfile {
    let s = &record.self_ratings;
    let u = |a: Attribute| record.importance_t1[a] / 100.0;
    let d = |a: Attribute| (s[a] - 5.5) / 9.0;
    let mean = s.sum() / 6.0;
    let sd = (s.values().map(|v| (v - mean).powi(2)).sum::<f64>() / 6.0).sqrt();
    let clamp = |v: f64| v.clamp(0.0, 1.0);
    PersonalityProfile::new(
        clamp(0.5 + 0.5 * d(Attribute::Intelligence) + 1.5 * (u(Attribute::SharedInterests) - 1.0 / 6.0)),
        clamp(0.5 + 0.5 * d(Attribute::Ambition) + 1.5 * (u(Attribute::Ambition) - 1.0 / 6.0)),
        clamp(0.5 + 0.5 * d(Attribute::Fun) + 0.5 * d(Attribute::Attractiveness)),
        clamp(0.5 + d(Attribute::Sincerity)),
        clamp(0.5 - 0.5 * (mean - 5.5) / 4.5 + 0.25 * sd / 4.5),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(self_rating: f64) -> ParticipantRecord {
        ParticipantRecord {
            participant_id: "1".into(),
            gender: "0".into(),
            age: Some(25),
            self_ratings: PerAttribute::splat(self_rating),
            importance_t1: PerAttribute::splat(100.0 / 6.0),
            post_ratings: BTreeMap::new(),
            decisions: BTreeMap::new(),
            importance_t2: None,
        }
    }

    #[test]
    fn neutral_inputs_center_traits() {
        let p = infer_profile(&record(5.5));
        for (_, v) in p.traits().iter() {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn sincerity_is_monotone_in_agreeableness() {
        let mut r = record(5.0);
        let mut last = -1.0;
        for step in 0..=90 {
            r.self_ratings[Attribute::Sincerity] = 1.0 + step as f64 / 10.0;
            let a = infer_profile(&r).agreeableness;
            assert!(a >= last);
            last = a;
        }
    }

    #[test]
    fn missing_column_is_named() {
        let err = parse_reader("iid,pid\n1,2\n".as_bytes(), &ColumnMapping::default()).unwrap_err();
        assert!(matches!(err, DatasetError::MissingColumn(c) if c == "gender"));
    }
}
