//! Evolution statistics over T1/T2 snapshots and simulated sessions.
//!
//! Spreads are sample standard deviations (n − 1 denominator) and are
//! labeled that way in every report.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::ParticipantRecord;
use crate::simulation::EventResult;
use crate::types::{Attribute, PerAttribute, TableKey};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("percent change undefined for {0}: T1 mean is 0")]
    UndefinedChange(Attribute),
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("accuracy undefined on empty lists")]
    Empty,
    #[error("no {0} rows in table")]
    MissingTime(TimeLabel),
    #[error("duplicate row for agent {0} at {1}")]
    DuplicateRow(String, TimeLabel),
    #[error("snapshot CSV: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TimeLabel {
    T1,
    T2,
}

impl fmt::Display for TimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TimeLabel::T1 => "T1",
            TimeLabel::T2 => "T2",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRow {
    pub agent_id: String,
    pub time: TimeLabel,
    pub importance: PerAttribute<f64>,
    pub self_ratings: PerAttribute<f64>,
    /// Mean rating received from partners; absent for agents nobody rated.
    pub received_ratings: Option<PerAttribute<f64>>,
    pub overall_liking: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Importance,
    SelfRatings,
    ReceivedRatings,
}

impl SnapshotRow {
    fn field(&self, f: Field) -> Option<&PerAttribute<f64>> {
        match f {
            Field::Importance => Some(&self.importance),
            Field::SelfRatings => Some(&self.self_ratings),
            Field::ReceivedRatings => self.received_ratings.as_ref(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeMode {
    /// Change of the population means.
    #[default]
    Population,
    /// Mean of each agent's own paired change.
    PerAgent,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SnapshotTable {
    rows: Vec<SnapshotRow>,
}

impl SnapshotTable {
    pub fn new(rows: Vec<SnapshotRow>) -> Result<Self, MetricsError> {
        let mut seen = BTreeSet::new();
        for r in &rows {
            if !seen.insert((r.agent_id.as_str(), r.time)) {
                return Err(MetricsError::DuplicateRow(r.agent_id.clone(), r.time));
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[SnapshotRow] {
        &self.rows
    }

    fn at(&self, t: TimeLabel) -> impl Iterator<Item = &SnapshotRow> {
        self.rows.iter().filter(move |r| r.time == t)
    }

    fn paired(&self) -> Vec<(&SnapshotRow, &SnapshotRow)> {
        let t2: BTreeMap<&str, &SnapshotRow> = self.at(TimeLabel::T2).map(|r| (r.agent_id.as_str(), r)).collect();
        self.at(TimeLabel::T1)
            .filter_map(|a| t2.get(a.agent_id.as_str()).map(|b| (a, *b)))
            .collect()
    }

    /// T1 and T2 rows from the event snapshots. Received ratings come from
    /// the event's sessions and are the same at both times.
    pub fn from_event(result: &EventResult) -> Self {
        let mut received: BTreeMap<&str, (PerAttribute<f64>, f64, usize)> = BTreeMap::new();
        for s in &result.sessions {
            for (rater, ratee) in [(&s.agent_i, &s.agent_j), (&s.agent_j, &s.agent_i)] {
                let e = &s.evaluations[rater];
                let entry = received.entry(ratee).or_insert((PerAttribute::splat(0.0), 0.0, 0));
                for a in Attribute::ALL {
                    entry.0[*a] += e.partner_ratings[*a];
                }
                entry.1 += e.overall_liking;
                entry.2 += 1;
            }
        }
        let mut rows = Vec::new();
        for (label, time) in [("T1", TimeLabel::T1), ("T2", TimeLabel::T2)] {
            let Some(snaps) = result.snapshots.get(label) else { continue };
            for p in &result.participants {
                let Some(snap) = snaps.get(&p.id) else { continue };
                let got = received.get(p.id.as_str());
                rows.push(SnapshotRow {
                    agent_id: p.id.clone(),
                    time,
                    importance: snap.importance,
                    self_ratings: snap.self_ratings,
                    received_ratings: got.map(|(sum, _, n)| sum.map(|_, v| v / *n as f64)),
                    overall_liking: got.map(|(_, l, n)| l / *n as f64),
                });
            }
        }
        Self { rows }
    }

    pub fn write_csv(&self, out: impl Write) -> Result<(), MetricsError> {
        let csv_err = |e: csv::Error| MetricsError::Csv(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["agent_id".to_string(), "time".to_string()];
        for prefix in ["importance", "self", "received"] {
            header.extend(Attribute::ALL.iter().map(|a| format!("{prefix}_{a}")));
        }
        header.push("overall_liking".into());
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.rows {
            let mut f = vec![r.agent_id.clone(), r.time.to_string()];
            f.extend(r.importance.values().map(f64::to_string));
            f.extend(r.self_ratings.values().map(f64::to_string));
            match &r.received_ratings {
                Some(v) => f.extend(v.values().map(f64::to_string)),
                None => f.extend(std::iter::repeat_n(String::new(), 6)),
            }
            f.push(r.overall_liking.map(|v| v.to_string()).unwrap_or_default());
            w.write_record(&f).map_err(csv_err)?;
        }
        w.flush().map_err(|e| MetricsError::Csv(e.to_string()))
    }

    pub fn read_csv(input: impl Read) -> Result<Self, MetricsError> {
        let mut r = csv::Reader::from_reader(input);
        let mut rows = Vec::new();
        for (n, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| MetricsError::Csv(e.to_string()))?;
            let bad = |what: &str| MetricsError::Csv(format!("line {}: {what}", n + 2));
            if rec.len() != 21 {
                return Err(bad("expected 21 fields"));
            }
            let num = |i: usize| rec[i].trim().parse::<f64>().map_err(|_| bad(&format!("bad number {:?}", &rec[i])));
            let table = |start: usize| -> Result<PerAttribute<f64>, MetricsError> {
                let mut t = PerAttribute::splat(0.0);
                for a in Attribute::ALL {
                    t[*a] = num(start + a.index())?;
                }
                Ok(t)
            };
            let time = match rec[1].trim() {
                "T1" => TimeLabel::T1,
                "T2" => TimeLabel::T2,
                other => return Err(bad(&format!("unknown time label {other:?}"))),
            };
            rows.push(SnapshotRow {
                agent_id: rec[0].to_string(),
                time,
                importance: table(2)?,
                self_ratings: table(8)?,
                received_ratings: if rec[14].trim().is_empty() { None } else { Some(table(14)?) },
                overall_liking: if rec[20].trim().is_empty() { None } else { Some(num(20)?) },
            });
        }
        Self::new(rows)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; `None` below two values.
pub fn sample_sd(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    Some((xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt())
}

/// Percent change of one attribute of `field` from T1 to T2.
pub fn percent_change_of(table: &SnapshotTable, field: Field, attr: Attribute, mode: ChangeMode) -> Result<f64, MetricsError> {
    let pick = |r: &SnapshotRow| r.field(field).map(|t| t[attr]);
    match mode {
        ChangeMode::Population => {
            let t1: Vec<f64> = table.at(TimeLabel::T1).filter_map(pick).collect();
            let t2: Vec<f64> = table.at(TimeLabel::T2).filter_map(pick).collect();
            if t1.is_empty() {
                return Err(MetricsError::MissingTime(TimeLabel::T1));
            }
            if t2.is_empty() {
                return Err(MetricsError::MissingTime(TimeLabel::T2));
            }
            let (m1, m2) = (mean(&t1), mean(&t2));
            if m1 == 0.0 {
                return Err(MetricsError::UndefinedChange(attr));
            }
            Ok(100.0 * (m2 - m1) / m1)
        }
        ChangeMode::PerAgent => {
            let changes = per_agent_changes(table, field, attr)?;
            if changes.is_empty() {
                return Err(MetricsError::MissingTime(TimeLabel::T2));
            }
            Ok(mean(&changes))
        }
    }
}

fn per_agent_changes(table: &SnapshotTable, field: Field, attr: Attribute) -> Result<Vec<f64>, MetricsError> {
    let mut out = Vec::new();
    for (a, b) in table.paired() {
        if let (Some(x1), Some(x2)) = (a.field(field), b.field(field)) {
            if x1[attr] == 0.0 {
                return Err(MetricsError::UndefinedChange(attr));
            }
            out.push(100.0 * (x2[attr] - x1[attr]) / x1[attr]);
        }
    }
    Ok(out)
}

/// Percent change for every attribute; fails on the first undefined one.
pub fn percent_change(table: &SnapshotTable, field: Field, mode: ChangeMode) -> Result<PerAttribute<f64>, MetricsError> {
    let mut out = PerAttribute::splat(0.0);
    for a in Attribute::ALL {
        out[*a] = percent_change_of(table, field, *a, mode)?;
    }
    Ok(out)
}

/// Sample Pearson correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, MetricsError> {
    if xs.len() != ys.len() {
        return Err(MetricsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 3 {
        return Err(MetricsError::TooShort { needed: 3, got: xs.len() });
    }
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricsError::UndefinedCorrelation("zero variance"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Percent of positions where the two lists agree.
pub fn match_accuracy(predicted: &[bool], actual: &[bool]) -> Result<f64, MetricsError> {
    if predicted.len() != actual.len() {
        return Err(MetricsError::LengthMismatch(predicted.len(), actual.len()));
    }
    if predicted.is_empty() {
        return Err(MetricsError::Empty);
    }
    let agree = predicted.iter().zip(actual).filter(|(p, a)| p == a).count();
    Ok(100.0 * agree as f64 / predicted.len() as f64)
}

/// Mean |self − received| over rated agents and all attributes, at T1 and T2.
pub fn self_other_gap(table: &SnapshotTable) -> Result<(f64, f64), MetricsError> {
    let gap = |t: TimeLabel| -> Result<f64, MetricsError> {
        let diffs: Vec<f64> = table
            .at(t)
            .filter_map(|r| r.received_ratings.as_ref().map(|rec| (r, rec)))
            .flat_map(|(r, rec)| Attribute::ALL.iter().map(move |a| (r.self_ratings[*a] - rec[*a]).abs()))
            .collect();
        if diffs.is_empty() {
            Err(MetricsError::MissingTime(t))
        } else {
            Ok(mean(&diffs))
        }
    };
    Ok((gap(TimeLabel::T1)?, gap(TimeLabel::T2)?))
}

/// Per attribute, the correlation between a partner rating and overall
/// liking across every evaluation in the event.
pub fn attribute_liking_correlations(result: &EventResult) -> BTreeMap<Attribute, Result<f64, MetricsError>> {
    let evals: Vec<_> = result.sessions.iter().flat_map(|s| s.evaluations.values()).collect();
    let liking: Vec<f64> = evals.iter().map(|e| e.overall_liking).collect();
    Attribute::ALL
        .iter()
        .map(|a| {
            let xs: Vec<f64> = evals.iter().map(|e| e.partner_ratings[*a]).collect();
            (*a, pearson(&xs, &liking))
        })
        .collect()
}

/// `77.8%`
pub fn format_percent(v: f64) -> String {
    format!("{v:.1}%")
}

/// `+39.0%`
pub fn format_change(v: f64) -> String {
    format!("{v:+.1}%")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeEntry {
    pub percent: Option<f64>,
    pub formatted: Option<String>,
    /// Sample SD of the per-agent changes.
    pub spread: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEntry {
    #[serde(rename = "T1")]
    pub t1: f64,
    #[serde(rename = "T2")]
    pub t2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanComparison {
    /// Directed (rater, ratee) pairs with both a simulated and a human decision.
    pub decisions_compared: usize,
    pub decision_accuracy: Option<f64>,
    pub decision_accuracy_formatted: Option<String>,
    /// Pairs with both a simulated and a complete human rating.
    pub ratings_compared: usize,
    /// Correlation of mean simulated and mean human attribute ratings.
    pub rating_correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub spread_estimator: String,
    pub change_mode: ChangeMode,
    pub agents: usize,
    pub sessions: usize,
    pub aborted_sessions: usize,
    pub matches: usize,
    pub preference_change: BTreeMap<Attribute, ChangeEntry>,
    pub self_perception_change: BTreeMap<Attribute, ChangeEntry>,
    pub attribute_liking_correlation: BTreeMap<Attribute, Option<f64>>,
    pub self_other_gap: Option<GapEntry>,
    pub human_comparison: Option<HumanComparison>,
}

fn change_entries(table: &SnapshotTable, field: Field, mode: ChangeMode) -> BTreeMap<Attribute, ChangeEntry> {
    Attribute::ALL
        .iter()
        .map(|a| {
            let entry = match percent_change_of(table, field, *a, mode) {
                Ok(p) => ChangeEntry {
                    percent: Some(p),
                    formatted: Some(format_change(p)),
                    spread: per_agent_changes(table, field, *a).ok().and_then(|c| sample_sd(&c)),
                    error: None,
                },
                Err(e) => ChangeEntry {
                    percent: None,
                    formatted: None,
                    spread: None,
                    error: Some(e.to_string()),
                },
            };
            (*a, entry)
        })
        .collect()
}

fn compare_with_humans(result: &EventResult, humans: &[ParticipantRecord]) -> HumanComparison {
    let by_id: BTreeMap<&str, &ParticipantRecord> = humans.iter().map(|h| (h.participant_id.as_str(), h)).collect();
    let (mut predicted, mut actual) = (Vec::new(), Vec::new());
    let (mut sim, mut human) = (Vec::new(), Vec::new());
    for s in &result.sessions {
        for (rater, ratee) in [(&s.agent_i, &s.agent_j), (&s.agent_j, &s.agent_i)] {
            let Some(h) = by_id.get(rater.as_str()) else { continue };
            if let Some(d) = h.decisions.get(ratee) {
                predicted.push(s.decisions[rater]);
                actual.push(*d);
            }
            if let Some(r) = h.post_ratings.get(ratee).filter(|r| r.len() == 6) {
                sim.push(s.evaluations[rater].partner_ratings.sum() / 6.0);
                human.push(r.values().sum::<f64>() / 6.0);
            }
        }
    }
    let accuracy = match_accuracy(&predicted, &actual).ok();
    HumanComparison {
        decisions_compared: predicted.len(),
        decision_accuracy: accuracy,
        decision_accuracy_formatted: accuracy.map(format_percent),
        ratings_compared: sim.len(),
        rating_correlation: pearson(&sim, &human).ok(),
    }
}

/// The full battery over one event, optionally against the humans the
/// agents were built from.
pub fn report(result: &EventResult, humans: Option<&[ParticipantRecord]>, mode: ChangeMode) -> MetricsReport {
    let table = SnapshotTable::from_event(result);
    MetricsReport {
        spread_estimator: "sample_sd".into(),
        change_mode: mode,
        agents: result.participants.len(),
        sessions: result.sessions.len(),
        aborted_sessions: result.aborted.len(),
        matches: result.matches.match_count(),
        preference_change: change_entries(&table, Field::Importance, mode),
        self_perception_change: change_entries(&table, Field::SelfRatings, mode),
        attribute_liking_correlation: attribute_liking_correlations(result)
            .into_iter()
            .map(|(a, r)| (a, r.ok()))
            .collect(),
        self_other_gap: self_other_gap(&table).ok().map(|(t1, t2)| GapEntry { t1, t2 }),
        human_comparison: humans.map(|h| compare_with_humans(result, h)),
    }
}

/// JSON Schema the report conforms to.
pub const REPORT_SCHEMA: &str = include_str!("../data/report.schema.json");

impl MetricsReport {
    /// Flat `metric,attribute,value,spread` rows.
    pub fn write_csv(&self, out: impl Write) -> Result<(), MetricsError> {
        let err = |e: csv::Error| MetricsError::Csv(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["metric", "attribute", "value", "spread_sample_sd"]).map_err(err)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (name, entries) in [
            ("preference_change_percent", &self.preference_change),
            ("self_perception_change_percent", &self.self_perception_change),
        ] {
            for (a, e) in entries {
                w.write_record([name, a.key(), &opt(e.percent), &opt(e.spread)]).map_err(err)?;
            }
        }
        for (a, r) in &self.attribute_liking_correlation {
            w.write_record(["attribute_liking_correlation", a.key(), &opt(*r), ""]).map_err(err)?;
        }
        if let Some(g) = &self.self_other_gap {
            w.write_record(["self_other_gap_T1", "", &g.t1.to_string(), ""]).map_err(err)?;
            w.write_record(["self_other_gap_T2", "", &g.t2.to_string(), ""]).map_err(err)?;
        }
        if let Some(h) = &self.human_comparison {
            w.write_record(["decision_accuracy_percent", "", &opt(h.decision_accuracy), ""]).map_err(err)?;
            w.write_record(["human_rating_correlation", "", &opt(h.rating_correlation), ""]).map_err(err)?;
        }
        w.write_record(["matches", "", &self.matches.to_string(), ""]).map_err(err)?;
        w.flush().map_err(|e| MetricsError::Csv(e.to_string()))
    }
}
