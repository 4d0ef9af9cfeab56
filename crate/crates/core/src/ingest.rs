// SPDX-License-Identifier: Apache-2.0

//! Daily log-belief series from per-post sentiment probabilities.
//!
//! Input is CSV with header `agent_id,timestamp_iso8601,p_neg,p_neu,p_pos`.
//! Each post is reduced to a binary positive probability; an agent's value
//! for a day is the mean of `ln(p / (1 − p))` over that day's posts.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, NaiveDateTime, Utc};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_trace, write_trace, TraceRecord};

pub const PROB_CLAMP: f64 = 1e-4;
const SUM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SentimentRecord {
    pub agent_id: String,
    pub timestamp: DateTime<Utc>,
    pub p_neg: f64,
    pub p_neu: f64,
    pub p_pos: f64,
}

impl SentimentRecord {
    pub fn new(
        agent_id: impl Into<String>,
        timestamp: DateTime<Utc>,
        p_neg: f64,
        p_neu: f64,
        p_pos: f64,
    ) -> Result<Self> {
        let r = Self {
            agent_id: agent_id.into(),
            timestamp,
            p_neg,
            p_neu,
            p_pos,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let ps = [self.p_neg, self.p_neu, self.p_pos];
        if ps.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter(format!(
                "probabilities {ps:?} outside [0, 1]"
            )));
        }
        let s: f64 = ps.iter().sum();
        if (s - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidParameter(format!("probabilities sum to {s}")));
        }
        Ok(())
    }
}

/// `p_pos / (p_neg + p_pos)` clamped to `[1e-4, 1 − 1e-4]`; `None` when
/// the post carries no polar mass.
pub fn binary_positive_prob(r: &SentimentRecord) -> Option<f64> {
    let polar = r.p_neg + r.p_pos;
    if polar <= 0.0 {
        return None;
    }
    Some((r.p_pos / polar).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP))
}

/// Accepts RFC 3339 and offset-free `YYYY-MM-DD[T ]HH:MM:SS[.f]` (read as UTC).
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|n| n.and_utc())
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    agent_id: String,
    timestamp_iso8601: String,
    p_neg: f64,
    p_neu: f64,
    p_pos: f64,
}

pub fn read_sentiment_csv<R: Read>(input: R) -> Result<Vec<SentimentRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = Vec::new();
    for (idx, row) in rdr.deserialize::<CsvRow>().enumerate() {
        // header is line 1
        let line = idx + 2;
        let malformed = |reason: String| Error::Malformed { line, reason };
        let row = row.map_err(|e| malformed(e.to_string()))?;
        let timestamp = parse_timestamp(&row.timestamp_iso8601)
            .ok_or_else(|| malformed(format!("bad timestamp `{}`", row.timestamp_iso8601)))?;
        let rec = SentimentRecord {
            agent_id: row.agent_id,
            timestamp,
            p_neg: row.p_neg,
            p_neu: row.p_neu,
            p_pos: row.p_pos,
        };
        rec.validate().map_err(|e| malformed(e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn load_sentiment_csv(path: &Path) -> Result<Vec<SentimentRecord>> {
    read_sentiment_csv(std::fs::File::open(path)?)
}

/// Per-day, per-agent scalar log-belief ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefSeries {
    /// Agent ids; row `k` of every day is `agents[k]`.
    pub agents: Vec<String>,
    pub first_day: NaiveDate,
    /// `values[i][k]`: day `first_day + i`, agent `k`.
    pub values: Vec<Vec<f64>>,
}

impl BeliefSeries {
    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn n_days(&self) -> usize {
        self.values.len()
    }

    pub fn day(&self, i: usize) -> NaiveDate {
        self.first_day + Duration::days(i as i64)
    }

    pub fn value(&self, day: usize, agent: usize) -> f64 {
        self.values[day][agent]
    }

    /// `Λ_i` as an N×1 matrix.
    pub fn lambda(&self, day: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.n_agents(), 1, &self.values[day])
    }

    pub fn to_records(&self) -> Vec<TraceRecord> {
        (0..self.n_days())
            .map(|i| TraceRecord::new(i, &self.lambda(i)))
            .collect()
    }
}

/// Buckets posts into days shifted by `offset_hours` from UTC.
pub fn build_belief_series(records: &[SentimentRecord], offset_hours: f64) -> Result<BeliefSeries> {
    if !offset_hours.is_finite() || offset_hours.abs() > 24.0 {
        return Err(Error::InvalidParameter(format!(
            "timezone offset {offset_hours} h"
        )));
    }
    let shift = Duration::seconds((offset_hours * 3600.0).round() as i64);
    // (agent, day) -> (sum of log-ratios, count)
    let mut sums: BTreeMap<(&str, NaiveDate), (f64, usize)> = BTreeMap::new();
    let mut agents: BTreeSet<&str> = BTreeSet::new();
    for r in records {
        let Some(p) = binary_positive_prob(r) else {
            log::warn!(
                "dropping post by `{}` at {}: p_neg + p_pos = 0",
                r.agent_id,
                r.timestamp
            );
            continue;
        };
        let day = (r.timestamp + shift).date_naive();
        let e = sums.entry((r.agent_id.as_str(), day)).or_insert((0.0, 0));
        e.0 += (p / (1.0 - p)).ln();
        e.1 += 1;
        agents.insert(r.agent_id.as_str());
    }
    let first_day = sums
        .keys()
        .map(|k| k.1)
        .min()
        .ok_or_else(|| Error::EmptyInput("no usable posts".into()))?;
    let last_day = sums.keys().map(|k| k.1).max().unwrap_or(first_day);
    let agents: Vec<&str> = agents.into_iter().collect();
    let n_days = (last_day - first_day).num_days() as usize + 1;

    let mut current = vec![0.0; agents.len()];
    let mut values = Vec::with_capacity(n_days);
    for i in 0..n_days {
        let day = first_day + Duration::days(i as i64);
        for (k, a) in agents.iter().enumerate() {
            if let Some(&(s, n)) = sums.get(&(*a, day)) {
                current[k] = s / n as f64;
            }
        }
        values.push(current.clone());
    }
    Ok(BeliefSeries {
        agents: agents.into_iter().map(String::from).collect(),
        first_day,
        values,
    })
}

/// Writes the series as a trace with one record per day; agent order is
/// the row order of `series.agents`.
pub fn export_trace(series: &BeliefSeries, path: &Path) -> Result<()> {
    write_trace(path, &series.to_records())
}

/// Reads an exported trace back; agent ids and dates are not stored in the
/// trace and must be supplied.
pub fn load_series(path: &Path, agents: Vec<String>, first_day: NaiveDate) -> Result<BeliefSeries> {
    let records = read_trace(path)?;
    let mut values = Vec::with_capacity(records.len());
    for r in &records {
        if r.lambda.len() != agents.len() || r.lambda.iter().any(|row| row.len() != 1) {
            return Err(Error::DimensionMismatch(format!(
                "record {} is not {}×1",
                r.i,
                agents.len()
            )));
        }
        values.push(r.lambda.iter().map(|row| row[0]).collect());
    }
    if values.is_empty() {
        return Err(Error::EmptyInput("empty trace".into()));
    }
    Ok(BeliefSeries {
        agents,
        first_day,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ts(s: &str) -> DateTime<Utc> {
        parse_timestamp(s).unwrap()
    }

    fn rec(agent: &str, t: &str, neg: f64, pos: f64) -> SentimentRecord {
        SentimentRecord::new(agent, ts(t), neg, (1.0 - neg - pos).max(0.0), pos).unwrap()
    }

    #[test]
    fn binary_reduction() {
        let r = rec("a", "2021-01-01T00:00:00Z", 0.2, 0.3);
        assert_relative_eq!(binary_positive_prob(&r).unwrap(), 0.6, epsilon = 1e-15);
        let r = rec("a", "2021-01-01T00:00:00Z", 0.001, 0.099);
        assert_relative_eq!(binary_positive_prob(&r).unwrap(), 0.99, epsilon = 1e-12);
        let r = rec("a", "2021-01-01T00:00:00Z", 0.4, 0.0);
        assert_eq!(binary_positive_prob(&r), Some(1e-4));
        let r = rec("a", "2021-01-01T00:00:00Z", 0.0, 1.0);
        assert_eq!(binary_positive_prob(&r), Some(1.0 - 1e-4));
        let r = rec("a", "2021-01-01T00:00:00Z", 0.0, 0.0);
        assert_eq!(binary_positive_prob(&r), None);
    }

    #[test]
    fn record_validation() {
        let t = ts("2021-01-01T00:00:00Z");
        assert!(SentimentRecord::new("a", t, 0.5, 0.5, 0.1).is_err());
        assert!(SentimentRecord::new("a", t, -0.1, 0.6, 0.5).is_err());
        assert!(SentimentRecord::new("a", t, 0.2, 0.3, 0.5 + 5e-7).is_ok());
    }

    #[test]
    fn timestamp_forms() {
        let a = ts("2021-03-04T05:06:07Z");
        assert_eq!(ts("2021-03-04T07:06:07+02:00"), a);
        assert_eq!(ts("2021-03-04 05:06:07"), a);
        assert!(parse_timestamp("yesterday").is_none());
    }

    #[test]
    fn single_neutral_post_is_zero() {
        let s = build_belief_series(&[rec("a", "2021-01-01T10:00:00Z", 0.25, 0.25)], 0.0).unwrap();
        assert_eq!(s.values, vec![vec![0.0]]);
    }

    #[test]
    fn symmetric_posts_cancel() {
        let recs = [
            rec("a", "2021-01-01T01:00:00Z", 0.2, 0.8),
            rec("a", "2021-01-01T23:00:00Z", 0.8, 0.2),
        ];
        let s = build_belief_series(&recs, 0.0).unwrap();
        assert_relative_eq!(s.values[0][0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn forward_fill_and_late_start() {
        let recs = [
            rec("b", "2021-01-01T12:00:00Z", 0.2, 0.8),
            rec("a", "2021-01-02T12:00:00Z", 0.1, 0.3),
            rec("b", "2021-01-03T12:00:00Z", 0.5, 0.5),
            rec("b", "2021-01-03T13:00:00Z", 0.25, 0.75),
        ];
        let s = build_belief_series(&recs, 0.0).unwrap();
        assert_eq!(s.agents, vec!["a", "b"]);
        assert_eq!(s.n_days(), 3);
        assert_eq!(s.day(2), NaiveDate::from_ymd_opt(2021, 1, 3).unwrap());
        let ln4 = 4f64.ln();
        let ln3 = 3f64.ln();
        // agent a: nothing on day 0, ln 3 on day 1, carried to day 2
        assert_eq!(s.value(0, 0), 0.0);
        assert_relative_eq!(s.value(1, 0), ln3, epsilon = 1e-12);
        assert_eq!(s.value(2, 0), s.value(1, 0));
        // agent b: ln 4, carried, then mean of 0 and ln 3
        assert_relative_eq!(s.value(0, 1), ln4, epsilon = 1e-12);
        assert_eq!(s.value(1, 1), s.value(0, 1));
        assert_relative_eq!(s.value(2, 1), 0.5 * ln3, epsilon = 1e-12);
    }

    #[test]
    fn offset_moves_day_boundary() {
        let recs = [
            rec("a", "2021-01-01T22:00:00Z", 0.2, 0.8),
            rec("a", "2021-01-02T01:00:00Z", 0.8, 0.2),
        ];
        assert_eq!(build_belief_series(&recs, 0.0).unwrap().n_days(), 2);
        let s = build_belief_series(&recs, 3.0).unwrap();
        assert_eq!(s.n_days(), 1);
        assert_eq!(s.first_day, NaiveDate::from_ymd_opt(2021, 1, 2).unwrap());
        let s = build_belief_series(&recs, -2.0).unwrap();
        assert_eq!(s.n_days(), 1);
        assert_eq!(s.first_day, NaiveDate::from_ymd_opt(2021, 1, 1).unwrap());
    }

    #[test]
    fn dropped_posts_and_empty_input() {
        assert!(matches!(
            build_belief_series(&[], 0.0),
            Err(Error::EmptyInput(_))
        ));
        let only_neutral = [rec("a", "2021-01-01T00:00:00Z", 0.0, 0.0)];
        assert!(matches!(
            build_belief_series(&only_neutral, 0.0),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn csv_parsing_and_errors() {
        let text = "agent_id,timestamp_iso8601,p_neg,p_neu,p_pos\nalice,2021-01-01T00:00:00Z,0.2,0.5,0.3\n";
        let recs = read_sentiment_csv(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].agent_id, "alice");
        let bad = format!("{text}bob,2021-01-01T00:00:00Z,0.2,0.5,0.5\n");
        assert!(matches!(
            read_sentiment_csv(bad.as_bytes()),
            Err(Error::Malformed { line: 3, .. })
        ));
        let bad = format!("{text}bob,noon,0.2,0.5,0.3\n");
        assert!(matches!(
            read_sentiment_csv(bad.as_bytes()),
            Err(Error::Malformed { line: 3, .. })
        ));
    }

    #[test]
    fn export_round_trip() {
        let recs = [
            rec("x", "2021-01-01T00:00:00Z", 0.1, 0.7),
            rec("y", "2021-01-02T00:00:00Z", 0.6, 0.1),
            rec("x", "2021-01-03T00:00:00Z", 0.3, 0.3),
        ];
        let s = build_belief_series(&recs, 0.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("days.jsonl");
        export_trace(&s, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(!text.contains("map") && !text.contains("theta_star"));
        let back = load_series(&p, s.agents.clone(), s.first_day).unwrap();
        assert_eq!(back, s);
    }
}
