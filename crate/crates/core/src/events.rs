//! Event and market data model.
//!
//! Events are binary claims with a creation date, an expiry, and (once
//! settled) a resolution. Market snapshots carry the human crowd's
//! probability spread for an event on a given day. Both are read from a
//! line-delimited JSON file where each line is one event with its market
//! history attached.

use std::collections::HashSet;
use std::fmt;
use std::io::BufRead;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EventsError {
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate event id `{0}`")]
    DuplicateId(String),
    #[error("event `{0}` is unresolved")]
    UnresolvedEvent(String),
    #[error("failed to read dataset: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "covid19")]
    Covid19,
    #[serde(rename = "finance")]
    Finance,
    #[serde(rename = "tech")]
    TechIndustry,
    #[serde(rename = "misc")]
    Misc,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Covid19 => "covid19",
            Category::Finance => "finance",
            Category::TechIndustry => "tech",
            Category::Misc => "misc",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Resolution {
    Yes,
    No,
    Unresolved,
}

/// One binary market question.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub id: String,
    pub name: String,
    /// The binary claim that must be satisfied by `expires`.
    pub condition: String,
    pub description: String,
    pub category: Category,
    pub created: NaiveDate,
    pub expires: NaiveDate,
    pub resolved_at: Option<NaiveDate>,
    pub resolution: Resolution,
}

impl Event {
    /// Checks the date and resolution invariants.
    pub fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.created > self.expires {
            return Err(format!(
                "created {} is after expires {}",
                self.created, self.expires
            ));
        }
        match (self.resolution, self.resolved_at) {
            (Resolution::Unresolved, Some(_)) => {
                Err("resolved_at present on an unresolved event".into())
            }
            (Resolution::Yes | Resolution::No, None) => {
                Err("resolution present without resolved_at".into())
            }
            (_, Some(at)) if at < self.created || at > self.expires => Err(format!(
                "resolved_at {at} outside [{}, {}]",
                self.created, self.expires
            )),
            _ => Ok(()),
        }
    }

    /// Whether the event is open for forecasting on `on`: created, not yet
    /// resolved, not yet expired. Resolution day counts as resolved.
    pub fn is_active(&self, on: NaiveDate) -> bool {
        self.created <= on
            && self.resolved_at.map_or(true, |at| at > on)
            && self.expires > on
    }

    /// Last day on which a market snapshot for this event is meaningful.
    pub fn window_end(&self) -> NaiveDate {
        self.resolved_at.unwrap_or(self.expires)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitLabel {
    Val,
    Test,
    Custom(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DatasetFormat {
    /// One JSON object per line.
    #[default]
    JsonLines,
}

/// Human prediction spread for an event on one day.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSnapshot {
    pub event_id: String,
    pub date: NaiveDate,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub label: SplitLabel,
    pub events: Vec<Event>,
    pub snapshots: Vec<MarketSnapshot>,
}

impl DatasetSplit {
    pub fn event(&self, id: &str) -> Option<&Event> {
        self.events.iter().find(|e| e.id == id)
    }

    /// The snapshot for `event_id` dated exactly `date`.
    pub fn snapshot_on(&self, event_id: &str, date: NaiveDate) -> Option<&MarketSnapshot> {
        self.snapshots
            .iter()
            .find(|s| s.event_id == event_id && s.date == date)
    }
}

// Wire shapes. Field order here is the canonical serialization order.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventRecord {
    id: String,
    name: String,
    condition: String,
    #[serde(default)]
    description: String,
    category: Category,
    created: NaiveDate,
    expires: NaiveDate,
    #[serde(default)]
    resolved_at: Option<NaiveDate>,
    #[serde(default)]
    resolution: Option<WireResolution>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    market: Vec<MarketRecord>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum WireResolution {
    Yes,
    No,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarketRecord {
    date: NaiveDate,
    lower: f64,
    upper: f64,
}

/// Parses a line-delimited event file. Blank lines are skipped; any
/// malformed line rejects the whole file.
pub fn parse_dataset<R: BufRead>(
    reader: R,
    format: DatasetFormat,
    label: SplitLabel,
) -> Result<DatasetSplit, EventsError> {
    let DatasetFormat::JsonLines = format;
    let mut events = Vec::new();
    let mut snapshots = Vec::new();
    let mut seen = HashSet::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| EventsError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| EventsError::MalformedRecord {
            line: line_no,
            reason,
        };
        let record: EventRecord =
            serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let (event, market) = record.into_parts();
        event.validate().map_err(malformed)?;
        for snap in &market {
            validate_snapshot(&event, snap).map_err(malformed)?;
        }
        if !seen.insert(event.id.clone()) {
            return Err(EventsError::DuplicateId(event.id));
        }
        snapshots.extend(market);
        events.push(event);
    }

    Ok(DatasetSplit {
        label,
        events,
        snapshots,
    })
}

/// Parses a dataset held in memory.
pub fn parse_dataset_str(text: &str, label: SplitLabel) -> Result<DatasetSplit, EventsError> {
    parse_dataset(text.as_bytes(), DatasetFormat::JsonLines, label)
}

fn validate_snapshot(event: &Event, s: &MarketSnapshot) -> Result<(), String> {
    if !(0.0..=1.0).contains(&s.lower) || !(0.0..=1.0).contains(&s.upper) || s.lower > s.upper {
        return Err(format!(
            "market spread ({}, {}) violates 0 <= lower <= upper <= 1",
            s.lower, s.upper
        ));
    }
    if s.date < event.created || s.date > event.window_end() {
        return Err(format!(
            "market snapshot dated {} outside [{}, {}]",
            s.date,
            event.created,
            event.window_end()
        ));
    }
    Ok(())
}

impl EventRecord {
    fn into_parts(self) -> (Event, Vec<MarketSnapshot>) {
        let resolution = match self.resolution {
            Some(WireResolution::Yes) => Resolution::Yes,
            Some(WireResolution::No) => Resolution::No,
            None => Resolution::Unresolved,
        };
        let market = self
            .market
            .into_iter()
            .map(|m| MarketSnapshot {
                event_id: self.id.clone(),
                date: m.date,
                lower: m.lower,
                upper: m.upper,
            })
            .collect();
        let event = Event {
            id: self.id,
            name: self.name,
            condition: self.condition,
            description: self.description,
            category: self.category,
            created: self.created,
            expires: self.expires,
            resolved_at: self.resolved_at,
            resolution,
        };
        (event, market)
    }
}

/// Serializes a split back to its canonical line-delimited form.
pub fn serialize_dataset(split: &DatasetSplit) -> String {
    let mut out = String::new();
    for event in &split.events {
        let market = split
            .snapshots
            .iter()
            .filter(|s| s.event_id == event.id)
            .map(|s| MarketRecord {
                date: s.date,
                lower: s.lower,
                upper: s.upper,
            })
            .collect();
        let record = EventRecord {
            id: event.id.clone(),
            name: event.name.clone(),
            condition: event.condition.clone(),
            description: event.description.clone(),
            category: event.category,
            created: event.created,
            expires: event.expires,
            resolved_at: event.resolved_at,
            resolution: match event.resolution {
                Resolution::Yes => Some(WireResolution::Yes),
                Resolution::No => Some(WireResolution::No),
                Resolution::Unresolved => None,
            },
            market,
        };
        out.push_str(&serde_json::to_string(&record).expect("event record serializes"));
        out.push('\n');
    }
    out
}

/// Events open for forecasting on `on`, in input order.
pub fn active_events(split: &DatasetSplit, on: NaiveDate) -> Vec<&Event> {
    split.events.iter().filter(|e| e.is_active(on)).collect()
}

/// Point prediction from a market spread: the midpoint of the bounds.
pub fn market_point_prediction(s: &MarketSnapshot) -> f64 {
    (s.lower + s.upper) / 2.0
}

pub fn outcome_indicator(e: &Event) -> Result<u8, EventsError> {
    match e.resolution {
        Resolution::Yes => Ok(1),
        Resolution::No => Ok(0),
        Resolution::Unresolved => Err(EventsError::UnresolvedEvent(e.id.clone())),
    }
}
