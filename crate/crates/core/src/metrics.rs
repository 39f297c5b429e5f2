//! Brier-family scoring and the bias-analysis arithmetic built on it.
//!
//! Brier = (1/N) Σ (f_t - o_t)², lower is better. The weighted variant
//! scores positively and negatively resolving events separately and
//! averages the two, so a forecaster that always says "unlikely" cannot hide
//! behind a dataset where most events resolve No.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{market_point_prediction, Category, DatasetSplit, Resolution};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("empty input")]
    EmptyInput,
    #[error("no {0} events to score")]
    EmptyClass(OutcomeClass),
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("forecast references unknown event `{0}`")]
    UnknownEvent(String),
    #[error("forecast references unresolved event `{0}`")]
    UnresolvedEvent(String),
    #[error("no market snapshot for `{0}` on {1}")]
    MissingSnapshot(String, NaiveDate),
    #[error("event sets differ; unmatched ids: {0:?}")]
    MismatchedEventSets(Vec<String>),
    #[error("event `{0}` appears more than once")]
    DuplicateEvent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeClass {
    Yes,
    No,
}

impl std::fmt::Display for OutcomeClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OutcomeClass::Yes => "positively resolving",
            OutcomeClass::No => "negatively resolving",
        })
    }
}

/// One strategy's probability for one event at one prediction date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub event_id: String,
    pub strategy: String,
    pub prediction_date: NaiveDate,
    pub probability: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub samples: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_ref: Option<String>,
}

impl ForecastRecord {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(format!("probability {} outside [0, 1]", self.probability));
        }
        if let Some(bad) = self.samples.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(format!("sample {bad} outside [0, 1]"));
        }
        if !self.samples.is_empty() {
            let m = mean(&self.samples);
            if (m - self.probability).abs() > 1e-9 {
                return Err(format!(
                    "probability {} is not the mean of its samples ({m})",
                    self.probability
                ));
            }
        }
        Ok(())
    }
}

/// Compensated (Neumaier) arithmetic mean. Returns NaN on empty input.
pub fn mean(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    (sum + comp) / values.len() as f64
}

fn check_probability(p: f64) -> Result<(), MetricsError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(MetricsError::InvalidProbability(p))
    }
}

/// Mean squared error between forecasts and 0/1 outcomes.
pub fn brier(pairs: &[(f64, u8)]) -> Result<f64, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut total = 0.0;
    for &(p, o) in pairs {
        check_probability(p)?;
        let err = p - f64::from(o.min(1));
        total += err * err;
    }
    Ok(total / pairs.len() as f64)
}

/// Average of the per-class Brier scores.
pub fn weighted_brier(yes_pairs: &[(f64, u8)], no_pairs: &[(f64, u8)]) -> Result<f64, MetricsError> {
    if yes_pairs.is_empty() {
        return Err(MetricsError::EmptyClass(OutcomeClass::Yes));
    }
    if no_pairs.is_empty() {
        return Err(MetricsError::EmptyClass(OutcomeClass::No));
    }
    Ok((brier(yes_pairs)? + brier(no_pairs)?) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub count: usize,
    pub brier: f64,
}

/// Aggregate metrics for one set of forecasts. Values are kept at full
/// precision; rounding happens in [`render_markdown`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub n_total: usize,
    pub n_yes: usize,
    pub n_no: usize,
    pub brier: f64,
    pub brier_yes: Option<f64>,
    pub brier_no: Option<f64>,
    pub weighted_brier: Option<f64>,
    pub per_category: BTreeMap<Category, CategoryScore>,
    pub mean_prediction: f64,
}

/// Scores forecasts against the resolutions recorded in `split`.
pub fn score(forecasts: &[ForecastRecord], split: &DatasetSplit) -> Result<ScoreReport, MetricsError> {
    if forecasts.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let by_id: HashMap<&str, _> = split.events.iter().map(|e| (e.id.as_str(), e)).collect();

    let mut yes = Vec::new();
    let mut no = Vec::new();
    let mut per_cat: BTreeMap<Category, Vec<(f64, u8)>> = BTreeMap::new();
    let mut probs = Vec::with_capacity(forecasts.len());

    for f in forecasts {
        let event = by_id
            .get(f.event_id.as_str())
            .ok_or_else(|| MetricsError::UnknownEvent(f.event_id.clone()))?;
        check_probability(f.probability)?;
        let outcome = match event.resolution {
            Resolution::Yes => 1,
            Resolution::No => 0,
            Resolution::Unresolved => return Err(MetricsError::UnresolvedEvent(event.id.clone())),
        };
        let pair = (f.probability, outcome);
        if outcome == 1 {
            yes.push(pair);
        } else {
            no.push(pair);
        }
        per_cat.entry(event.category).or_default().push(pair);
        probs.push(f.probability);
    }

    let pooled: Vec<_> = yes.iter().chain(no.iter()).copied().collect();
    let brier_yes = (!yes.is_empty()).then(|| brier(&yes)).transpose()?;
    let brier_no = (!no.is_empty()).then(|| brier(&no)).transpose()?;
    let weighted = match (brier_yes, brier_no) {
        (Some(y), Some(n)) => Some((y + n) / 2.0),
        _ => None,
    };
    let per_category = per_cat
        .into_iter()
        .map(|(cat, pairs)| {
            let b = brier(&pairs)?;
            Ok((
                cat,
                CategoryScore {
                    count: pairs.len(),
                    brier: b,
                },
            ))
        })
        .collect::<Result<_, MetricsError>>()?;

    Ok(ScoreReport {
        n_total: pooled.len(),
        n_yes: yes.len(),
        n_no: no.len(),
        brier: brier(&pooled)?,
        brier_yes,
        brier_no,
        weighted_brier: weighted,
        per_category,
        mean_prediction: mean(&probs),
    })
}

/// Splits a mixed forecast list into per-strategy groups, keeping the order
/// in which strategies first appear.
pub fn group_by_strategy(forecasts: &[ForecastRecord]) -> Vec<(String, Vec<ForecastRecord>)> {
    let mut groups: Vec<(String, Vec<ForecastRecord>)> = Vec::new();
    for f in forecasts {
        match groups.iter_mut().find(|(s, _)| *s == f.strategy) {
            Some((_, v)) => v.push(f.clone()),
            None => groups.push((f.strategy.clone(), vec![f.clone()])),
        }
    }
    groups
}

/// Human-market forecasts: the spread midpoint of each event's snapshot on
/// `date`, for every event active on that date.
pub fn market_forecasts(split: &DatasetSplit, date: NaiveDate) -> Result<Vec<ForecastRecord>, MetricsError> {
    crate::events::active_events(split, date)
        .into_iter()
        .map(|e| {
            let snap = split
                .snapshot_on(&e.id, date)
                .ok_or_else(|| MetricsError::MissingSnapshot(e.id.clone(), date))?;
            Ok(ForecastRecord {
                event_id: e.id.clone(),
                strategy: "human".into(),
                prediction_date: date,
                probability: market_point_prediction(snap),
                samples: Vec::new(),
                trace_ref: None,
            })
        })
        .collect()
}

/// Sum of the probability an event happens and the probability it does not.
/// A coherent forecaster lands on 1.0.
pub fn coherence_sum(mean_forward: f64, mean_reversed: f64) -> f64 {
    mean_forward + mean_reversed
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftRow {
    pub event_id: String,
    pub p_just: f64,
    pub p_rationale: f64,
    pub delta: f64,
}

/// Joins just-answer and with-rationale predictions per event.
pub fn prediction_shift(
    just_answer: &[(String, f64)],
    with_rationale: &[(String, f64)],
) -> Result<Vec<ShiftRow>, MetricsError> {
    let ja = index_unique(just_answer)?;
    let wr = index_unique(with_rationale)?;
    let ja_ids: BTreeSet<_> = ja.keys().collect();
    let wr_ids: BTreeSet<_> = wr.keys().collect();
    let missing: Vec<String> = ja_ids
        .symmetric_difference(&wr_ids)
        .map(|s| s.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(MetricsError::MismatchedEventSets(missing));
    }
    Ok(ja
        .iter()
        .map(|(id, &p_just)| {
            let p_rationale = wr[id];
            ShiftRow {
                event_id: id.to_string(),
                p_just,
                p_rationale,
                delta: p_rationale - p_just,
            }
        })
        .collect())
}

fn index_unique(rows: &[(String, f64)]) -> Result<BTreeMap<&str, f64>, MetricsError> {
    let mut out = BTreeMap::new();
    for (id, p) in rows {
        check_probability(*p)?;
        if out.insert(id.as_str(), *p).is_some() {
            return Err(MetricsError::DuplicateEvent(id.clone()));
        }
    }
    Ok(out)
}

/// Four-decimal rendering used by every report table.
pub fn fmt4(v: f64) -> String {
    format!("{v:.4}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt4).unwrap_or_else(|| "n/a".into())
}

/// Markdown table with one column per strategy, rows laid out like the
/// published Brier / Weighted Brier tables. Lower is better.
pub fn render_markdown(columns: &[(String, ScoreReport)]) -> String {
    let mut out = String::new();
    let header: Vec<&str> = columns.iter().map(|(s, _)| s.as_str()).collect();
    let _ = writeln!(out, "| | {} |", header.join(" | "));
    let _ = writeln!(out, "|---|{}", "---|".repeat(columns.len()));
    let mut row = |label: &str, f: &dyn Fn(&ScoreReport) -> String| {
        let cells: Vec<String> = columns.iter().map(|(_, r)| f(r)).collect();
        let _ = writeln!(out, "| {label} | {} |", cells.join(" | "));
    };
    row("Brier", &|r| fmt4(r.brier));
    row("Resolve Yes", &|r| fmt_opt(r.brier_yes));
    row("Resolve No", &|r| fmt_opt(r.brier_no));
    row("Weighted", &|r| fmt_opt(r.weighted_brier));
    row("Average Probability", &|r| fmt4(r.mean_prediction));
    row("Events (yes/no)", &|r| format!("{} ({}/{})", r.n_total, r.n_yes, r.n_no));

    let cats: BTreeSet<Category> = columns
        .iter()
        .flat_map(|(_, r)| r.per_category.keys().copied())
        .collect();
    for cat in cats {
        row(&format!("Brier [{cat}]"), &|r| {
            r.per_category
                .get(&cat)
                .map(|c| format!("{} (n={})", fmt4(c.brier), c.count))
                .unwrap_or_else(|| "n/a".into())
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{parse_dataset_str, SplitLabel};

    #[test]
    fn brier_examples() {
        assert_eq!(brier(&[(1.0, 1)]).unwrap(), 0.0);
        assert_eq!(brier(&[(0.5, 1), (0.5, 0)]).unwrap(), 0.25);
        let b = brier(&[(0.2, 0), (0.9, 1), (0.4, 0)]).unwrap();
        assert!((b - 0.07).abs() < 1e-12, "{b}");
        assert_eq!(brier(&[]), Err(MetricsError::EmptyInput));
        assert_eq!(
            brier(&[(1.5, 1)]),
            Err(MetricsError::InvalidProbability(1.5))
        );
    }

    #[test]
    fn weighted_examples() {
        // one pair per class with squared error equal to the target Brier
        let pair = |b: f64, o: u8| {
            let p = if o == 1 { 1.0 - b.sqrt() } else { b.sqrt() };
            vec![(p, o)]
        };
        let human = weighted_brier(&pair(0.2592, 1), &pair(0.0901, 0)).unwrap();
        assert!((human - 0.17465).abs() < 1e-12);
        let basic = weighted_brier(&pair(0.3407, 1), &pair(0.0503, 0)).unwrap();
        assert!((basic - 0.1955).abs() < 1e-12);
        let same = weighted_brier(&pair(0.3, 1), &pair(0.3, 0)).unwrap();
        assert!((same - 0.3).abs() < 1e-12);
        assert_eq!(
            weighted_brier(&[], &[(0.1, 0)]),
            Err(MetricsError::EmptyClass(OutcomeClass::Yes))
        );
        assert_eq!(
            weighted_brier(&[(0.1, 1)], &[]),
            Err(MetricsError::EmptyClass(OutcomeClass::No))
        );
    }

    fn split4() -> DatasetSplit {
        let line = |id: &str, res: &str, cat: &str| {
            format!(
                r#"{{"id":"{id}","name":"n","condition":"c","description":"","category":"{cat}","created":"2022-01-01","expires":"2022-12-31","resolved_at":"2022-10-01","resolution":"{res}"}}"#
            )
        };
        let text = [
            line("a", "yes", "tech"),
            line("b", "yes", "finance"),
            line("c", "no", "tech"),
            line("d", "no", "misc"),
        ]
        .join("\n");
        parse_dataset_str(&text, SplitLabel::Val).unwrap()
    }

    fn fc(id: &str, p: f64) -> ForecastRecord {
        ForecastRecord {
            event_id: id.into(),
            strategy: "basic".into(),
            prediction_date: "2022-08-01".parse().unwrap(),
            probability: p,
            samples: vec![],
            trace_ref: None,
        }
    }

    #[test]
    fn score_fixture() {
        let split = split4();
        let r = score(
            &[fc("a", 0.8), fc("b", 0.6), fc("c", 0.1), fc("d", 0.3)],
            &split,
        )
        .unwrap();
        assert_eq!((r.n_total, r.n_yes, r.n_no), (4, 2, 2));
        assert!((r.brier - 0.075).abs() < 1e-12);
        assert!((r.brier_yes.unwrap() - 0.10).abs() < 1e-12);
        assert!((r.brier_no.unwrap() - 0.05).abs() < 1e-12);
        assert!((r.weighted_brier.unwrap() - 0.075).abs() < 1e-12);
        assert!((r.mean_prediction - 0.45).abs() < 1e-12);
        assert_eq!(r.per_category[&Category::TechIndustry].count, 2);
        // tech: (0.8,1) and (0.1,0) -> (0.04 + 0.01) / 2
        assert!((r.per_category[&Category::TechIndustry].brier - 0.025).abs() < 1e-12);
    }

    #[test]
    fn score_perfect_and_one_class() {
        let split = split4();
        let r = score(&[fc("a", 1.0), fc("c", 0.0)], &split).unwrap();
        assert_eq!(r.brier, 0.0);
        assert_eq!(r.weighted_brier, Some(0.0));

        let r = score(&[fc("c", 0.2), fc("d", 0.1)], &split).unwrap();
        assert_eq!(r.brier_yes, None);
        assert_eq!(r.weighted_brier, None);
        assert!(r.brier_no.is_some());
    }

    #[test]
    fn score_rejects_unknown_and_unresolved() {
        let split = split4();
        assert_eq!(
            score(&[fc("zzz", 0.1)], &split),
            Err(MetricsError::UnknownEvent("zzz".into()))
        );
        let open = parse_dataset_str(
            r#"{"id":"o","name":"n","condition":"c","category":"misc","created":"2022-01-01","expires":"2022-12-31","resolved_at":null,"resolution":null}"#,
            SplitLabel::Val,
        )
        .unwrap();
        assert_eq!(
            score(&[fc("o", 0.1)], &open),
            Err(MetricsError::UnresolvedEvent("o".into()))
        );
    }

    #[test]
    fn coherence_examples() {
        assert!((coherence_sum(0.2529, 1.0 - 0.3965) - 0.8564).abs() < 1e-12);
        assert_eq!(coherence_sum(0.5, 0.5), 1.0);
        assert_eq!(coherence_sum(0.0, 0.0), 0.0);
    }

    #[test]
    fn shift_examples() {
        let ja = vec![("e1".to_string(), 0.1)];
        let wr = vec![("e1".to_string(), 0.4)];
        let rows = prediction_shift(&ja, &wr).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].delta - 0.3).abs() < 1e-12);
        assert_eq!(rows[0].p_just, 0.1);

        let same = prediction_shift(&ja, &ja).unwrap();
        assert!(same.iter().all(|r| r.delta == 0.0));

        let ja2 = vec![("e1".to_string(), 0.1), ("e2".to_string(), 0.2)];
        assert_eq!(
            prediction_shift(&ja2, &wr),
            Err(MetricsError::MismatchedEventSets(vec!["e2".into()]))
        );
    }

    #[test]
    fn shift_rows_sorted_by_id() {
        let ja = vec![("b".to_string(), 0.1), ("a".to_string(), 0.2)];
        let wr = vec![("a".to_string(), 0.3), ("b".to_string(), 0.3)];
        let rows = prediction_shift(&ja, &wr).unwrap();
        let ids: Vec<_> = rows.iter().map(|r| r.event_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
    }

    #[test]
    fn forecast_record_mean_invariant() {
        let mut f = fc("a", 0.2);
        f.samples = vec![0.1, 0.3];
        assert!(f.validate().is_ok());
        f.probability = 0.25;
        assert!(f.validate().is_err());
    }

    #[test]
    fn render_has_table_rows() {
        let split = split4();
        let r = score(&[fc("a", 0.8), fc("c", 0.1)], &split).unwrap();
        let md = render_markdown(&[("basic".into(), r)]);
        assert!(md.starts_with("| | basic |"));
        assert!(md.contains("| Weighted | 0.0250 |"));
        assert!(md.contains("| Resolve Yes | 0.0400 |"));
    }
}
