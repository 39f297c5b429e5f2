use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{anyhow, Context};
use chrono::NaiveDate;
use serde::Serialize;

use crate::metrics::{
    coherence_sum, fmt4, group_by_strategy, market_forecasts, mean, prediction_shift, render_markdown, score,
    ForecastRecord, MetricsError, ScoreReport, ShiftRow,
};

use super::{load_events, load_forecasts, CliError};

#[derive(Debug, Clone)]
pub struct ScoreConfig {
    pub events: PathBuf,
    pub forecasts: Vec<PathBuf>,
    /// Prepend a `human` column scored from the market midpoints on `date`.
    pub from_market: bool,
    pub date: Option<NaiveDate>,
}

#[derive(Debug, Clone)]
pub struct ScoreOutput {
    pub columns: Vec<(String, ScoreReport)>,
    pub markdown: String,
    pub json: String,
}

/// Scores each strategy found in the forecast files, one table column per
/// strategy.
pub fn cmd_score(cfg: &ScoreConfig) -> Result<ScoreOutput, CliError> {
    let split = load_events(&cfg.events).map_err(|e| CliError::Config(format!("{e:#}")))?;
    let mut columns = Vec::new();
    if cfg.from_market {
        let date = cfg
            .date
            .ok_or_else(|| CliError::Config("--from-market needs --date".into()))?;
        let human = market_forecasts(&split, date).map_err(anyhow::Error::from)?;
        let report = score(&human, &split).context("scoring market forecasts")?;
        columns.push(("human".to_string(), report));
    }
    let mut all = Vec::new();
    for path in &cfg.forecasts {
        all.extend(load_forecasts(path)?);
    }
    if columns.is_empty() && all.is_empty() {
        return Err(CliError::Config("nothing to score: give --forecasts or --from-market".into()));
    }
    for (strategy, records) in group_by_strategy(&all) {
        let report = score(&records, &split).with_context(|| format!("scoring {strategy}"))?;
        columns.push((strategy, report));
    }
    let markdown = render_markdown(&columns);
    let json_map: serde_json::Map<String, serde_json::Value> = columns
        .iter()
        .map(|(s, r)| (s.clone(), serde_json::to_value(r).expect("report serializes")))
        .collect();
    let mut json = serde_json::to_string_pretty(&json_map).expect("report serializes");
    json.push('\n');
    Ok(ScoreOutput {
        columns,
        markdown,
        json,
    })
}

#[derive(Debug, Clone)]
pub struct BiasConfig {
    pub forward: PathBuf,
    /// Forecasts from the reversed strategy, already complemented back onto
    /// the original event.
    pub reversed: PathBuf,
    pub events: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasReport {
    pub n_events: usize,
    pub mean_forward: f64,
    /// Mean of the reversed file, i.e. mean of 1 − p(opposite).
    pub mean_one_minus_reversed: f64,
    /// Mean probability given to the reworded (opposite) events.
    pub mean_reversed: f64,
    pub coherence: f64,
    pub brier_forward: Option<f64>,
    pub brier_reversed: Option<f64>,
}

impl BiasReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "| | Forward | 1 - Reversed |");
        let _ = writeln!(out, "|---|---|---|");
        let _ = writeln!(
            out,
            "| Average Probability | {} | {} |",
            fmt4(self.mean_forward),
            fmt4(self.mean_one_minus_reversed)
        );
        if let (Some(f), Some(r)) = (self.brier_forward, self.brier_reversed) {
            let _ = writeln!(out, "| Brier Score | {} | {} |", fmt4(f), fmt4(r));
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "coherence: {} + {} = {} over {} events (1.0 is coherent)",
            fmt4(self.mean_forward),
            fmt4(self.mean_reversed),
            fmt4(self.coherence),
            self.n_events
        );
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn pairs(records: &[ForecastRecord]) -> Vec<(String, f64)> {
    records.iter().map(|r| (r.event_id.clone(), r.probability)).collect()
}

/// Compares forward forecasts with reversed-event forecasts on the same
/// events.
pub fn cmd_bias(cfg: &BiasConfig) -> Result<BiasReport, CliError> {
    let forward = load_forecasts(&cfg.forward)?;
    let reversed = load_forecasts(&cfg.reversed)?;
    if forward.is_empty() || reversed.is_empty() {
        return Err(anyhow!(MetricsError::EmptyInput).into());
    }
    // the join checks both files cover the same events exactly once
    let rows = prediction_shift(&pairs(&forward), &pairs(&reversed)).map_err(anyhow::Error::from)?;
    let f: Vec<f64> = rows.iter().map(|r| r.p_just).collect();
    let r: Vec<f64> = rows.iter().map(|r| r.p_rationale).collect();
    let mean_forward = mean(&f);
    let mean_one_minus_reversed = mean(&r);
    let mean_reversed = 1.0 - mean_one_minus_reversed;

    let (brier_forward, brier_reversed) = match &cfg.events {
        Some(path) => {
            let split = load_events(path).map_err(|e| CliError::Config(format!("{e:#}")))?;
            let fwd = score(&forward, &split).context("scoring forward forecasts")?;
            let rev = score(&reversed, &split).context("scoring reversed forecasts")?;
            (Some(fwd.brier), Some(rev.brier))
        }
        None => (None, None),
    };
    Ok(BiasReport {
        n_events: rows.len(),
        mean_forward,
        mean_one_minus_reversed,
        mean_reversed,
        coherence: coherence_sum(mean_forward, mean_reversed),
        brier_forward,
        brier_reversed,
    })
}

#[derive(Debug, Clone)]
pub struct RationaleConfig {
    pub just: PathBuf,
    pub rationale: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RationaleReport {
    pub rows: Vec<ShiftRow>,
    /// `event_id,p_just,p_rationale,delta` rows for plotting.
    pub csv: String,
    pub mean_just: f64,
    pub mean_rationale: f64,
    pub mean_delta: f64,
}

impl RationaleReport {
    pub fn summary(&self) -> String {
        format!(
            "events: {}\nmean p_just: {}\nmean p_rationale: {}\nmean delta: {}\n",
            self.rows.len(),
            fmt4(self.mean_just),
            fmt4(self.mean_rationale),
            fmt4(self.mean_delta)
        )
    }
}

/// Per-event shift from just-answer to with-rationale forecasts.
pub fn cmd_rationale(cfg: &RationaleConfig) -> Result<RationaleReport, CliError> {
    let just = load_forecasts(&cfg.just)?;
    let rationale = load_forecasts(&cfg.rationale)?;
    if just.is_empty() {
        return Err(anyhow!(MetricsError::EmptyInput).into());
    }
    let rows = prediction_shift(&pairs(&just), &pairs(&rationale)).map_err(anyhow::Error::from)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        w.serialize(row).context("writing csv")?;
    }
    let csv = String::from_utf8(w.into_inner().map_err(|e| anyhow!("{e}"))?).expect("csv is utf-8");

    let col = |f: fn(&ShiftRow) -> f64| mean(&rows.iter().map(f).collect::<Vec<_>>());
    Ok(RationaleReport {
        mean_just: col(|r| r.p_just),
        mean_rationale: col(|r| r.p_rationale),
        mean_delta: col(|r| r.delta),
        csv,
        rows,
    })
}
