//! Forecasting strategies as prompt chains.
//!
//! Each `run_*` function forecasts one event on one date and returns a
//! [`ChainTrace`] holding every prompt, response and parsed value. Final
//! prediction steps draw eight samples at temperature 0.01 and average the
//! extracted probabilities; intermediate steps draw one.
//!
//! On failure the trace so far travels inside the [`ChainError`].

mod chain;
mod news;
mod trace;
mod workflows;

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::Event;
use crate::llm::{Backend, Sampling};
use crate::news::HeadlineSource;
use crate::prompts::{ExtractionMode, PromptError};

pub use news::{parse_keywords, run_news};
pub use trace::{ChainTrace, Parsed, StepRecord};
pub use workflows::{
    format_sequences, parse_opposite, parse_persona, parse_sequences, run_base_rate, run_basic,
    run_basic_with_rationale, run_both_sides, run_crowd, run_forecaster, run_reversed,
    run_sequences, NEGATIVE_PATH_MARKER, POSITIVE_PATH_MARKER,
};

pub const DEFAULT_PERSONA_COUNT: u32 = 8;
pub const DEFAULT_KEYWORD_COUNT: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyId {
    Basic,
    Forecaster,
    BaseRate,
    BothSides,
    /// Reported as "Breakdown" in result tables.
    Sequences,
    /// Persona-based; also reported as "Expert".
    Crowd,
    News,
    /// Basic on the reworded opposite event, complemented.
    Reversed,
    BasicWithRationale,
}

impl StrategyId {
    pub const ALL: [StrategyId; 9] = [
        StrategyId::Basic,
        StrategyId::Forecaster,
        StrategyId::BaseRate,
        StrategyId::BothSides,
        StrategyId::Sequences,
        StrategyId::Crowd,
        StrategyId::News,
        StrategyId::Reversed,
        StrategyId::BasicWithRationale,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyId::Basic => "basic",
            StrategyId::Forecaster => "forecaster",
            StrategyId::BaseRate => "base_rate",
            StrategyId::BothSides => "both_sides",
            StrategyId::Sequences => "sequences",
            StrategyId::Crowd => "crowd",
            StrategyId::News => "news",
            StrategyId::Reversed => "reversed",
            StrategyId::BasicWithRationale => "basic_with_rationale",
        }
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyId {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        let id = match norm.as_str() {
            "basic" => StrategyId::Basic,
            "forecaster" => StrategyId::Forecaster,
            "base_rate" | "base_rates" => StrategyId::BaseRate,
            "both_sides" => StrategyId::BothSides,
            "sequences" | "breakdown" => StrategyId::Sequences,
            "crowd" | "expert" => StrategyId::Crowd,
            "news" | "news_api" => StrategyId::News,
            "reversed" | "reversed(basic)" => StrategyId::Reversed,
            "basic_with_rationale" | "rationale" => StrategyId::BasicWithRationale,
            _ => return Err(SpecError::UnknownStrategy(s.to_string())),
        };
        Ok(id)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error("invalid strategy parameters: {0}")]
    InvalidParams(String),
}

/// Per-strategy knobs. Unknown keys are rejected when loading from a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyParams {
    pub persona_count: u32,
    pub keyword_count: u32,
    pub extraction: ExtractionMode,
}

impl Default for StrategyParams {
    fn default() -> Self {
        StrategyParams {
            persona_count: DEFAULT_PERSONA_COUNT,
            keyword_count: DEFAULT_KEYWORD_COUNT,
            extraction: ExtractionMode::Llm,
        }
    }
}

impl StrategyParams {
    pub fn from_table(table: toml::Table) -> Result<Self, SpecError> {
        let params: StrategyParams = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| SpecError::InvalidParams(e.message().to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.persona_count == 0 {
            return Err(SpecError::InvalidParams("persona_count must be at least 1".into()));
        }
        if self.keyword_count == 0 {
            return Err(SpecError::InvalidParams("keyword_count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sampling and extraction settings for one chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainOptions {
    pub final_prediction: Sampling,
    pub intermediate: Sampling,
    pub extraction: ExtractionMode,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions {
            final_prediction: Sampling::final_prediction(),
            intermediate: Sampling::intermediate(),
            extraction: ExtractionMode::Llm,
        }
    }
}

/// The two headline sources the news strategy reads.
#[derive(Clone, Copy)]
pub struct NewsSources<'a> {
    pub hackernews: &'a dyn HeadlineSource,
    pub nyt: &'a dyn HeadlineSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub id: StrategyId,
    #[serde(default)]
    pub params: StrategyParams,
}

impl StrategySpec {
    pub fn new(id: StrategyId) -> Self {
        StrategySpec {
            id,
            params: StrategyParams::default(),
        }
    }

    pub fn with_params(id: StrategyId, params: StrategyParams) -> Result<Self, SpecError> {
        params.validate()?;
        Ok(StrategySpec { id, params })
    }

    pub fn options(&self) -> ChainOptions {
        ChainOptions {
            extraction: self.params.extraction,
            ..ChainOptions::default()
        }
    }

    /// Runs this strategy for one event. `news` is required only by the
    /// news strategy.
    pub fn run(
        &self,
        backend: &dyn Backend,
        news: Option<NewsSources<'_>>,
        event: &Event,
        today: NaiveDate,
    ) -> Result<ChainTrace, ChainError> {
        let o = self.options();
        let p = &self.params;
        match self.id {
            StrategyId::Basic => workflows::basic(backend, o, event, today),
            StrategyId::Forecaster => workflows::forecaster(backend, o, event, today),
            StrategyId::BaseRate => workflows::base_rate(backend, o, event, today),
            StrategyId::BothSides => workflows::both_sides(backend, o, event, today),
            StrategyId::Sequences => workflows::sequences(backend, o, event, today),
            StrategyId::Crowd => workflows::crowd(backend, o, event, today, p.persona_count),
            StrategyId::Reversed => workflows::reversed(backend, o, event, today),
            StrategyId::BasicWithRationale => workflows::with_rationale(backend, o, event, today),
            StrategyId::News => match news {
                Some(src) => news::news(backend, o, src, event, today, p.keyword_count),
                None => Err(ChainError {
                    event_id: event.id.clone(),
                    strategy: StrategyId::News,
                    failure: ChainFailure::Precondition("the news strategy needs headline sources".into()),
                    partial: Box::new(ChainTrace {
                        event_id: event.id.clone(),
                        strategy: StrategyId::News.as_str().into(),
                        prediction_date: today,
                        steps: Vec::new(),
                        final_samples: Vec::new(),
                        final_probability: None,
                    }),
                }),
            },
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainFailure {
    #[error("{0}")]
    Precondition(String),
    #[error("step {step}: {source}")]
    Prompt { step: String, source: PromptError },
    #[error("step {step}: no sample yielded a probability")]
    NoUsableSamples { step: String },
    #[error("no search keywords could be parsed")]
    KeywordParse,
    #[error("every persona failed to produce a probability")]
    AllPersonasFailed,
    #[error("the opposite-event rewording came back empty")]
    EmptyRewording,
}

/// A failed run, with the steps completed before the failure.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("event `{event_id}` ({strategy}): {failure}")]
pub struct ChainError {
    pub event_id: String,
    pub strategy: StrategyId,
    pub failure: ChainFailure,
    pub partial: Box<ChainTrace>,
}
