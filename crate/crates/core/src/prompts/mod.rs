//! Prompt templates, rendering, and turning generated text back into a
//! probability.

mod parse;
mod template;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::Event;
use crate::llm::{self, Backend, CompletionRequest, LlmError, Sampling};

pub use parse::{parse_probability_scaled, probability_candidates};
pub use template::{AnswerScale, Bindings, PromptTemplate, TemplateRegistry, WORKFLOW_TEMPLATE_IDS};

pub const EXTRACTION_TEMPLATE: &str = "extraction/extract";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PromptError {
    #[error("no binding for placeholder [{0}]")]
    UnboundPlaceholder(String),
    #[error("template {template}: bracketed token [{name}] is neither a placeholder nor a literal")]
    UndeclaredPlaceholder { template: String, name: String },
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("template load failed: {0}")]
    TemplateLoad(String),
    #[error("prediction date {today} is after expiry {expiry}")]
    NegativeWindow { today: NaiveDate, expiry: NaiveDate },
    #[error("event `{id}` expires {expiry}, not after prediction date {today}")]
    PastExpiry {
        id: String,
        today: NaiveDate,
        expiry: NaiveDate,
    },
    #[error("no probability found in {0:?}")]
    NoProbabilityFound(String),
    #[error("could not extract a probability from {0:?}")]
    ExtractionFailed(String),
    #[error("empty input")]
    EmptyInput,
    #[error("value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error(transparent)]
    Backend(#[from] LlmError),
}

/// Exact calendar-day difference `expiry - today`.
pub fn days_remaining(today: NaiveDate, expiry: NaiveDate) -> Result<u32, PromptError> {
    let days = (expiry - today).num_days();
    u32::try_from(days).map_err(|_| PromptError::NegativeWindow { today, expiry })
}

/// Everything a template can draw on for one event on one date.
#[derive(Debug, Clone)]
pub struct RenderContext<'a> {
    pub event: &'a Event,
    pub today: NaiveDate,
    pub extra: Bindings,
}

impl<'a> RenderContext<'a> {
    pub fn new(event: &'a Event, today: NaiveDate) -> Result<Self, PromptError> {
        if today >= event.expires {
            return Err(PromptError::PastExpiry {
                id: event.id.clone(),
                today,
                expiry: event.expires,
            });
        }
        Ok(RenderContext {
            event,
            today,
            extra: Bindings::new(),
        })
    }

    pub fn with(mut self, name: &str, value: impl Into<String>) -> Self {
        self.extra.insert(name.to_string(), value.into());
        self
    }

    /// Event-field bindings plus the extras. Extras win on collision.
    pub fn bindings(&self) -> Result<Bindings, PromptError> {
        let e = self.event;
        let mut b = Bindings::new();
        b.insert("name".into(), e.name.clone());
        b.insert("condition".into(), e.condition.clone());
        b.insert("description".into(), e.description.clone());
        b.insert("expiry".into(), e.expires.to_string());
        b.insert("today".into(), self.today.to_string());
        b.insert(
            "number of days".into(),
            days_remaining(self.today, e.expires)?.to_string(),
        );
        b.extend(self.extra.iter().map(|(k, v)| (k.clone(), v.clone())));
        Ok(b)
    }
}

/// Renders `tpl` for the event and date in `ctx`.
pub fn render(tpl: &PromptTemplate, ctx: &RenderContext<'_>) -> Result<String, PromptError> {
    tpl.render(&ctx.bindings()?)
}

/// Deterministic parse on the unit scale: `%`-suffixed numbers and bare
/// numbers in [0, 1] count; the last one wins.
pub fn parse_probability(text: &str) -> Result<f64, PromptError> {
    parse_probability_scaled(text, AnswerScale::Unit)
        .ok_or_else(|| PromptError::NoProbabilityFound(text.to_string()))
}

/// How a sample's probability was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionRoute {
    Extractor,
    Fallback,
    Failed,
}

/// Outcome of extracting one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extractor_reply: Option<String>,
    pub value: Option<f64>,
    pub route: ExtractionRoute,
}

/// Whether probabilities are read by an extractor model or parsed directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMode {
    #[default]
    Llm,
    ParseOnly,
}

/// Asks the extractor model for the probability in `raw_output`, falling
/// back to parsing `raw_output` directly. Backend errors propagate; only an
/// unreadable reply triggers the fallback.
pub fn extract_probability(
    backend: &dyn Backend,
    raw_output: &str,
    scale: AnswerScale,
) -> Result<f64, PromptError> {
    let ex = extract_with(backend, raw_output, scale, ExtractionMode::Llm)?;
    ex.value
        .ok_or_else(|| PromptError::ExtractionFailed(raw_output.to_string()))
}

/// Like [`extract_probability`] but reports the route taken and never
/// fails on an unreadable sample.
pub fn extract_with(
    backend: &dyn Backend,
    raw_output: &str,
    scale: AnswerScale,
    mode: ExtractionMode,
) -> Result<Extraction, PromptError> {
    let mut extractor_reply = None;
    if mode == ExtractionMode::Llm {
        let tpl = TemplateRegistry::builtin().get(EXTRACTION_TEMPLATE)?;
        let mut b = Bindings::new();
        b.insert("output".into(), raw_output.to_string());
        let prompt = tpl.render(&b)?;
        let resp = llm::complete(backend, &CompletionRequest::new(prompt, Sampling::intermediate()))?;
        let reply = resp.texts.into_iter().next().unwrap_or_default();
        if let Some(v) = parse_probability_scaled(&reply, tpl.scale) {
            return Ok(Extraction {
                extractor_reply: Some(reply),
                value: Some(v),
                route: ExtractionRoute::Extractor,
            });
        }
        extractor_reply = Some(reply);
    }
    let value = parse_probability_scaled(raw_output, scale);
    Ok(Extraction {
        extractor_reply,
        value,
        route: if value.is_some() {
            ExtractionRoute::Fallback
        } else {
            ExtractionRoute::Failed
        },
    })
}

/// Arithmetic mean of sampled probabilities.
pub fn aggregate_probabilities(values: &[f64]) -> Result<f64, PromptError> {
    if values.is_empty() {
        return Err(PromptError::EmptyInput);
    }
    if let Some(&bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(PromptError::OutOfRange(bad));
    }
    Ok(crate::metrics::mean(values))
}
