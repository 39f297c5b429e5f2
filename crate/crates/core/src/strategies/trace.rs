use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::llm::Sampling;
use crate::news::Headline;
use crate::prompts::{Bindings, Extraction, TemplateRegistry};

/// Structured value a step produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Parsed {
    Text(String),
    List(Vec<String>),
    Probability(f64),
    Headlines(Vec<Headline>),
}

/// One step of a chain. Non-LLM steps (news queries, the reversal
/// complement) have an empty prompt, no responses, and carry their payload
/// in `parsed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
    /// Values bound to the template's placeholders.
    #[serde(default, skip_serializing_if = "Bindings::is_empty")]
    pub bindings: Bindings,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<Sampling>,
    #[serde(default)]
    pub responses: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parsed: Option<Parsed>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extractions: Vec<Extraction>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl StepRecord {
    pub(crate) fn data(step_id: impl Into<String>, parsed: Parsed) -> Self {
        StepRecord {
            step_id: step_id.into(),
            template: None,
            bindings: Bindings::new(),
            prompt: String::new(),
            sampling: None,
            responses: Vec::new(),
            parsed: Some(parsed),
            extractions: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn is_llm_step(&self) -> bool {
        self.template.is_some()
    }

    pub fn probability(&self) -> Option<f64> {
        match self.parsed {
            Some(Parsed::Probability(p)) => Some(p),
            _ => None,
        }
    }
}

/// Everything one strategy run did for one event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub event_id: String,
    pub strategy: String,
    pub prediction_date: NaiveDate,
    pub steps: Vec<StepRecord>,
    pub final_samples: Vec<f64>,
    /// Absent only on a partial trace from a failed run.
    pub final_probability: Option<f64>,
}

impl ChainTrace {
    pub fn step(&self, step_id: &str) -> Option<&StepRecord> {
        self.steps.iter().find(|s| s.step_id == step_id)
    }

    pub fn llm_steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.steps.iter().filter(|s| s.is_llm_step())
    }

    /// The prompt of the last LLM step.
    pub fn final_prompt(&self) -> Option<&str> {
        self.llm_steps().last().map(|s| s.prompt.as_str())
    }

    /// Re-renders every LLM step from its recorded template and bindings and
    /// returns the ids of steps whose prompt differs from the recorded one.
    pub fn rerender_mismatches(&self, registry: &TemplateRegistry) -> Vec<String> {
        self.llm_steps()
            .filter(|s| {
                let id = s.template.as_deref().expect("llm step has a template");
                match registry.get(id).and_then(|t| t.render(&s.bindings)) {
                    Ok(p) => p != s.prompt,
                    Err(_) => true,
                }
            })
            .map(|s| s.step_id.clone())
            .collect()
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("trace serializes");
        s.push('\n');
        s
    }
}
