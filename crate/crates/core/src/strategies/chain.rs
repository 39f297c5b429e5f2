//! Step bookkeeping shared by the workflows.

use chrono::NaiveDate;

use crate::events::Event;
use crate::llm::{self, Backend, CompletionRequest, CompletionResponse, LlmError};
use crate::metrics;
use crate::prompts::{
    extract_with, Bindings, ExtractionRoute, PromptError, RenderContext, TemplateRegistry,
};

use super::{ChainError, ChainFailure, ChainOptions, ChainTrace, Parsed, StepRecord, StrategyId};

pub(crate) struct Chain<'a> {
    pub backend: &'a dyn Backend,
    pub opts: ChainOptions,
    pub event: Event,
    pub today: NaiveDate,
    pub trace: ChainTrace,
}

/// A rendered prompt not yet sent.
pub(crate) struct Pending {
    step_id: String,
    template: String,
    bindings: Bindings,
    prompt: String,
}

pub(crate) type StepResult<T> = Result<T, ChainFailure>;

impl<'a> Chain<'a> {
    pub fn start(
        strategy: StrategyId,
        backend: &'a dyn Backend,
        opts: ChainOptions,
        event: &Event,
        today: NaiveDate,
    ) -> Result<Self, ChainError> {
        let trace = ChainTrace {
            event_id: event.id.clone(),
            strategy: strategy.as_str().to_string(),
            prediction_date: today,
            steps: Vec::new(),
            final_samples: Vec::new(),
            final_probability: None,
        };
        let precondition = if today < event.created {
            Some(format!("prediction date {today} is before creation {}", event.created))
        } else if today >= event.expires {
            Some(format!("prediction date {today} is not before expiry {}", event.expires))
        } else {
            None
        };
        if let Some(msg) = precondition {
            return Err(ChainError {
                event_id: event.id.clone(),
                strategy,
                failure: ChainFailure::Precondition(msg),
                partial: Box::new(trace),
            });
        }
        Ok(Chain {
            backend,
            opts,
            event: event.clone(),
            today,
            trace,
        })
    }

    /// Runs `body`, attaching the trace so far to any failure.
    pub fn run(
        mut self,
        strategy: StrategyId,
        body: impl FnOnce(&mut Self) -> StepResult<(Vec<f64>, f64)>,
    ) -> Result<ChainTrace, ChainError> {
        match body(&mut self) {
            Ok((samples, p)) => {
                self.trace.final_samples = samples;
                self.trace.final_probability = Some(p);
                Ok(self.trace)
            }
            Err(failure) => Err(ChainError {
                event_id: self.event.id.clone(),
                strategy,
                failure,
                partial: Box::new(self.trace),
            }),
        }
    }

    pub fn prepare(&self, step_id: &str, template: &str, extra: &[(&str, &str)]) -> StepResult<Pending> {
        let prompt_err = |source| ChainFailure::Prompt {
            step: step_id.to_string(),
            source,
        };
        let tpl = TemplateRegistry::builtin().get(template).map_err(prompt_err)?;
        let mut ctx = RenderContext::new(&self.event, self.today).map_err(prompt_err)?;
        for (k, v) in extra {
            ctx = ctx.with(k, *v);
        }
        let all = ctx.bindings().map_err(prompt_err)?;
        let bindings: Bindings = tpl
            .placeholders
            .iter()
            .filter_map(|p| all.get(p).map(|v| (p.clone(), v.clone())))
            .collect();
        let prompt = tpl.render(&bindings).map_err(prompt_err)?;
        Ok(Pending {
            step_id: step_id.to_string(),
            template: template.to_string(),
            bindings,
            prompt,
        })
    }

    fn record(&mut self, p: Pending, sampling: llm::Sampling, responses: Vec<String>) -> &mut StepRecord {
        self.trace.steps.push(StepRecord {
            step_id: p.step_id,
            template: Some(p.template),
            bindings: p.bindings,
            prompt: p.prompt,
            sampling: Some(sampling),
            responses,
            parsed: None,
            extractions: Vec::new(),
            warnings: Vec::new(),
        });
        self.trace.steps.last_mut().expect("just pushed")
    }

    fn send(&self, p: &Pending, sampling: llm::Sampling) -> StepResult<CompletionResponse> {
        let req = CompletionRequest::new(p.prompt.clone(), sampling);
        llm::complete(self.backend, &req).map_err(|e| backend_failure(&p.step_id, e))
    }

    /// Sends an intermediate prompt and records the step. Returns the
    /// responses.
    pub fn text_step(&mut self, p: Pending, n_samples: u32) -> StepResult<Vec<String>> {
        let sampling = self.opts.intermediate.with_samples(n_samples);
        let resp = self.send(&p, sampling)?;
        let step = self.record(p, sampling, resp.texts.clone());
        if let [only] = resp.texts.as_slice() {
            step.parsed = Some(Parsed::Text(only.trim().to_string()));
        }
        Ok(resp.texts)
    }

    /// Sends several single-sample prompts concurrently, recording the steps
    /// in the order given. Returns each trimmed response.
    pub fn parallel_text_steps(&mut self, ps: Vec<Pending>) -> StepResult<Vec<String>> {
        let sampling = self.opts.intermediate;
        let this = &*self;
        let results: Vec<StepResult<CompletionResponse>> = std::thread::scope(|s| {
            let handles: Vec<_> = ps
                .iter()
                .map(|p| s.spawn(move || this.send(p, sampling)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("completion thread panicked"))
                .collect()
        });
        let mut firsts = Vec::with_capacity(ps.len());
        for (p, r) in ps.into_iter().zip(results) {
            let texts = r?.texts;
            let first = texts.first().map(|t| t.trim().to_string()).unwrap_or_default();
            self.record(p, sampling, texts).parsed = Some(Parsed::Text(first.clone()));
            firsts.push(first);
        }
        Ok(firsts)
    }

    /// Attaches a parsed value and warnings to the last recorded step.
    pub fn annotate(&mut self, parsed: Parsed, warnings: Vec<String>) {
        let step = self.trace.steps.last_mut().expect("annotate after a step");
        step.parsed = Some(parsed);
        step.warnings.extend(warnings);
    }

    /// Sends a prediction prompt with the final-step sampling, extracts a
    /// probability from every sample and records the step. Returns the
    /// per-sample values that could be read and their mean.
    pub fn predict_step(&mut self, p: Pending) -> StepResult<(Vec<f64>, f64)> {
        let sampling = self.opts.final_prediction;
        let scale = TemplateRegistry::builtin()
            .get(&p.template)
            .expect("prepared from the registry")
            .scale;
        let resp = self.send(&p, sampling)?;
        let step_id = p.step_id.clone();
        let mut extractions = Vec::with_capacity(resp.texts.len());
        for raw in &resp.texts {
            let ex = extract_with(self.backend, raw, scale, self.opts.extraction).map_err(|e| {
                ChainFailure::Prompt {
                    step: step_id.clone(),
                    source: e,
                }
            })?;
            extractions.push(ex);
        }
        let values: Vec<f64> = extractions.iter().filter_map(|e| e.value).collect();
        let warnings: Vec<String> = extractions
            .iter()
            .enumerate()
            .filter(|(_, e)| e.route == ExtractionRoute::Failed)
            .map(|(i, _)| format!("sample {}: no probability could be extracted", i + 1))
            .collect();
        let step = self.record(p, sampling, resp.texts);
        step.extractions = extractions;
        step.warnings = warnings;
        if values.is_empty() {
            return Err(ChainFailure::NoUsableSamples { step: step_id });
        }
        let mean = metrics::mean(&values);
        step.parsed = Some(Parsed::Probability(mean));
        Ok((values, mean))
    }

    pub fn push_data(&mut self, step: StepRecord) {
        self.trace.steps.push(step);
    }
}

fn backend_failure(step: &str, e: LlmError) -> ChainFailure {
    ChainFailure::Prompt {
        step: step.to_string(),
        source: PromptError::Backend(e),
    }
}
