use chrono::NaiveDate;

use crate::events::Event;
use crate::llm::Backend;
use crate::metrics;

use super::chain::{Chain, StepResult};
use super::{ChainError, ChainFailure, ChainOptions, ChainTrace, Parsed, StepRecord, StrategyId};

pub const POSITIVE_PATH_MARKER: &str = "[PATH TO POSITIVE OUTCOME]";
pub const NEGATIVE_PATH_MARKER: &str = "[PATH TO NEGATIVE OUTCOME]";
const OPPOSITE_MARKER: &str = "[OPPOSITE]";

/// Plain prediction: one prompt, eight samples, mean of the extracted
/// probabilities.
pub fn run_basic(backend: &dyn Backend, event: &Event, today: NaiveDate) -> Result<ChainTrace, ChainError> {
    basic(backend, ChainOptions::default(), event, today)
}

/// Basic with the superforecaster preamble.
pub fn run_forecaster(backend: &dyn Backend, event: &Event, today: NaiveDate) -> Result<ChainTrace, ChainError> {
    forecaster(backend, ChainOptions::default(), event, today)
}

/// Question about similar events, its answer, then a prediction given that
/// base rate.
pub fn run_base_rate(backend: &dyn Backend, event: &Event, today: NaiveDate) -> Result<ChainTrace, ChainError> {
    base_rate(backend, ChainOptions::default(), event, today)
}

/// Arguments for and against (requested concurrently), then a prediction
/// that sees both.
pub fn run_both_sides(backend: &dyn Backend, event: &Event, today: NaiveDate) -> Result<ChainTrace, ChainError> {
    both_sides(backend, ChainOptions::default(), event, today)
}

/// Paths to the positive outcome, a reworded opposite event, paths to the
/// negative outcome, then a prediction listing all paths.
pub fn run_sequences(backend: &dyn Backend, event: &Event, today: NaiveDate) -> Result<ChainTrace, ChainError> {
    sequences(backend, ChainOptions::default(), event, today)
}

/// `persona_count` expert personas each predict; the result is the mean
/// over personas that produced a probability.
pub fn run_crowd(
    backend: &dyn Backend,
    event: &Event,
    today: NaiveDate,
    persona_count: u32,
) -> Result<ChainTrace, ChainError> {
    crowd(backend, ChainOptions::default(), event, today, persona_count)
}

/// Basic on the reworded opposite event; the result is one minus that
/// prediction.
pub fn run_reversed(backend: &dyn Backend, event: &Event, today: NaiveDate) -> Result<ChainTrace, ChainError> {
    reversed(backend, ChainOptions::default(), event, today)
}

/// Basic, asking for a rationale before the final probability.
pub fn run_basic_with_rationale(
    backend: &dyn Backend,
    event: &Event,
    today: NaiveDate,
) -> Result<ChainTrace, ChainError> {
    with_rationale(backend, ChainOptions::default(), event, today)
}

fn single_prompt(
    id: StrategyId,
    template: &'static str,
    backend: &dyn Backend,
    o: ChainOptions,
    event: &Event,
    today: NaiveDate,
) -> Result<ChainTrace, ChainError> {
    Chain::start(id, backend, o, event, today)?.run(id, |c| {
        let p = c.prepare("predict", template, &[])?;
        c.predict_step(p)
    })
}

pub(super) fn basic(b: &dyn Backend, o: ChainOptions, e: &Event, d: NaiveDate) -> Result<ChainTrace, ChainError> {
    single_prompt(StrategyId::Basic, "basic/predict", b, o, e, d)
}

pub(super) fn forecaster(b: &dyn Backend, o: ChainOptions, e: &Event, d: NaiveDate) -> Result<ChainTrace, ChainError> {
    single_prompt(StrategyId::Forecaster, "forecaster/predict", b, o, e, d)
}

pub(super) fn with_rationale(b: &dyn Backend, o: ChainOptions, e: &Event, d: NaiveDate) -> Result<ChainTrace, ChainError> {
    single_prompt(StrategyId::BasicWithRationale, "rationale/predict", b, o, e, d)
}

pub(super) fn base_rate(b: &dyn Backend, o: ChainOptions, e: &Event, d: NaiveDate) -> Result<ChainTrace, ChainError> {
    let id = StrategyId::BaseRate;
    Chain::start(id, b, o, e, d)?.run(id, |c| {
        let p = c.prepare("question", "base_rate/question", &[])?;
        let question = first_trimmed(c.text_step(p, 1)?);
        let p = c.prepare("answer", "base_rate/answer", &[("base rate question", &question)])?;
        let answer = first_trimmed(c.text_step(p, 1)?);
        let p = c.prepare("predict", "base_rate/predict", &[("base rate", &answer)])?;
        c.predict_step(p)
    })
}

pub(super) fn both_sides(b: &dyn Backend, o: ChainOptions, e: &Event, d: NaiveDate) -> Result<ChainTrace, ChainError> {
    let id = StrategyId::BothSides;
    Chain::start(id, b, o, e, d)?.run(id, |c| {
        let pros = c.prepare("pros", "both_sides/pros", &[])?;
        let cons = c.prepare("cons", "both_sides/cons", &[])?;
        let args = c.parallel_text_steps(vec![pros, cons])?;
        let p = c.prepare(
            "predict",
            "both_sides/predict",
            &[("pros", &args[0]), ("cons", &args[1])],
        )?;
        c.predict_step(p)
    })
}

pub(super) fn sequences(b: &dyn Backend, o: ChainOptions, e: &Event, d: NaiveDate) -> Result<ChainTrace, ChainError> {
    let id = StrategyId::Sequences;
    Chain::start(id, b, o, e, d)?.run(id, |c| {
        let p = c.prepare("positive", "sequences/positive", &[])?;
        let positive = sequence_step(c, p, POSITIVE_PATH_MARKER)?;

        let p = c.prepare("opposite", "sequences/opposite", &[])?;
        let opposite = opposite_step(c, p)?;

        let p = c.prepare("negative", "sequences/negative", &[("Opposite Event", &opposite)])?;
        let negative = sequence_step(c, p, NEGATIVE_PATH_MARKER)?;

        let p = c.prepare(
            "predict",
            "sequences/predict",
            &[
                ("positive sequences", &format_sequences(&positive)),
                ("negative sequences", &format_sequences(&negative)),
            ],
        )?;
        c.predict_step(p)
    })
}

pub(super) fn crowd(
    b: &dyn Backend,
    o: ChainOptions,
    e: &Event,
    d: NaiveDate,
    persona_count: u32,
) -> Result<ChainTrace, ChainError> {
    let id = StrategyId::Crowd;
    Chain::start(id, b, o, e, d)?.run(id, |c| {
        // One request with n = persona_count: identical requests would
        // collapse to one entry in a response cache.
        let p = c.prepare("persona", "crowd/persona", &[])?;
        let replies = c.text_step(p, persona_count.max(1))?;
        let jobs: Vec<Option<String>> = replies.iter().map(|r| parse_persona(r)).collect();
        let warnings = jobs
            .iter()
            .enumerate()
            .filter(|(_, j)| j.is_none())
            .map(|(i, _)| format!("persona {}: empty reply, dropped", i + 1))
            .collect();
        c.annotate(
            Parsed::List(jobs.iter().flatten().cloned().collect()),
            warnings,
        );

        let mut persona_means = Vec::new();
        for (i, job) in jobs.iter().enumerate() {
            let Some(job) = job else { continue };
            let p = c.prepare(&format!("persona_{}/predict", i + 1), "crowd/predict", &[("job", job)])?;
            match c.predict_step(p) {
                Ok((_, mean)) => persona_means.push(mean),
                Err(ChainFailure::NoUsableSamples { step }) => {
                    log::warn!("{}: {step} produced no probability; persona dropped", c.event.id);
                }
                Err(other) => return Err(other),
            }
        }
        if persona_means.is_empty() {
            return Err(ChainFailure::AllPersonasFailed);
        }
        let p = metrics::mean(&persona_means);
        Ok((persona_means, p))
    })
}

pub(super) fn reversed(b: &dyn Backend, o: ChainOptions, e: &Event, d: NaiveDate) -> Result<ChainTrace, ChainError> {
    let id = StrategyId::Reversed;
    Chain::start(id, b, o, e, d)?.run(id, |c| {
        let p = c.prepare("opposite", "sequences/opposite", &[])?;
        let opposite = opposite_step(c, p)?;
        if opposite.is_empty() {
            return Err(ChainFailure::EmptyRewording);
        }
        c.event.name = opposite.clone();
        c.event.condition = opposite;

        let p = c.prepare("predict", "basic/predict", &[])?;
        let (raw_samples, raw) = c.predict_step(p)?;
        let complemented: Vec<f64> = raw_samples.iter().map(|v| 1.0 - v).collect();
        let p = 1.0 - raw;
        c.push_data(StepRecord::data("complement", Parsed::Probability(p)));
        Ok((complemented, p))
    })
}

fn first_trimmed(texts: Vec<String>) -> String {
    texts.into_iter().next().unwrap_or_default().trim().to_string()
}

fn sequence_step(c: &mut Chain<'_>, p: super::chain::Pending, marker: &str) -> StepResult<Vec<String>> {
    let reply = first_trimmed(c.text_step(p, 1)?);
    let (seqs, warnings) = match parse_sequences(&reply, marker) {
        Some(seqs) => (seqs, Vec::new()),
        None if reply.is_empty() => (Vec::new(), vec!["empty reply; no sequences".to_string()]),
        None => (
            vec![truncate_at_end(&reply).trim().to_string()],
            vec![format!("no {marker} blocks found; reply kept as one opaque sequence")],
        ),
    };
    c.annotate(Parsed::List(seqs.clone()), warnings);
    Ok(seqs)
}

fn opposite_step(c: &mut Chain<'_>, p: super::chain::Pending) -> StepResult<String> {
    let reply = first_trimmed(c.text_step(p, 1)?);
    let (opposite, warnings) = match parse_opposite(&reply) {
        Some(o) => (o, Vec::new()),
        None => {
            let line = reply.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
            (
                line.to_string(),
                vec![format!("no {OPPOSITE_MARKER} line found; using the first line of the reply")],
            )
        }
    };
    c.annotate(Parsed::Text(opposite.clone()), warnings);
    Ok(opposite)
}

fn truncate_at_end(text: &str) -> &str {
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        if line.trim() == "END" {
            return &text[..offset];
        }
        offset += line.len();
    }
    text
}

/// A block runs until the next bracketed header such as
/// `[POTENTIAL INCITING EVENTS]`, which belongs to the following path.
fn cut_at_header(block: &str) -> &str {
    let mut offset = 0;
    for line in block.split_inclusive('\n') {
        if offset > 0 && line.trim_start().starts_with('[') {
            return &block[..offset];
        }
        offset += line.len();
    }
    block
}

/// Blocks following each `marker`, up to the first line reading `END`.
/// `None` when the marker never occurs.
pub fn parse_sequences(text: &str, marker: &str) -> Option<Vec<String>> {
    let body = truncate_at_end(text);
    let mut parts = body.split(marker);
    parts.next()?;
    let blocks: Vec<String> = parts
        .map(|b| cut_at_header(b).trim().to_string())
        .filter(|b| !b.is_empty())
        .collect();
    if body.contains(marker) {
        Some(blocks)
    } else {
        None
    }
}

/// `Potential Sequence <i>:` blocks, or `None` when the list is empty.
pub fn format_sequences(seqs: &[String]) -> String {
    if seqs.is_empty() {
        return "None".to_string();
    }
    seqs.iter()
        .enumerate()
        .map(|(i, s)| format!("Potential Sequence {}:\n{s}", i + 1))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Text after `[OPPOSITE]` up to `[END]` or the end of the line.
pub fn parse_opposite(text: &str) -> Option<String> {
    let start = text.find(OPPOSITE_MARKER)? + OPPOSITE_MARKER.len();
    let rest = &text[start..];
    let stop = [rest.find("[END]"), rest.find('\n')]
        .into_iter()
        .flatten()
        .min()
        .unwrap_or(rest.len());
    let o = rest[..stop].trim();
    (!o.is_empty()).then(|| o.to_string())
}

/// The expert named in a persona reply: its first non-empty line, without
/// a trailing period.
pub fn parse_persona(text: &str) -> Option<String> {
    let line = text.lines().map(str::trim).find(|l| !l.is_empty())?;
    let job = line.trim_end_matches('.').trim();
    (!job.is_empty()).then(|| job.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{Category, Resolution};
    use crate::llm::{LlmError, MockRule, ScriptedMock};
    use crate::prompts::TemplateRegistry;

    fn event() -> Event {
        Event {
            id: "e1".into(),
            name: "Tesla FSD wide release".into(),
            condition: "Tesla releases FSD to all US owners".into(),
            description: "Beta has been limited.".into(),
            category: Category::TechIndustry,
            created: "2022-06-01".parse().unwrap(),
            expires: "2022-12-31".parse().unwrap(),
            resolved_at: Some("2022-11-24".parse().unwrap()),
            resolution: Resolution::Yes,
        }
    }

    fn today() -> NaiveDate {
        "2022-08-01".parse().unwrap()
    }

    fn mock(rules: Vec<MockRule>) -> ScriptedMock {
        ScriptedMock::new(rules).echo_extraction()
    }

    fn strs(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn basic_constant() {
        let m = mock(vec![MockRule::any("10%")]);
        let t = run_basic(&m, &event(), today()).unwrap();
        assert_eq!(t.final_probability, Some(0.1));
        assert_eq!(t.llm_steps().count(), 1);
        assert_eq!(t.final_samples.len(), 8);
        // one forecast call plus one extraction per sample
        assert_eq!(m.calls(), 9);
        assert!(t.rerender_mismatches(TemplateRegistry::builtin()).is_empty());
    }

    #[test]
    fn basic_alternating() {
        let m = mock(vec![MockRule::any("").with_responses(strs(&["0%", "20%"]))]);
        let t = run_basic(&m, &event(), today()).unwrap();
        assert!((t.final_probability.unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn basic_rejects_past_expiry() {
        let m = mock(vec![MockRule::any("10%")]);
        let err = run_basic(&m, &event(), "2022-12-31".parse().unwrap()).unwrap_err();
        assert!(matches!(err.failure, ChainFailure::Precondition(_)));
        assert_eq!(m.calls(), 0);
    }

    #[test]
    fn forecaster_preamble() {
        let m = mock(vec![MockRule::any("10%")]);
        let t = run_forecaster(&m, &event(), today()).unwrap();
        assert!(t.final_prompt().unwrap().starts_with("In this chat, you are a superforecaster"));
        assert_eq!(t.final_probability, Some(0.1));
    }

    #[test]
    fn base_rate_chain() {
        let m = mock(vec![
            MockRule::contains("Pose a question", "How often do carmakers ship on time?"),
            MockRule::contains("Answer the following question", "About 40% of the time."),
            MockRule::any("10%"),
        ]);
        let t = run_base_rate(&m, &event(), today()).unwrap();
        assert_eq!(t.llm_steps().count(), 3);
        assert!(t.step("answer").unwrap().prompt.contains("How often do carmakers ship on time?"));
        assert!(t.final_prompt().unwrap().contains("Here a base rate for this event: About 40% of the time."));
        assert_eq!(t.final_probability, Some(0.1));
    }

    #[test]
    fn base_rate_empty_question_passes_through() {
        let m = mock(vec![MockRule::contains("Pose a question", ""), MockRule::any("10%")]);
        let t = run_base_rate(&m, &event(), today()).unwrap();
        assert_eq!(t.step("question").unwrap().parsed, Some(Parsed::Text(String::new())));
    }

    struct FailOn(&'static str, ScriptedMock);

    impl Backend for FailOn {
        fn id(&self) -> &str {
            "failing"
        }
        fn complete(&self, req: &crate::llm::CompletionRequest) -> Result<crate::llm::CompletionResponse, LlmError> {
            if req.prompt.contains(self.0) {
                return Err(LlmError::BackendUnavailable("down".into()));
            }
            self.1.complete(req)
        }
    }

    #[test]
    fn base_rate_failure_keeps_partial_trace() {
        let m = FailOn("Answer the following question", mock(vec![MockRule::any("x")]));
        let err = run_base_rate(&m, &event(), today()).unwrap_err();
        assert_eq!(err.partial.steps.len(), 1);
        assert_eq!(err.partial.steps[0].step_id, "question");
        assert!(matches!(err.failure, ChainFailure::Prompt { ref step, .. } if step == "answer"));
    }

    #[test]
    fn both_sides_order_and_embedding() {
        let m = mock(vec![
            MockRule::contains("will happen by", "PRO TEXT"),
            MockRule::contains("will not happen by", "CON TEXT"),
            MockRule::any("10%"),
        ]);
        let t = run_both_sides(&m, &event(), today()).unwrap();
        let ids: Vec<_> = t.steps.iter().map(|s| s.step_id.as_str()).collect();
        assert_eq!(ids, ["pros", "cons", "predict"]);
        let fp = t.final_prompt().unwrap();
        assert!(fp.contains("may come true:  PRO TEXT"));
        assert!(fp.contains("may not come true:  CON TEXT"));
        assert_eq!(t.final_probability, Some(0.1));
    }

    #[test]
    fn sequence_parsing() {
        let reply = " Tesla hires\n[PATH TO POSITIVE OUTCOME]\n1. a\nOUTCOME ACHIEVED: x\n[POTENTIAL INCITING EVENTS] y\n[PATH TO POSITIVE OUTCOME]\n1. b\nEND\n[PATH TO POSITIVE OUTCOME]\nignored";
        assert_eq!(
            parse_sequences(reply, POSITIVE_PATH_MARKER).unwrap(),
            ["1. a\nOUTCOME ACHIEVED: x", "1. b"]
        );
        assert_eq!(parse_sequences("no markers", POSITIVE_PATH_MARKER), None);
        assert_eq!(format_sequences(&[]), "None");
        assert_eq!(
            format_sequences(&strs(&["a", "b"])),
            "Potential Sequence 1:\na\n\nPotential Sequence 2:\nb"
        );
    }

    #[test]
    fn opposite_and_persona_parsing() {
        assert_eq!(
            parse_opposite("\n[OPPOSITE] Kamala Harris is not the Democratic Nominee for 2024\n[END]").unwrap(),
            "Kamala Harris is not the Democratic Nominee for 2024"
        );
        assert_eq!(parse_opposite("[OPPOSITE] x [END] y").unwrap(), "x");
        assert_eq!(parse_opposite("nothing"), None);
        assert_eq!(parse_persona(" an epidemiologist.\nBecause...").unwrap(), "an epidemiologist");
        assert_eq!(parse_persona("  \n "), None);
    }

    #[test]
    fn sequences_chain() {
        let m = mock(vec![
            MockRule::contains(
                "[POTENTIAL INCITING EVENTS]",
                "x\n[PATH TO POSITIVE OUTCOME]\n1. p1\n[PATH TO POSITIVE OUTCOME]\n1. p2\nEND",
            ),
            MockRule::contains(
                "[POTENTIAL INHIBITING EVENTS]",
                "y\n[PATH TO NEGATIVE OUTCOME]\n1. n1\n[PATH TO NEGATIVE OUTCOME]\n1. n2\nEND",
            ),
            MockRule::contains(
                "[OPPOSITE] A human does not",
                "\n[OPPOSITE] Kamala Harris is not the Democratic Nominee for 2024\n[END]",
            ),
            MockRule::any("0.1"),
        ]);
        let t = run_sequences(&m, &event(), today()).unwrap();
        assert_eq!(t.llm_steps().count(), 4);
        assert!(t
            .step("negative")
            .unwrap()
            .prompt
            .contains("[EVENT OPPOSITE] Kamala Harris is not the Democratic Nominee for 2024 by 2022-12-31"));
        let fp = t.final_prompt().unwrap();
        for s in ["Potential Sequence 1:\n1. p1", "Potential Sequence 2:\n1. p2", "Potential Sequence 1:\n1. n1", "Potential Sequence 2:\n1. n2"] {
            assert!(fp.contains(s), "missing {s}");
        }
        assert_eq!(t.final_probability, Some(0.1));
    }

    #[test]
    fn sequences_degenerate() {
        let m = mock(vec![
            MockRule::contains("[POTENTIAL INCITING EVENTS]", ""),
            MockRule::contains("[POTENTIAL INHIBITING EVENTS]", "free text only"),
            MockRule::contains("[OPPOSITE] A human does not", "Tesla does not"),
            MockRule::any("0.1"),
        ]);
        let t = run_sequences(&m, &event(), today()).unwrap();
        let fp = t.final_prompt().unwrap();
        assert!(fp.contains("happening:\nNone\n"));
        assert!(fp.contains("Potential Sequence 1:\nfree text only"));
        assert!(!t.step("negative").unwrap().warnings.is_empty());
        assert!(!t.step("opposite").unwrap().warnings.is_empty());
    }

    #[test]
    fn crowd_two_personas() {
        let m = mock(vec![
            MockRule::contains("I choose to talk to", "")
                .with_responses(strs(&[" an epidemiologist.", " an economist."])),
            MockRule::contains("You are an epidemiologist", "ever: 0.9. Within the window: 0.2"),
            MockRule::contains("You are an economist", "ever: 0.9. Within the window: 0.4"),
        ]);
        let t = run_crowd(&m, &event(), today(), 2).unwrap();
        assert!((t.final_probability.unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(t.final_samples.len(), 2);
        assert_eq!(
            t.step("persona").unwrap().parsed,
            Some(Parsed::List(strs(&["an epidemiologist", "an economist"])))
        );
    }

    #[test]
    fn crowd_single_and_all_failing() {
        let m = mock(vec![
            MockRule::contains("I choose to talk to", "a statistician"),
            MockRule::any("0.25"),
        ]);
        let t = run_crowd(&m, &event(), today(), 1).unwrap();
        assert_eq!(t.llm_steps().count(), 2);
        assert_eq!(t.final_probability, Some(0.25));

        let m = mock(vec![
            MockRule::contains("I choose to talk to", "a statistician"),
            MockRule::any("no idea"),
        ]);
        let err = run_crowd(&m, &event(), today(), 3).unwrap_err();
        assert_eq!(err.failure, ChainFailure::AllPersonasFailed);
    }

    #[test]
    fn reversed_complement() {
        let m = mock(vec![
            MockRule::contains("[OPPOSITE] A human does not", "\n[OPPOSITE] Candidate A does not become president\n[END]"),
            MockRule::any("60%"),
        ]);
        let t = run_reversed(&m, &event(), today()).unwrap();
        assert_eq!(t.final_probability, Some(0.4));
        let raw = t.step("predict").unwrap().probability().unwrap();
        assert_eq!(t.final_probability.unwrap(), 1.0 - raw);
        assert!(t.final_prompt().unwrap().contains("satisfied: Candidate A does not become president"));
        assert_eq!(t.step("complement").unwrap().probability(), Some(0.4));

        let m = mock(vec![
            MockRule::contains("[OPPOSITE] A human does not", "[OPPOSITE] nope"),
            MockRule::any("0%"),
        ]);
        assert_eq!(run_reversed(&m, &event(), today()).unwrap().final_probability, Some(1.0));
    }

    #[test]
    fn rationale_last_number() {
        let m = mock(vec![MockRule::any("Could be 10%, but considering all, therefore 30%")]);
        let t = run_basic_with_rationale(&m, &event(), today()).unwrap();
        assert_eq!(t.final_probability, Some(0.3));
        let c = mock(vec![MockRule::any("10%")]);
        assert_eq!(
            run_basic_with_rationale(&c, &event(), today()).unwrap().final_probability,
            run_basic(&c, &event(), today()).unwrap().final_probability
        );
    }

    #[test]
    fn partial_sample_failure_is_recorded() {
        let m = mock(vec![MockRule::any("").with_responses(strs(&["20%", "unsure"]))]);
        let t = run_basic(&m, &event(), today()).unwrap();
        assert_eq!(t.final_samples.len(), 4);
        assert_eq!(t.final_probability, Some(0.2));
        assert_eq!(t.step("predict").unwrap().warnings.len(), 4);
    }
}
