//! Rule-scripted backend for offline and golden tests.
//!
//! Rules are tried in order; the first whose matcher accepts the prompt
//! answers. Within one request, sample `i` gets `responses[i % len]`, so a
//! response sequence is replayed identically for every request regardless
//! of call order or concurrency.
//!
//! Script files are TOML:
//!
//! ```toml
//! [[rule]]
//! contains = "Tesla"
//! response = "5%"
//!
//! [[rule]]
//! regex = '(?s)Forecaster output:\n(.*)\z'
//! response = "$1"
//!
//! [[rule]]            # no matcher: catch-all
//! responses = ["0%", "20%"]
//! ```

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use regex::Regex;
use serde::Deserialize;

use super::{Backend, CompletionRequest, CompletionResponse, LlmError};

#[derive(Debug, Clone)]
pub enum RuleMatch {
    Contains(String),
    Regex(Regex),
    Any,
}

#[derive(Debug, Clone)]
pub struct MockRule {
    pub matcher: RuleMatch,
    pub responses: Vec<String>,
}

impl MockRule {
    pub fn contains(needle: impl Into<String>, response: impl Into<String>) -> Self {
        MockRule {
            matcher: RuleMatch::Contains(needle.into()),
            responses: vec![response.into()],
        }
    }

    /// Regex rule; responses may reference capture groups (`$1`, `${name}`).
    pub fn regex(pattern: &str, response: impl Into<String>) -> Result<Self, regex::Error> {
        Ok(MockRule {
            matcher: RuleMatch::Regex(Regex::new(pattern)?),
            responses: vec![response.into()],
        })
    }

    pub fn any(response: impl Into<String>) -> Self {
        MockRule {
            matcher: RuleMatch::Any,
            responses: vec![response.into()],
        }
    }

    pub fn with_responses(mut self, responses: Vec<String>) -> Self {
        assert!(!responses.is_empty(), "a mock rule needs at least one response");
        self.responses = responses;
        self
    }

    fn answer(&self, prompt: &str, sample: usize) -> Option<String> {
        let template = &self.responses[sample % self.responses.len()];
        match &self.matcher {
            RuleMatch::Any => Some(template.clone()),
            RuleMatch::Contains(needle) => prompt.contains(needle.as_str()).then(|| template.clone()),
            RuleMatch::Regex(re) => re.captures(prompt).map(|caps| {
                let mut out = String::new();
                caps.expand(template, &mut out);
                out
            }),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptFile {
    #[serde(default)]
    rule: Vec<RuleSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleSpec {
    contains: Option<String>,
    regex: Option<String>,
    response: Option<String>,
    responses: Option<Vec<String>>,
}

/// Deterministic backend answering from an ordered rule list.
#[derive(Debug)]
pub struct ScriptedMock {
    id: String,
    rules: Vec<MockRule>,
    calls: AtomicUsize,
}

/// Echoes back whatever the extraction prompt quoted as forecaster output,
/// so the extractor reports the forecaster's own number.
pub const EXTRACTION_ECHO_PATTERN: &str = r"(?s)\nForecaster output:\n(.*)\z";

impl ScriptedMock {
    pub fn new(rules: Vec<MockRule>) -> Self {
        ScriptedMock {
            id: "mock".into(),
            rules,
            calls: AtomicUsize::new(0),
        }
    }

    /// Mock that answers every prompt with `text`.
    pub fn constant(text: impl Into<String>) -> Self {
        Self::new(vec![MockRule::any(text)])
    }

    /// Prepends a rule that makes the probability extractor echo its input.
    pub fn echo_extraction(mut self) -> Self {
        let rule = MockRule::regex(EXTRACTION_ECHO_PATTERN, "$1").expect("static pattern");
        self.rules.insert(0, rule);
        self
    }

    pub fn push(&mut self, rule: MockRule) {
        self.rules.push(rule);
    }

    pub fn from_toml_str(text: &str) -> Result<Self, String> {
        let file: ScriptFile = toml::from_str(text).map_err(|e| e.to_string())?;
        let mut rules = Vec::with_capacity(file.rule.len());
        for (i, spec) in file.rule.into_iter().enumerate() {
            let responses = match (spec.response, spec.responses) {
                (Some(r), None) => vec![r],
                (None, Some(rs)) if !rs.is_empty() => rs,
                _ => {
                    return Err(format!(
                        "rule {}: exactly one of `response` or non-empty `responses` required",
                        i + 1
                    ))
                }
            };
            let matcher = match (spec.contains, spec.regex) {
                (Some(c), None) => RuleMatch::Contains(c),
                (None, Some(r)) => RuleMatch::Regex(
                    Regex::new(&r).map_err(|e| format!("rule {}: {e}", i + 1))?,
                ),
                (None, None) => RuleMatch::Any,
                (Some(_), Some(_)) => {
                    return Err(format!("rule {}: `contains` and `regex` are exclusive", i + 1))
                }
            };
            rules.push(MockRule { matcher, responses });
        }
        Ok(Self::new(rules))
    }

    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_toml_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Number of `complete` calls served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Backend for ScriptedMock {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        req.validate()?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        let n = req.n_samples as usize;
        let rule = self
            .rules
            .iter()
            .find(|r| r.answer(&req.prompt, 0).is_some())
            .ok_or_else(|| LlmError::NoMatchingRule(req.prompt.chars().take(60).collect()))?;
        let texts = (0..n)
            .map(|i| rule.answer(&req.prompt, i).expect("rule matched above"))
            .collect();
        Ok(CompletionResponse {
            texts,
            backend_id: self.id.clone(),
            cached: false,
        })
    }
}
