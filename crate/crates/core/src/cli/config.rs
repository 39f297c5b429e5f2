use std::path::PathBuf;

use chrono::NaiveDate;
use serde::Deserialize;

use crate::prompts::ExtractionMode;
use crate::strategies::{StrategyId, StrategyParams, StrategySpec};

use super::{parse_date, CliError, RunArgs};

pub const DEFAULT_WORKERS: usize = 4;

/// Where completions come from.
#[derive(Debug, Clone, PartialEq)]
pub enum BackendChoice {
    Live { model: String },
    Mock(PathBuf),
    Replay(PathBuf),
}

impl BackendChoice {
    /// `live`, `mock:<path>` or `replay:<dir>`.
    pub fn parse(s: &str, model: Option<&str>) -> Result<Self, CliError> {
        let s = s.trim();
        if s == "live" {
            let model = model.ok_or_else(|| CliError::Config("the live backend needs --model".into()))?;
            return Ok(BackendChoice::Live { model: model.into() });
        }
        if let Some(p) = s.strip_prefix("mock:") {
            return Ok(BackendChoice::Mock(PathBuf::from(p)));
        }
        if let Some(p) = s.strip_prefix("replay:") {
            return Ok(BackendChoice::Replay(PathBuf::from(p)));
        }
        Err(CliError::Config(format!(
            "backend `{s}` is not one of live, mock:<path>, replay:<dir>"
        )))
    }
}

/// Contents of a `--config` file. Keys mirror the flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub events: Option<PathBuf>,
    pub date: Option<String>,
    pub strategy: Option<String>,
    pub backend: Option<String>,
    pub model: Option<String>,
    pub out: Option<PathBuf>,
    pub traces: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub replay_only: Option<bool>,
    pub workers: Option<usize>,
    pub persona_count: Option<u32>,
    pub keyword_count: Option<u32>,
    pub extraction: Option<String>,
    pub nyt_endpoint: Option<String>,
    pub hn_endpoint: Option<String>,
    pub requests_per_second: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
    }
}

/// A validated `run` configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub events: PathBuf,
    pub date: NaiveDate,
    pub strategy: StrategySpec,
    pub backend: BackendChoice,
    pub out: PathBuf,
    pub traces: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub replay_only: bool,
    pub workers: usize,
    pub hn_endpoint: Option<String>,
    pub nyt_endpoint: Option<String>,
    /// Taken from `FORESIGHT_NYT_API_KEY` when built from flags.
    pub nyt_api_key: Option<String>,
    pub requests_per_second: f64,
}

impl RunConfig {
    /// Minimal config; everything else at its default.
    pub fn new(events: impl Into<PathBuf>, date: NaiveDate, strategy: StrategyId, backend: BackendChoice, out: impl Into<PathBuf>) -> Self {
        RunConfig {
            events: events.into(),
            date,
            strategy: StrategySpec::new(strategy),
            backend,
            out: out.into(),
            traces: None,
            cache: None,
            replay_only: false,
            workers: DEFAULT_WORKERS,
            hn_endpoint: None,
            nyt_endpoint: None,
            nyt_api_key: None,
            requests_per_second: 1.0,
        }
    }

    /// Merges flags over the optional config file and validates the result.
    pub fn from_args(args: RunArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let missing = |flag: &str| CliError::Config(format!("--{flag} is required"));

        let events = args.events.or(file.events).ok_or_else(|| missing("events"))?;
        let date = parse_date(&args.date.or(file.date).ok_or_else(|| missing("date"))?)?;
        let strategy_id: StrategyId = args
            .strategy
            .or(file.strategy)
            .ok_or_else(|| missing("strategy"))?
            .parse()
            .map_err(|e: crate::strategies::SpecError| CliError::Config(e.to_string()))?;
        let model = args.model.or(file.model);
        let backend = BackendChoice::parse(
            &args.backend.or(file.backend).ok_or_else(|| missing("backend"))?,
            model.as_deref(),
        )?;
        let out = args.out.or(file.out).ok_or_else(|| missing("out"))?;

        let mut params = StrategyParams::default();
        if let Some(n) = args.persona_count.or(file.persona_count) {
            params.persona_count = n;
        }
        if let Some(n) = args.keyword_count.or(file.keyword_count) {
            params.keyword_count = n;
        }
        if let Some(m) = args.extraction.or(file.extraction) {
            params.extraction = match m.as_str() {
                "llm" => ExtractionMode::Llm,
                "parse_only" | "parse" => ExtractionMode::ParseOnly,
                other => return Err(CliError::Config(format!("extraction mode `{other}` is not llm or parse_only"))),
            };
        }
        let strategy = StrategySpec::with_params(strategy_id, params).map_err(|e| CliError::Config(e.to_string()))?;

        let workers = args.workers.or(file.workers).unwrap_or(DEFAULT_WORKERS);
        if workers == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        let replay_only = args.replay_only || file.replay_only.unwrap_or(false);
        let cache = args.cache.or(file.cache);
        if replay_only && cache.is_none() && !matches!(backend, BackendChoice::Replay(_)) {
            return Err(CliError::Config("--replay-only needs --cache".into()));
        }
        Ok(RunConfig {
            events,
            date,
            strategy,
            backend,
            out,
            traces: args.traces.or(file.traces),
            cache,
            replay_only,
            workers,
            hn_endpoint: args.hn_endpoint.or(file.hn_endpoint),
            nyt_endpoint: args.nyt_endpoint.or(file.nyt_endpoint),
            nyt_api_key: std::env::var(crate::news::ENV_NYT_API_KEY).ok(),
            requests_per_second: args.requests_per_second.or(file.requests_per_second).unwrap_or(1.0),
        })
    }
}
