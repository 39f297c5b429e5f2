//! Command-line front end: `run`, `score`, `bias` and `rationale`.
//!
//! Every command is a plain function over a config struct so it can be
//! driven from tests and examples; [`main_with_args`] is the clap layer the
//! binary calls. Exit statuses: 0 success, 1 some events failed, 2
//! configuration or usage error.

mod config;
mod reports;
mod run;

use std::io::BufRead;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::events::{parse_dataset, DatasetFormat, DatasetSplit, SplitLabel};
use crate::metrics::ForecastRecord;

pub use config::{BackendChoice, FileConfig, RunConfig};
pub use reports::{
    cmd_bias, cmd_rationale, cmd_score, BiasConfig, BiasReport, RationaleConfig, RationaleReport,
    ScoreConfig, ScoreOutput,
};
pub use run::{cmd_run, CountingBackend, RunSummary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Failed(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Failed(_) => EXIT_PARTIAL,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "foresight", version, about = "Forecast binary events with LLM prompt chains and score the results")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Forecast every event active on a date with one strategy.
    Run(RunArgs),
    /// Score forecast files (or the market midpoints) against resolutions.
    Score(ScoreArgs),
    /// Coherence of forward versus reversed-event forecasts.
    Bias(BiasArgs),
    /// Per-event shift between just-answer and with-rationale forecasts.
    Rationale(RationaleArgs),
}

#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// TOML file supplying any of these flags; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Prediction date (YYYY-MM-DD). Required.
    #[arg(long)]
    pub date: Option<String>,
    #[arg(long)]
    pub strategy: Option<String>,
    /// `live`, `mock:<rules.toml>` or `replay:<cache dir>`.
    #[arg(long)]
    pub backend: Option<String>,
    /// Model name for the live backend.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub traces: Option<PathBuf>,
    /// Record/replay cache directory.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Serve only from the cache; a miss is an error.
    #[arg(long)]
    pub replay_only: bool,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub persona_count: Option<u32>,
    #[arg(long)]
    pub keyword_count: Option<u32>,
    /// `llm` (default) or `parse_only`.
    #[arg(long)]
    pub extraction: Option<String>,
    #[arg(long)]
    pub nyt_endpoint: Option<String>,
    #[arg(long)]
    pub hn_endpoint: Option<String>,
    /// Live backend request rate.
    #[arg(long)]
    pub requests_per_second: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub events: PathBuf,
    /// Forecast file; repeatable.
    #[arg(long = "forecasts")]
    pub forecasts: Vec<PathBuf>,
    /// Add a column scoring the market spread midpoints on `--date`.
    #[arg(long)]
    pub from_market: bool,
    #[arg(long)]
    pub date: Option<String>,
    /// Write the structured report here as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BiasArgs {
    #[arg(long)]
    pub forward: PathBuf,
    #[arg(long)]
    pub reversed: PathBuf,
    /// Events file; enables the Brier rows.
    #[arg(long)]
    pub events: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RationaleArgs {
    #[arg(long)]
    pub just: PathBuf,
    #[arg(long)]
    pub rationale: PathBuf,
    /// Write the per-event rows here as CSV instead of stdout.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command,
/// printing reports to stdout. Returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32, CliError> {
    match cmd {
        Command::Run(args) => {
            let cfg = RunConfig::from_args(args)?;
            let summary = cmd_run(&cfg)?;
            eprintln!("{}", summary.describe());
            Ok(summary.exit_code())
        }
        Command::Score(a) => {
            let date = a.date.as_deref().map(parse_date).transpose()?;
            let out = cmd_score(&ScoreConfig {
                events: a.events,
                forecasts: a.forecasts,
                from_market: a.from_market,
                date,
            })?;
            print!("{}", out.markdown);
            write_optional(a.json.as_deref(), &out.json)?;
            Ok(EXIT_OK)
        }
        Command::Bias(a) => {
            let report = cmd_bias(&BiasConfig {
                forward: a.forward,
                reversed: a.reversed,
                events: a.events,
            })?;
            print!("{}", report.render());
            write_optional(a.json.as_deref(), &report.to_json())?;
            Ok(EXIT_OK)
        }
        Command::Rationale(a) => {
            let report = cmd_rationale(&RationaleConfig {
                just: a.just,
                rationale: a.rationale,
            })?;
            match a.csv {
                Some(path) => write_optional(Some(&path), &report.csv)?,
                None => print!("{}", report.csv),
            }
            print!("{}", report.summary());
            Ok(EXIT_OK)
        }
    }
}

fn write_optional(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    if let Some(p) = path {
        std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

pub(crate) fn parse_date(s: &str) -> Result<chrono::NaiveDate, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("`{s}` is not a YYYY-MM-DD date")))
}

/// Reads an events file.
pub fn load_events(path: &Path) -> anyhow::Result<DatasetSplit> {
    let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let label = SplitLabel::Custom(
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    );
    parse_dataset(std::io::BufReader::new(f), DatasetFormat::JsonLines, label)
        .with_context(|| format!("reading {}", path.display()))
}

/// Reads a forecast file: one JSON record per line, blank lines ignored.
pub fn load_forecasts(path: &Path) -> anyhow::Result<Vec<ForecastRecord>> {
    let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ForecastRecord = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}: malformed forecast record", path.display(), i + 1))?;
        rec.validate()
            .map_err(|e| anyhow::anyhow!("{}:{}: {e}", path.display(), i + 1))?;
        out.push(rec);
    }
    Ok(out)
}

/// One compact JSON record per line.
pub fn forecasts_to_jsonl(records: &[ForecastRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("forecast serializes"));
        out.push('\n');
    }
    out
}
