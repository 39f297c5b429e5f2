//! Dated headline retrieval for grounding forecasts.
//!
//! Two sources: the Hacker News search API and the NYT article-search API.
//! Whatever an upstream returns, nothing dated after [`QueryWindow::until`]
//! leaves this module.

mod hn;
mod nyt;
mod transport;

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::{atomic_write, canonical_json, sha256_hex, sharded_path};

pub use hn::{HackerNewsClient, DEFAULT_HN_ENDPOINT};
pub use nyt::{NytClient, DEFAULT_NYT_ENDPOINT, ENV_NYT_API_KEY};
pub use transport::{HttpReply, ReqwestTransport, RetryPolicy, Transport};

pub const DEFAULT_MAX_RESULTS: usize = 25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NewsError {
    #[error("network error: {0}")]
    NetworkError(String),
    #[error("upstream returned status {0}")]
    UpstreamError(u16),
    #[error("NYT API key is not set")]
    MissingApiKey,
    #[error("query has no search terms")]
    EmptyTerms,
    #[error("could not decode upstream response: {0}")]
    Decode(String),
    #[error("no cached news response for {0} in replay-only mode")]
    ReplayMiss(String),
    #[error("news cache i/o: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "hackernews")]
    HackerNews,
    #[serde(rename = "nyt")]
    Nyt,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::HackerNews => "hackernews",
            Source::Nyt => "nyt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Headline {
    pub source: Source,
    pub date: NaiveDate,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryWindow {
    pub terms: Vec<String>,
    /// Inclusive upper bound on headline dates.
    pub until: NaiveDate,
    pub max_results: usize,
}

impl QueryWindow {
    pub fn new(terms: Vec<String>, until: NaiveDate) -> Self {
        QueryWindow {
            terms,
            until,
            max_results: DEFAULT_MAX_RESULTS,
        }
    }

    pub fn validate(&self) -> Result<(), NewsError> {
        if self.terms.is_empty() || self.terms.iter().any(|t| t.trim().is_empty()) {
            return Err(NewsError::EmptyTerms);
        }
        Ok(())
    }

    /// All terms in one space-joined query string.
    pub fn query_string(&self) -> String {
        self.terms
            .iter()
            .map(|t| t.trim())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Anything that can answer a headline query.
pub trait HeadlineSource: Send + Sync {
    fn source(&self) -> Source;
    fn query(&self, q: &QueryWindow) -> Result<Vec<Headline>, NewsError>;
}

/// Drops headlines after `until` and empty titles, dedups by (title, date),
/// sorts newest first, and truncates to `max_results`.
pub fn bound_headlines(mut hs: Vec<Headline>, until: NaiveDate, max_results: usize) -> Vec<Headline> {
    hs.retain(|h| h.date <= until && !h.title.trim().is_empty());
    let mut seen = std::collections::HashSet::new();
    hs.retain(|h| seen.insert((h.title.clone(), h.date)));
    hs.sort_by(|a, b| b.date.cmp(&a.date));
    hs.truncate(max_results);
    hs
}

pub fn query_hackernews(client: &HackerNewsClient, q: &QueryWindow) -> Result<Vec<Headline>, NewsError> {
    client.query(q)
}

pub fn query_nyt(client: &NytClient, q: &QueryWindow) -> Result<Vec<Headline>, NewsError> {
    client.query(q)
}

/// `Headline <i> -- <YYYY-MM-DD>: <title>` lines, 1-indexed, newest first.
pub fn format_headlines(hs: &[Headline]) -> String {
    let mut sorted: Vec<&Headline> = hs.iter().collect();
    sorted.sort_by(|a, b| b.date.cmp(&a.date));
    sorted
        .iter()
        .enumerate()
        .map(|(i, h)| format!("Headline {} -- {}: {}", i + 1, h.date, h.title))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Inverse of [`format_headlines`]: (date, title) pairs in listed order.
pub fn parse_formatted_headlines(text: &str) -> Vec<(NaiveDate, String)> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"^Headline \d+ -- (\d{4}-\d{2}-\d{2}): (.*)$").expect("static regex")
    });
    text.lines()
        .filter_map(|l| {
            let c = re.captures(l)?;
            Some((c[1].parse().ok()?, c[2].to_string()))
        })
        .collect()
}

/// Content-addressed cache of normalized query results.
#[derive(Debug)]
pub struct NewsCache {
    dir: PathBuf,
    replay_only: bool,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    source: Source,
    query: QueryWindow,
    headlines: Vec<Headline>,
}

impl NewsCache {
    pub fn new(dir: impl Into<PathBuf>, replay_only: bool) -> Self {
        NewsCache {
            dir: dir.into(),
            replay_only,
        }
    }

    fn key(source: Source, q: &QueryWindow) -> String {
        let canon = canonical_json(&serde_json::json!({
            "source": source,
            "terms": q.terms,
            "until": q.until,
            "max_results": q.max_results,
        }));
        sha256_hex(canon.as_bytes())
    }

    pub(crate) fn load(&self, source: Source, q: &QueryWindow) -> Result<Option<Vec<Headline>>, NewsError> {
        let path = sharded_path(&self.dir, &Self::key(source, q));
        match std::fs::read(&path) {
            Ok(bytes) => {
                let entry: CacheEntry = serde_json::from_slice(&bytes)
                    .map_err(|e| NewsError::Io(format!("{}: {e}", path.display())))?;
                Ok(Some(entry.headlines))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(NewsError::Io(format!("{}: {e}", path.display()))),
        }
    }

    fn store(&self, source: Source, q: &QueryWindow, hs: &[Headline]) -> Result<(), NewsError> {
        let key = Self::key(source, q);
        let path = sharded_path(&self.dir, &key);
        let entry = CacheEntry {
            key,
            source,
            query: q.clone(),
            headlines: hs.to_vec(),
        };
        let json = serde_json::to_vec_pretty(&entry).expect("news cache entry serializes");
        atomic_write(&path, &json).map_err(|e| NewsError::Io(format!("{}: {e}", path.display())))
    }

    /// Cached result, or `fetch` on a miss (recorded unless replay-only).
    pub(crate) fn get_or_fetch(
        &self,
        source: Source,
        q: &QueryWindow,
        fetch: impl FnOnce() -> Result<Vec<Headline>, NewsError>,
    ) -> Result<Vec<Headline>, NewsError> {
        if let Some(hs) = self.load(source, q)? {
            return Ok(hs);
        }
        if self.replay_only {
            return Err(NewsError::ReplayMiss(Self::key(source, q)));
        }
        let hs = fetch()?;
        self.store(source, q, &hs)?;
        Ok(hs)
    }
}

/// Request counter shared by the HTTP clients.
#[derive(Debug, Default)]
pub(crate) struct CallCounter(AtomicUsize);

impl CallCounter {
    pub(crate) fn bump(&self) {
        self.0.fetch_add(1, Ordering::SeqCst);
    }

    pub(crate) fn get(&self) -> usize {
        self.0.load(Ordering::SeqCst)
    }
}

/// Parses the date prefix of an ISO-8601 timestamp.
pub(crate) fn date_prefix(ts: &str) -> Option<NaiveDate> {
    ts.get(..10)?.parse().ok()
}
