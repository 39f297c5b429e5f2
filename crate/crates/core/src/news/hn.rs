//! Hacker News via the Algolia search API.

use std::sync::Arc;
use std::time::Duration;

use chrono::{NaiveDate, NaiveTime};
use serde::Deserialize;

use super::{
    bound_headlines, date_prefix, CallCounter, Headline, HeadlineSource, NewsCache, NewsError,
    QueryWindow, ReqwestTransport, RetryPolicy, Source, Transport,
};

pub const DEFAULT_HN_ENDPOINT: &str = "https://hn.algolia.com/api/v1";

const MAX_PAGES: u32 = 10;

#[derive(Deserialize)]
struct SearchPage {
    #[serde(default)]
    hits: Vec<Hit>,
    #[serde(default, rename = "nbPages")]
    nb_pages: Option<u32>,
}

#[derive(Deserialize)]
struct Hit {
    title: Option<String>,
    story_title: Option<String>,
    url: Option<String>,
    created_at: Option<String>,
    created_at_i: Option<i64>,
}

impl Hit {
    fn into_headline(self) -> Option<Headline> {
        let date = match (&self.created_at, self.created_at_i) {
            (Some(ts), _) => date_prefix(ts)?,
            (None, Some(secs)) => chrono::DateTime::from_timestamp(secs, 0)?.date_naive(),
            (None, None) => return None,
        };
        let title = self.title.or(self.story_title)?.trim().to_string();
        Some(Headline {
            source: Source::HackerNews,
            date,
            title,
            url: self.url,
        })
    }
}

pub struct HackerNewsClient {
    endpoint: String,
    transport: Arc<dyn Transport>,
    retry: RetryPolicy,
    cache: Option<NewsCache>,
    calls: CallCounter,
}

impl HackerNewsClient {
    pub fn new(transport: Arc<dyn Transport>) -> Self {
        HackerNewsClient {
            endpoint: DEFAULT_HN_ENDPOINT.into(),
            transport,
            retry: RetryPolicy::default(),
            cache: None,
            calls: CallCounter::default(),
        }
    }

    /// Client over HTTP with a 10 s timeout.
    pub fn http() -> Result<Self, NewsError> {
        Ok(Self::new(Arc::new(ReqwestTransport::new(Duration::from_secs(10))?)))
    }

    pub fn with_endpoint(mut self, endpoint: impl Into<String>) -> Self {
        self.endpoint = endpoint.into();
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_cache(mut self, cache: NewsCache) -> Self {
        self.cache = Some(cache);
        self
    }

    /// Upstream requests issued, retries included.
    pub fn network_calls(&self) -> usize {
        self.calls.get()
    }

    fn fetch(&self, q: &QueryWindow) -> Result<Vec<Headline>, NewsError> {
        // numeric filter is exclusive of the next day's midnight (UTC)
        let cutoff = q
            .until
            .succ_opt()
            .unwrap_or(NaiveDate::MAX)
            .and_time(NaiveTime::MIN)
            .and_utc()
            .timestamp();
        let url = format!("{}/search_by_date", self.endpoint.trim_end_matches('/'));
        let per_page = q.max_results.clamp(1, 1000);
        let mut out = Vec::new();
        let mut page = 0u32;
        loop {
            let params = vec![
                ("query".to_string(), q.query_string()),
                ("tags".to_string(), "story".to_string()),
                ("numericFilters".to_string(), format!("created_at_i<{cutoff}")),
                ("hitsPerPage".to_string(), per_page.to_string()),
                ("page".to_string(), page.to_string()),
            ];
            let reply = self.retry.run(|| {
                self.calls.bump();
                self.transport.get(&url, &params)
            })?;
            let parsed: SearchPage =
                serde_json::from_str(&reply.body).map_err(|e| NewsError::Decode(e.to_string()))?;
            let n_hits = parsed.hits.len();
            out.extend(parsed.hits.into_iter().filter_map(Hit::into_headline));
            page += 1;
            let exhausted = n_hits == 0 || parsed.nb_pages.map_or(true, |n| page >= n);
            if exhausted || out.len() >= q.max_results || page >= MAX_PAGES {
                break;
            }
        }
        Ok(bound_headlines(out, q.until, q.max_results))
    }
}

impl HeadlineSource for HackerNewsClient {
    fn source(&self) -> Source {
        Source::HackerNews
    }

    fn query(&self, q: &QueryWindow) -> Result<Vec<Headline>, NewsError> {
        q.validate()?;
        let hs = match &self.cache {
            Some(cache) => cache.get_or_fetch(Source::HackerNews, q, || self.fetch(q))?,
            None => self.fetch(q)?,
        };
        // re-bound: cache files can be edited by hand
        Ok(bound_headlines(hs, q.until, q.max_results))
    }
}
