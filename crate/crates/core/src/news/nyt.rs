//! New York Times article search.

use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;

use super::{
    bound_headlines, date_prefix, CallCounter, Headline, HeadlineSource, NewsCache, NewsError,
    QueryWindow, ReqwestTransport, RetryPolicy, Source, Transport,
};

pub const DEFAULT_NYT_ENDPOINT: &str = "https://api.nytimes.com";
pub const ENV_NYT_API_KEY: &str = "FORESIGHT_NYT_API_KEY";

/// The article-search API serves ten documents per page.
const PAGE_SIZE: usize = 10;
const MAX_PAGES: usize = 100;

#[derive(Deserialize)]
struct SearchReply {
    response: Option<ResponseBody>,
}

#[derive(Deserialize)]
struct ResponseBody {
    #[serde(default)]
    docs: Vec<Doc>,
}

#[derive(Deserialize)]
struct Doc {
    headline: Option<DocHeadline>,
    pub_date: Option<String>,
    web_url: Option<String>,
}

#[derive(Deserialize)]
struct DocHeadline {
    main: Option<String>,
}

impl Doc {
    fn into_headline(self) -> Option<Headline> {
        Some(Headline {
            source: Source::Nyt,
            date: date_prefix(self.pub_date.as_deref()?)?,
            title: self.headline?.main?.trim().to_string(),
            url: self.web_url,
        })
    }
}

pub struct NytClient {
    endpoint: String,
    api_key: Option<String>,
    transport: Arc<dyn Transport>,
    retry: RetryPolicy,
    cache: Option<NewsCache>,
    calls: CallCounter,
}

impl NytClient {
    pub fn new(transport: Arc<dyn Transport>, api_key: Option<String>) -> Self {
        NytClient {
            endpoint: DEFAULT_NYT_ENDPOINT.into(),
            api_key,
            transport,
            retry: RetryPolicy::default(),
            cache: None,
            calls: CallCounter::default(),
        }
    }

    /// HTTP client with a 10 s timeout, keyed from `FORESIGHT_NYT_API_KEY`.
    pub fn http_from_env() -> Result<Self, NewsError> {
        let transport = Arc::new(ReqwestTransport::new(Duration::from_secs(10))?);
        Ok(Self::new(transport, std::env::var(ENV_NYT_API_KEY).ok()))
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

    pub fn network_calls(&self) -> usize {
        self.calls.get()
    }

    fn fetch(&self, q: &QueryWindow, key: &str) -> Result<Vec<Headline>, NewsError> {
        let url = format!(
            "{}/svc/search/v2/articlesearch.json",
            self.endpoint.trim_end_matches('/')
        );
        let end_date = q.until.format("%Y%m%d").to_string();
        let mut out = Vec::new();
        for page in 0..MAX_PAGES {
            let params = vec![
                ("q".to_string(), q.query_string()),
                ("end_date".to_string(), end_date.clone()),
                ("sort".to_string(), "newest".to_string()),
                ("page".to_string(), page.to_string()),
                ("api-key".to_string(), key.to_string()),
            ];
            let reply = self.retry.run(|| {
                self.calls.bump();
                self.transport.get(&url, &params)
            })?;
            let parsed: SearchReply =
                serde_json::from_str(&reply.body).map_err(|e| NewsError::Decode(e.to_string()))?;
            let docs = parsed.response.map(|r| r.docs).unwrap_or_default();
            let n_docs = docs.len();
            out.extend(docs.into_iter().filter_map(Doc::into_headline));
            if n_docs < PAGE_SIZE || out.len() >= q.max_results {
                break;
            }
        }
        Ok(bound_headlines(out, q.until, q.max_results))
    }
}

impl HeadlineSource for NytClient {
    fn source(&self) -> Source {
        Source::Nyt
    }

    fn query(&self, q: &QueryWindow) -> Result<Vec<Headline>, NewsError> {
        q.validate()?;
        // A missing key is reported ahead of a replay miss so that keyless
        // runs fail the same way with or without a cache.
        let hs = match (&self.cache, self.api_key.as_deref()) {
            (Some(cache), Some(key)) => cache.get_or_fetch(Source::Nyt, q, || self.fetch(q, key))?,
            (Some(cache), None) => cache.load(Source::Nyt, q)?.ok_or(NewsError::MissingApiKey)?,
            (None, Some(key)) => self.fetch(q, key)?,
            (None, None) => return Err(NewsError::MissingApiKey),
        };
        Ok(bound_headlines(hs, q.until, q.max_results))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::news::HttpReply;
    use std::sync::Mutex;

    struct Pages(Mutex<Vec<String>>, Mutex<usize>);

    impl Transport for Pages {
        fn get(&self, _url: &str, query: &[(String, String)]) -> Result<HttpReply, NewsError> {
            *self.1.lock().unwrap() += 1;
            let page: usize = query.iter().find(|(k, _)| k == "page").unwrap().1.parse().unwrap();
            let body = self.0.lock().unwrap().get(page).cloned().unwrap_or_else(|| docs(0, 0));
            Ok(HttpReply { status: 200, body })
        }
    }

    fn docs(start: usize, n: usize) -> String {
        let ds: Vec<String> = (start..start + n)
            .map(|i| {
                format!(
                    r#"{{"headline":{{"main":"story {i}"}},"pub_date":"2022-07-{:02}T10:00:00+0000","web_url":"https://example.com/{i}"}}"#,
                    28 - (i % 20)
                )
            })
            .collect();
        format!(r#"{{"status":"OK","response":{{"docs":[{}]}}}}"#, ds.join(","))
    }

    fn window(max: usize) -> QueryWindow {
        let mut q = QueryWindow::new(vec!["Tesla".into(), "Autonomy".into()], "2022-08-01".parse().unwrap());
        q.max_results = max;
        q
    }

    #[test]
    fn missing_key() {
        let t = Arc::new(Pages(Mutex::new(vec![]), Mutex::new(0)));
        let client = NytClient::new(t.clone(), None);
        assert_eq!(client.query(&window(25)), Err(NewsError::MissingApiKey));
        assert_eq!(*t.1.lock().unwrap(), 0);
    }

    #[test]
    fn merges_pages_up_to_max() {
        let t = Arc::new(Pages(Mutex::new(vec![docs(0, 10), docs(10, 10), docs(20, 10)]), Mutex::new(0)));
        let client = NytClient::new(t.clone(), Some("k".into()));
        let hs = client.query(&window(15)).unwrap();
        assert_eq!(hs.len(), 15);
        assert_eq!(client.network_calls(), 2);

        let t = Arc::new(Pages(Mutex::new(vec![docs(0, 10), docs(10, 3)]), Mutex::new(0)));
        let client = NytClient::new(t, Some("k".into()));
        assert_eq!(client.query(&window(25)).unwrap().len(), 13);
        assert_eq!(client.network_calls(), 2);
    }
}
