use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use anyhow::Context;

use crate::events::{active_events, Event};
use crate::llm::{
    Backend, CacheMode, CachedBackend, CompletionRequest, CompletionResponse, HttpBackend,
    HttpBackendConfig, LlmError, ScriptedMock,
};
use crate::metrics::ForecastRecord;
use crate::news::{HackerNewsClient, NewsCache, NytClient, ReqwestTransport};
use crate::strategies::{ChainTrace, NewsSources, StrategyId};

use super::{forecasts_to_jsonl, load_events, BackendChoice, CliError, RunConfig, EXIT_OK, EXIT_PARTIAL};

/// Forwards to an inner backend and counts the calls that reach it.
pub struct CountingBackend {
    inner: Arc<dyn Backend>,
    calls: AtomicUsize,
}

impl CountingBackend {
    pub fn new(inner: Arc<dyn Backend>) -> Self {
        CountingBackend {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Backend for CountingBackend {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(req)
    }
}

/// What a `run` did.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub strategy: StrategyId,
    pub active_events: usize,
    pub forecasts_written: usize,
    /// (event id, error) for every event that failed.
    pub failures: Vec<(String, String)>,
    /// Completion calls that reached the underlying backend (cache hits
    /// excluded).
    pub backend_calls: usize,
    pub cache_hits: usize,
    pub cache_misses: usize,
    /// Requests issued to the news services.
    pub news_network_calls: usize,
    pub out: PathBuf,
    pub traces: Option<PathBuf>,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            EXIT_OK
        } else {
            EXIT_PARTIAL
        }
    }

    pub fn describe(&self) -> String {
        let mut s = format!(
            "{}: {} of {} active events forecast ({} backend calls, {} cache hits, {} news requests)",
            self.strategy,
            self.forecasts_written,
            self.active_events,
            self.backend_calls,
            self.cache_hits,
            self.news_network_calls
        );
        for (id, err) in &self.failures {
            s.push_str(&format!("\n  failed {id}: {err}"));
        }
        s
    }
}

struct Backends {
    top: Arc<dyn Backend>,
    counter: Option<Arc<CountingBackend>>,
    cache: Option<Arc<CachedBackend>>,
}

fn build_backend(cfg: &RunConfig) -> Result<Backends, CliError> {
    let base: Arc<dyn Backend> = match &cfg.backend {
        BackendChoice::Replay(dir) => {
            let replay = Arc::new(
                CachedBackend::replay(dir).map_err(|e| CliError::Config(format!("replay cache: {e}")))?,
            );
            return Ok(Backends {
                top: replay.clone(),
                counter: None,
                cache: Some(replay),
            });
        }
        BackendChoice::Mock(path) => Arc::new(ScriptedMock::from_file(path).map_err(CliError::Config)?),
        BackendChoice::Live { model } => {
            let mut hc = HttpBackendConfig::from_env(model.clone()).map_err(|e| CliError::Config(e.to_string()))?;
            hc.requests_per_second = cfg.requests_per_second;
            Arc::new(HttpBackend::new(hc).map_err(|e| CliError::Config(e.to_string()))?)
        }
    };
    let counter = Arc::new(CountingBackend::new(base));
    match &cfg.cache {
        Some(dir) => {
            let mode = if cfg.replay_only {
                CacheMode::ReplayOnly
            } else {
                CacheMode::ReadWrite
            };
            let cached = Arc::new(CachedBackend::new(counter.clone(), dir, mode));
            Ok(Backends {
                top: cached.clone(),
                counter: Some(counter),
                cache: Some(cached),
            })
        }
        None => Ok(Backends {
            top: counter.clone(),
            counter: Some(counter),
            cache: None,
        }),
    }
}

fn build_news(cfg: &RunConfig) -> Result<(HackerNewsClient, NytClient), CliError> {
    let transport = Arc::new(
        ReqwestTransport::new(Duration::from_secs(10)).map_err(|e| CliError::Config(e.to_string()))?,
    );
    let mut hn = HackerNewsClient::new(transport.clone());
    let mut nyt = NytClient::new(transport, cfg.nyt_api_key.clone());
    if let Some(e) = &cfg.hn_endpoint {
        hn = hn.with_endpoint(e.clone());
    }
    if let Some(e) = &cfg.nyt_endpoint {
        nyt = nyt.with_endpoint(e.clone());
    }
    let news_cache_dir = match (&cfg.backend, &cfg.cache) {
        (BackendChoice::Replay(dir), _) => Some((dir.join("news"), true)),
        (_, Some(dir)) => Some((dir.join("news"), cfg.replay_only)),
        _ => None,
    };
    if let Some((dir, replay_only)) = news_cache_dir {
        hn = hn.with_cache(NewsCache::new(&dir, replay_only));
        nyt = nyt.with_cache(NewsCache::new(&dir, replay_only));
    }
    Ok((hn, nyt))
}

/// File-system-safe trace name for an event id.
fn trace_file_name(event_id: &str) -> String {
    let safe: String = event_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    format!("{safe}.json")
}

fn write_trace(dir: &Path, trace: &ChainTrace) -> anyhow::Result<()> {
    let path = dir.join(&trace.strategy).join(trace_file_name(&trace.event_id));
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(&path, trace.to_json_pretty()).with_context(|| format!("writing {}", path.display()))
}

/// Forecasts every event active on the configured date. Writes the
/// forecast file (input order) and, if configured, one trace per event.
/// Per-event failures are collected, not fatal.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunSummary, CliError> {
    let split = load_events(&cfg.events).map_err(|e| CliError::Config(format!("{e:#}")))?;
    let events: Vec<&Event> = active_events(&split, cfg.date);
    if events.is_empty() {
        log::warn!("no events are active on {}", cfg.date);
    }
    let backends = build_backend(cfg)?;
    let news = if cfg.strategy.id == StrategyId::News {
        Some(build_news(cfg)?)
    } else {
        None
    };
    let sources = news.as_ref().map(|(hn, nyt)| NewsSources {
        hackernews: hn,
        nyt,
    });

    let results: Vec<Mutex<Option<Result<ChainTrace, crate::strategies::ChainError>>>> =
        events.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = cfg.workers.min(events.len()).max(1);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(event) = events.get(i) else { break };
                let r = cfg.strategy.run(backends.top.as_ref(), sources, event, cfg.date);
                *results[i].lock().expect("result slot") = Some(r);
            });
        }
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for slot in results {
        let r = slot.into_inner().expect("result slot").expect("every event ran");
        let trace = match r {
            Ok(t) => {
                records.push(ForecastRecord {
                    event_id: t.event_id.clone(),
                    strategy: t.strategy.clone(),
                    prediction_date: t.prediction_date,
                    probability: t.final_probability.expect("completed trace has a probability"),
                    samples: t.final_samples.clone(),
                    trace_ref: cfg
                        .traces
                        .as_ref()
                        .map(|_| format!("{}/{}", t.strategy, trace_file_name(&t.event_id))),
                });
                t
            }
            Err(e) => {
                log::error!("{e}");
                failures.push((e.event_id.clone(), e.failure.to_string()));
                *e.partial
            }
        };
        if let Some(dir) = &cfg.traces {
            write_trace(dir, &trace)?;
        }
    }

    if let Some(parent) = cfg.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(&cfg.out, forecasts_to_jsonl(&records))
        .with_context(|| format!("writing {}", cfg.out.display()))?;

    let news_calls = news
        .as_ref()
        .map(|(hn, nyt)| hn.network_calls() + nyt.network_calls())
        .unwrap_or(0);
    Ok(RunSummary {
        strategy: cfg.strategy.id,
        active_events: events.len(),
        forecasts_written: records.len(),
        failures,
        backend_calls: backends.counter.as_ref().map(|c| c.calls()).unwrap_or(0),
        cache_hits: backends.cache.as_ref().map(|c| c.hits()).unwrap_or(0),
        cache_misses: backends.cache.as_ref().map(|c| c.misses()).unwrap_or(0),
        news_network_calls: news_calls,
        out: cfg.out.clone(),
        traces: cfg.traces.clone(),
    })
}
