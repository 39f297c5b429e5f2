#![allow(dead_code)]

use std::path::PathBuf;

use chrono::NaiveDate;
use foresight::events::{DatasetSplit, Event};
use foresight::prompts::{Bindings, RenderContext, TemplateRegistry};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

pub fn date(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

pub fn prediction_date() -> NaiveDate {
    date("2022-08-01")
}

pub fn val_split() -> DatasetSplit {
    foresight::cli::load_events(&fixture("val.jsonl")).unwrap()
}

/// The event every golden prompt is rendered for.
pub fn golden_event() -> Event {
    val_split().event("tesla-l3").unwrap().clone()
}

/// Stand-ins for the step outputs a template quotes.
pub fn step_values() -> Vec<(&'static str, &'static str)> {
    vec![
        ("base rate question", "How often has a carmaker shipped a promised autonomy level on schedule?"),
        ("base rate", "Roughly one promised autonomy feature in five has shipped on schedule."),
        ("pros", "Tesla has shipped beta software to a large fleet."),
        ("cons", "Regulators have not approved Level 3 operation in most states."),
        ("Opposite Event", "Tesla does not release a Level 3 autonomous driving feature to customers"),
        ("positive sequences", "Potential Sequence 1:\n1. Regulators approve Level 3\nOUTCOME ACHIEVED: Tesla ships Level 3"),
        ("negative sequences", "Potential Sequence 1:\n1. The release slips into 2023\nOUTCOME ACHIEVED: Tesla does not ship Level 3"),
        ("job", "an automotive safety engineer"),
        ("number of terms", "3"),
        ("Hackernews headlines", "2022-07-30: Tesla raises FSD price\n2022-07-28: Autonomy day recap"),
        ("filtered Hackernews headlines", "2022-07-30: Tesla raises FSD price"),
        ("NYT headlines", "2022-07-29: Tesla's driver-assistance claims draw scrutiny"),
        ("filtered NYT headlines", "Tesla's driver-assistance claims draw scrutiny"),
        ("summarized NYT headlines", "2022-07-29: Regulators question Tesla's driver-assistance marketing."),
        ("output", "Weighing both sides, I put this at 12%."),
    ]
}

pub fn golden_bindings(template_id: &str) -> Bindings {
    let event = golden_event();
    let mut ctx = RenderContext::new(&event, prediction_date()).unwrap();
    for (k, v) in step_values() {
        ctx = ctx.with(k, v);
    }
    let all = ctx.bindings().unwrap();
    let tpl = TemplateRegistry::builtin().get(template_id).unwrap();
    all.into_iter().filter(|(k, _)| tpl.placeholders.contains(k)).collect()
}

pub fn golden_path(template_id: &str) -> PathBuf {
    golden_dir().join(format!("{}.txt", template_id.replace('/', "__")))
}

/// Template ids whose rendering differs from the frozen file.
pub fn golden_mismatches() -> Vec<String> {
    let reg = TemplateRegistry::builtin();
    let mut bad = Vec::new();
    for id in reg.ids() {
        let rendered = reg.get(id).unwrap().render(&golden_bindings(id)).unwrap();
        let path = golden_path(id);
        if std::env::var_os("BLESS").is_some() {
            std::fs::write(&path, &rendered).unwrap();
            continue;
        }
        match std::fs::read_to_string(&path) {
            Ok(frozen) if frozen == rendered => {}
            _ => bad.push(id.to_string()),
        }
    }
    bad
}

pub type Handler = dyn Fn(&str, &[(String, String)]) -> (u16, String) + Send + Sync;

/// Tiny HTTP/1.1 server on a loopback port; one thread per connection.
/// Every request is passed to `handler` as (path, query pairs).
pub struct StubServer {
    pub base: String,
    pub hits: std::sync::Arc<std::sync::atomic::AtomicUsize>,
}

impl StubServer {
    pub fn start(handler: impl Fn(&str, &[(String, String)]) -> (u16, String) + Send + Sync + 'static) -> Self {
        use std::io::{BufRead, BufReader, Write};
        use std::sync::atomic::Ordering;
        use std::sync::Arc;

        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let handler: Arc<Handler> = Arc::new(handler);
        let hits = Arc::new(std::sync::atomic::AtomicUsize::new(0));
        let counter = hits.clone();
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let handler = handler.clone();
                let counter = counter.clone();
                std::thread::spawn(move || {
                    let mut reader = BufReader::new(stream.try_clone().unwrap());
                    let mut request_line = String::new();
                    if reader.read_line(&mut request_line).is_err() {
                        return;
                    }
                    loop {
                        let mut line = String::new();
                        if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                            break;
                        }
                    }
                    counter.fetch_add(1, Ordering::SeqCst);
                    let target = request_line.split_whitespace().nth(1).unwrap_or("/");
                    let url = reqwest::Url::parse(&format!("http://stub{target}")).unwrap();
                    let query: Vec<(String, String)> = url.query_pairs().into_owned().collect();
                    let (status, body) = handler(url.path(), &query);
                    let reply = format!(
                        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                        body.len()
                    );
                    let _ = stream.write_all(reply.as_bytes());
                });
            }
        });
        StubServer { base, hits }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(std::sync::atomic::Ordering::SeqCst)
    }
}

pub fn query_param<'a>(query: &'a [(String, String)], key: &str) -> Option<&'a str> {
    query.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

/// Algolia-shaped page.
pub fn hn_body(hits: &[(NaiveDate, String)]) -> String {
    let hits: Vec<serde_json::Value> = hits
        .iter()
        .map(|(d, t)| serde_json::json!({"title": t, "created_at": format!("{d}T12:00:00.000Z"), "url": null}))
        .collect();
    serde_json::json!({"hits": hits, "nbPages": 1}).to_string()
}

/// Article-search-shaped page.
pub fn nyt_body(docs: &[(NaiveDate, String)]) -> String {
    let docs: Vec<serde_json::Value> = docs
        .iter()
        .map(|(d, t)| serde_json::json!({"headline": {"main": t}, "pub_date": format!("{d}T08:00:00+0000"), "web_url": "https://example.com"}))
        .collect();
    serde_json::json!({"status": "OK", "response": {"docs": docs}}).to_string()
}

/// News stubs serving a fixed mix of past and future headlines.
pub struct NewsStubs {
    pub hn: StubServer,
    pub nyt: StubServer,
}

impl NewsStubs {
    pub fn start() -> Self {
        let d = |s: &str| -> NaiveDate { s.parse().unwrap() };
        let hn_items = vec![
            (d("2022-07-30"), "Tesla raises the price of FSD".to_string()),
            (d("2022-07-22"), "Karpathy leaves Tesla".to_string()),
            (d("2022-08-05"), "Headline from the future".to_string()),
        ];
        let nyt_items = vec![
            (d("2022-07-29"), "Regulators question driver-assistance claims".to_string()),
            (d("2022-09-01"), "Another headline from the future".to_string()),
        ];
        NewsStubs {
            hn: StubServer::start(move |_, _| (200, hn_body(&hn_items))),
            nyt: StubServer::start(move |_, _| (200, nyt_body(&nyt_items))),
        }
    }

    pub fn hits(&self) -> usize {
        self.hn.hits() + self.nyt.hits()
    }
}

/// A `run` over val.jsonl with the scripted mock, writing to `dir`.
pub fn mock_run_config(
    strategy: foresight::strategies::StrategyId,
    dir: &std::path::Path,
    news: &NewsStubs,
) -> foresight::cli::RunConfig {
    let mut cfg = foresight::cli::RunConfig::new(
        fixture("val.jsonl"),
        prediction_date(),
        strategy,
        foresight::cli::BackendChoice::Mock(fixture("mock.rules")),
        dir.join(format!("{}.jsonl", strategy.as_str())),
    );
    cfg.traces = Some(dir.join("traces"));
    cfg.hn_endpoint = Some(news.hn.base.clone());
    cfg.nyt_endpoint = Some(news.nyt.base.clone());
    cfg.nyt_api_key = Some("test-key".into());
    cfg
}

/// Every file under `root`, keyed by relative path.
pub fn read_tree(root: &std::path::Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    let mut out = std::collections::BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// Replies and the probability the deterministic parser must read from
/// them (`None`: no usable number).
pub fn parse_cases() -> Vec<(&'static str, Option<f64>)> {
    vec![
        // percentages
        ("35%", Some(0.35)),
        ("The probability is 35%.", Some(0.35)),
        ("I put this at 7 %", Some(0.07)),
        ("Roughly 12.5% overall.", Some(0.125)),
        ("100%", Some(1.0)),
        ("0%", Some(0.0)),
        ("about 40 percent", Some(0.4)),
        ("Final answer: 5%.", Some(0.05)),
        // unit interval
        ("0.35", Some(0.35)),
        ("Probability: 0.8", Some(0.8)),
        (".25", Some(0.25)),
        ("I estimate 0.7 likelihood.", Some(0.7)),
        ("1", Some(1.0)),
        ("0", Some(0.0)),
        ("My forecast is 0.05 given the short window.", Some(0.05)),
        // last one wins
        ("could be 10%... but final answer: 5%", Some(0.05)),
        ("Ever: 0.6. In the window: 0.2.", Some(0.2)),
        ("Earlier I said 70%, on reflection 0.45", Some(0.45)),
        ("Between 20% and 30%, so 25%.", Some(0.25)),
        ("0.9 at first, then 15% after the news", Some(0.15)),
        ("Base rate 1 in 5; adjusted to 0.3", Some(0.3)),
        ("As of 2022-08-01 the chance is 40%", Some(0.4)),
        ("Within the next 30 days: 0.1", Some(0.1)),
        // nothing usable
        ("no numbers here", None),
        ("", None),
        ("NONE", None),
        ("Currently the date is 2022-08-01.", None),
        ("in the next 152 days", None),
        ("L3 autonomy by 2023", None),
        ("1. Joe Biden decides\n2. Kamala wins", None),
    ]
}

/// Adversarial news servers whose feed is swapped per case, plus a mock
/// that copies every headline it is shown into its reply, so a leaked
/// title would reach the final prompt.
pub struct LeakageRig {
    hn_feed: std::sync::Arc<std::sync::Mutex<Vec<(NaiveDate, String)>>>,
    nyt_feed: std::sync::Arc<std::sync::Mutex<Vec<(NaiveDate, String)>>>,
    hn: StubServer,
    nyt: StubServer,
    mock: foresight::llm::ScriptedMock,
}

impl LeakageRig {
    pub fn start() -> Self {
        use foresight::llm::{MockRule, ScriptedMock};
        use std::sync::{Arc, Mutex};

        let hn_feed: Arc<Mutex<Vec<(NaiveDate, String)>>> = Arc::default();
        let nyt_feed: Arc<Mutex<Vec<(NaiveDate, String)>>> = Arc::default();
        let (hf, nf) = (hn_feed.clone(), nyt_feed.clone());
        let echo = |intro: &str| MockRule::regex(&format!("(?s)^({intro}.*)$"), "$1").unwrap();
        let mock = ScriptedMock::new(vec![
            MockRule::contains("What are the primary entities", "Tesla\n*Autonomy\n*Driving"),
            echo("You are examining some newspaper headlines to try to predict"),
            echo("You are examining some newspaper headlines to try to gather"),
            echo("Read through each of the headlines and paraphrase"),
            MockRule::any("30%"),
        ])
        .echo_extraction();
        LeakageRig {
            hn: StubServer::start(move |_, _| (200, hn_body(&hf.lock().unwrap()))),
            nyt: StubServer::start(move |_, _| (200, nyt_body(&nf.lock().unwrap()))),
            hn_feed,
            nyt_feed,
            mock,
        }
    }

    /// Serves the given feeds, runs the news strategy on `today`, and
    /// checks that no headline dated after `today` appears in any prompt
    /// or reply while every earlier HN headline reaches the final prompt.
    pub fn check(
        &self,
        today: NaiveDate,
        hn_items: Vec<(NaiveDate, String)>,
        nyt_items: Vec<(NaiveDate, String)>,
    ) -> Result<(), String> {
        use foresight::news::{HackerNewsClient, NytClient, ReqwestTransport};

        let leaked: Vec<String> = hn_items
            .iter()
            .chain(&nyt_items)
            .filter(|(d, _)| *d > today)
            .map(|(_, t)| t.clone())
            .collect();
        let kept: Vec<String> = hn_items.iter().filter(|(d, _)| *d <= today).map(|(_, t)| t.clone()).collect();
        *self.hn_feed.lock().unwrap() = hn_items;
        *self.nyt_feed.lock().unwrap() = nyt_items;

        let transport = std::sync::Arc::new(ReqwestTransport::new(std::time::Duration::from_secs(5)).unwrap());
        let hn = HackerNewsClient::new(transport.clone()).with_endpoint(&self.hn.base);
        let nyt = NytClient::new(transport, Some("k".into())).with_endpoint(&self.nyt.base);
        let mut event = golden_event();
        event.created = "2022-01-01".parse().unwrap();
        event.expires = "2023-12-31".parse().unwrap();
        event.resolved_at = None;
        event.resolution = foresight::events::Resolution::Unresolved;

        let trace = foresight::strategies::run_news(&self.mock, &hn, &nyt, &event, today, 3)
            .map_err(|e| e.to_string())?;
        for step in &trace.steps {
            for text in std::iter::once(&step.prompt).chain(&step.responses) {
                if let Some(t) = leaked.iter().find(|t| text.contains(t.as_str())) {
                    return Err(format!("{t} leaked into step {} on {today}", step.step_id));
                }
            }
        }
        let final_prompt = trace.final_prompt().ok_or("no final prompt")?;
        match kept.iter().find(|t| !final_prompt.contains(t.as_str())) {
            Some(t) => Err(format!("{t} should have reached the final prompt")),
            None => Ok(()),
        }
    }
}

/// Headlines `tag_<i>_<n>` dated `offset` days after (or before) `today`.
pub fn dated_titles(today: NaiveDate, items: &[(u64, u32)], tag: &str, after: bool) -> Vec<(NaiveDate, String)> {
    items
        .iter()
        .enumerate()
        .map(|(i, (off, n))| {
            let days = chrono::Days::new(*off);
            let d = if after { today + days } else { today - days };
            (d, format!("{tag}_{i}_{n:07}_Z"))
        })
        .collect()
}
