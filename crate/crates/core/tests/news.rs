mod common;

use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{Days, NaiveDate};
use foresight::news::{
    HackerNewsClient, HeadlineSource, NewsCache, NewsError, NytClient, QueryWindow, ReqwestTransport, RetryPolicy,
};
use proptest::prelude::*;

use common::{dated_titles, nyt_body, query_param, StubServer};

fn transport() -> Arc<ReqwestTransport> {
    Arc::new(ReqwestTransport::new(Duration::from_secs(5)).unwrap())
}

fn tesla_window() -> QueryWindow {
    QueryWindow::new(
        vec!["Tesla".into(), "Autonomy".into(), "Driving".into()],
        common::prediction_date(),
    )
}

#[test]
fn recorded_hn_response_yields_seven_headlines() {
    let recorded = std::fs::read_to_string(common::fixture("hn_tesla_autonomy_driving.json")).unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    let server = StubServer::start(move |path, q| {
        log.lock().unwrap().push((path.to_string(), q.to_vec()));
        (200, recorded.clone())
    });
    let client = HackerNewsClient::new(transport()).with_endpoint(&server.base);
    let hs = client.query(&tesla_window()).unwrap();

    // 10 recorded hits: two dated after 2022-08-01 and one exact duplicate
    assert_eq!(hs.len(), 7);
    assert_eq!(hs[0].title, "Tesla Autonomy Day, three years later");
    assert!(hs.windows(2).all(|w| w[0].date >= w[1].date));
    assert!(hs.iter().all(|h| h.date <= common::prediction_date()));

    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 1);
    let (path, q) = &seen[0];
    assert_eq!(path, "/search_by_date");
    assert_eq!(query_param(q, "query"), Some("Tesla Autonomy Driving"));
    assert_eq!(query_param(q, "tags"), Some("story"));
    assert_eq!(query_param(q, "numericFilters"), Some("created_at_i<1659398400"));
}

#[test]
fn nyt_sends_key_and_end_date() {
    let server = StubServer::start(|path, q| {
        assert_eq!(path, "/svc/search/v2/articlesearch.json");
        if query_param(q, "api-key") != Some("secret") {
            return (401, r#"{"fault":"invalid key"}"#.into());
        }
        assert_eq!(query_param(q, "end_date"), Some("20220801"));
        assert_eq!(query_param(q, "sort"), Some("newest"));
        let d: NaiveDate = "2022-07-30".parse().unwrap();
        (200, nyt_body(&[(d, "Tesla's claims draw scrutiny".into())]))
    });
    let good = NytClient::new(transport(), Some("secret".into())).with_endpoint(&server.base);
    let hs = good.query(&tesla_window()).unwrap();
    assert_eq!(hs.len(), 1);
    assert_eq!(hs[0].title, "Tesla's claims draw scrutiny");

    let bad = NytClient::new(transport(), Some("wrong".into()))
        .with_endpoint(&server.base)
        .with_retry(RetryPolicy::none());
    assert_eq!(bad.query(&tesla_window()), Err(NewsError::UpstreamError(401)));
}

#[test]
fn server_errors_are_retried_then_reported() {
    let server = StubServer::start(|_, _| (503, String::new()));
    let client = HackerNewsClient::new(transport())
        .with_endpoint(&server.base)
        .with_retry(RetryPolicy {
            retries: 2,
            base_delay: Duration::from_millis(1),
        });
    assert_eq!(client.query(&tesla_window()), Err(NewsError::UpstreamError(503)));
    assert_eq!(client.network_calls(), 3);
    assert_eq!(server.hits(), 3);
}

#[test]
fn unreachable_endpoint_is_a_network_error() {
    let client = HackerNewsClient::new(transport())
        .with_endpoint("http://127.0.0.1:9")
        .with_retry(RetryPolicy::none());
    assert!(matches!(client.query(&tesla_window()), Err(NewsError::NetworkError(_))));
}

#[test]
fn cached_queries_skip_the_network() {
    let recorded = std::fs::read_to_string(common::fixture("hn_tesla_autonomy_driving.json")).unwrap();
    let server = StubServer::start(move |_, _| (200, recorded.clone()));
    let dir = tempfile::tempdir().unwrap();
    let cold = HackerNewsClient::new(transport())
        .with_endpoint(&server.base)
        .with_cache(NewsCache::new(dir.path(), false));
    let first = cold.query(&tesla_window()).unwrap();
    let warm = HackerNewsClient::new(transport())
        .with_endpoint(&server.base)
        .with_cache(NewsCache::new(dir.path(), true));
    assert_eq!(warm.query(&tesla_window()).unwrap(), first);
    assert_eq!(warm.network_calls(), 0);
    assert_eq!(server.hits(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn future_headlines_never_reach_a_prompt(
        day in 0u64..700,
        past in proptest::collection::vec((0u64..90, 0u32..1_000_000), 0..6),
        future in proptest::collection::vec((1u64..400, 0u32..1_000_000), 1..6),
        nyt_future in proptest::collection::vec((1u64..400, 0u32..1_000_000), 1..4),
    ) {
        static RIG: std::sync::OnceLock<common::LeakageRig> = std::sync::OnceLock::new();
        let rig = RIG.get_or_init(common::LeakageRig::start);
        let today = NaiveDate::from_ymd_opt(2022, 1, 1).unwrap() + Days::new(day);
        let mut hn = dated_titles(today, &future, "LEAK_HN", true);
        hn.extend(dated_titles(today, &past, "PAST_HN", false));
        let nyt = dated_titles(today, &nyt_future, "LEAK_NYT", true);
        if let Err(e) = rig.check(today, hn, nyt) {
            prop_assert!(false, "{}", e);
        }
    }
}
