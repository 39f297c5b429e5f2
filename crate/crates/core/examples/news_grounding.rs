//! The news strategy against a recorded Hacker News reply, served by a
//! canned transport. Headlines dated after the prediction date are dropped
//! before any prompt sees them.
//!
//!     cargo run --example news_grounding

use std::sync::Arc;

use foresight::cli::load_events;
use foresight::llm::ScriptedMock;
use foresight::news::{HackerNewsClient, HttpReply, NewsError, NytClient, Transport};
use foresight::strategies::run_news;

struct Recorded {
    hn: String,
}

impl Transport for Recorded {
    fn get(&self, url: &str, _query: &[(String, String)]) -> Result<HttpReply, NewsError> {
        let body = if url.contains("search_by_date") {
            self.hn.clone()
        } else {
            r#"{"status":"OK","response":{"docs":[{"headline":{"main":"Regulators question driver-assistance claims"},"pub_date":"2022-07-29T08:00:00+0000"}]}}"#.into()
        };
        Ok(HttpReply { status: 200, body })
    }
}

fn main() -> anyhow::Result<()> {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let transport = Arc::new(Recorded {
        hn: std::fs::read_to_string(root.join("fixtures/hn_tesla_autonomy_driving.json"))?,
    });
    let hn = HackerNewsClient::new(transport.clone());
    let nyt = NytClient::new(transport, Some("demo-key".into()));

    let split = load_events(&root.join("fixtures/val.jsonl"))?;
    let event = split.event("tesla-l3").expect("fixture event");
    let backend = ScriptedMock::from_file(&root.join("fixtures/mock.rules")).map_err(anyhow::Error::msg)?;

    let trace = run_news(&backend, &hn, &nyt, event, "2022-08-01".parse()?, 3)?;
    for s in &trace.steps {
        println!("== {} {:?}", s.step_id, s.warnings);
    }
    println!("\n{}", trace.final_prompt().unwrap_or_default());
    println!("\np = {:.4}", trace.final_probability.unwrap_or(f64::NAN));
    Ok(())
}
