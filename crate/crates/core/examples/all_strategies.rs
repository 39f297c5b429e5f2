//! Every strategy on one event. News queries go to stub sources.
//!
//!     cargo run --example all_strategies

use foresight::cli::load_events;
use foresight::llm::ScriptedMock;
use foresight::news::{Headline, HeadlineSource, NewsError, QueryWindow, Source};
use foresight::strategies::{NewsSources, StrategyId, StrategySpec};

/// Fixed headlines, one of them from after the prediction date.
struct Canned(Source);

impl HeadlineSource for Canned {
    fn source(&self) -> Source {
        self.0
    }

    fn query(&self, q: &QueryWindow) -> Result<Vec<Headline>, NewsError> {
        let h = |d: &str, t: &str| Headline {
            source: self.0,
            date: d.parse().unwrap(),
            title: t.into(),
            url: None,
        };
        let all = vec![
            h("2022-07-29", "Fed officials signal another large hike"),
            h("2022-08-10", "Inflation cools in July"),
        ];
        Ok(foresight::news::bound_headlines(all, q.until, q.max_results))
    }
}

fn main() -> anyhow::Result<()> {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let split = load_events(&root.join("fixtures/val.jsonl"))?;
    let event = split.event("fed-75bp").expect("fixture event");
    let backend = ScriptedMock::from_file(&root.join("fixtures/mock.rules")).map_err(anyhow::Error::msg)?;
    let (hn, nyt) = (Canned(Source::HackerNews), Canned(Source::Nyt));
    let news = NewsSources {
        hackernews: &hn,
        nyt: &nyt,
    };

    for id in StrategyId::ALL {
        let trace = StrategySpec::new(id).run(&backend, Some(news), event, "2022-08-01".parse()?)?;
        let steps: Vec<&str> = trace.steps.iter().map(|s| s.step_id.as_str()).collect();
        println!(
            "{:<22} p={:.4}  steps: {}",
            id.as_str(),
            trace.final_probability.unwrap_or(f64::NAN),
            steps.join(" > ")
        );
    }
    Ok(())
}
