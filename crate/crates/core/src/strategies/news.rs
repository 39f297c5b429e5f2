use chrono::NaiveDate;

use crate::events::Event;
use crate::llm::Backend;
use crate::news::{bound_headlines, format_headlines, Headline, HeadlineSource, QueryWindow};
use crate::prompts::TemplateRegistry;

use super::chain::Chain;
use super::{ChainError, ChainFailure, ChainOptions, ChainTrace, NewsSources, Parsed, StepRecord, StrategyId};

/// Search keywords from a reply to the keywords prompt. The prompt ends
/// with an open `*` bullet, so the reply's first line continues it.
pub fn parse_keywords(reply: &str, max: usize) -> Vec<String> {
    let text = format!("*{reply}");
    text.lines()
        .map(str::trim)
        .filter(|l| l.starts_with('*'))
        .map(|l| l.trim_start_matches('*').trim().to_string())
        .filter(|k| !k.is_empty())
        .take(max)
        .collect()
}

/// Keywords, dated headlines from both sources (never after `today`),
/// LLM filtering and summarizing, then a prediction grounded on them.
pub fn run_news(
    backend: &dyn Backend,
    hn_client: &dyn HeadlineSource,
    nyt_client: &dyn HeadlineSource,
    event: &Event,
    today: NaiveDate,
    keyword_count: u32,
) -> Result<ChainTrace, ChainError> {
    let src = NewsSources {
        hackernews: hn_client,
        nyt: nyt_client,
    };
    news(backend, ChainOptions::default(), src, event, today, keyword_count)
}

fn is_none_reply(reply: &str) -> bool {
    reply.trim().trim_end_matches('.').eq_ignore_ascii_case("none")
}

pub(super) fn news(
    b: &dyn Backend,
    o: ChainOptions,
    src: NewsSources<'_>,
    e: &Event,
    d: NaiveDate,
    keyword_count: u32,
) -> Result<ChainTrace, ChainError> {
    let id = StrategyId::News;
    Chain::start(id, b, o, e, d)?.run(id, |c| {
        let n = keyword_count.to_string();
        let p = c.prepare("keywords", "news/keywords", &[("number of terms", &n)])?;
        let reply = c.text_step(p, 1)?.into_iter().next().unwrap_or_default();
        let keywords = parse_keywords(&reply, keyword_count as usize);
        c.annotate(Parsed::List(keywords.clone()), Vec::new());
        if keywords.is_empty() {
            return Err(ChainFailure::KeywordParse);
        }

        let window = QueryWindow::new(keywords, c.today);
        let (hn, nyt) = query_both(c, src, &window);

        let none_text = TemplateRegistry::builtin()
            .get("news/no_headlines")
            .expect("builtin")
            .body
            .clone();

        let hn_section = if hn.is_empty() {
            none_text.clone()
        } else {
            let listed = format_headlines(&hn);
            let p = c.prepare("hn_filter", "news/hn_filter", &[("Hackernews headlines", &listed)])?;
            let filtered = first(c.text_step(p, 1)?);
            if is_none_reply(&filtered) {
                none_text.clone()
            } else {
                filtered
            }
        };

        let nyt_section = if nyt.is_empty() {
            none_text.clone()
        } else {
            let listed = format_headlines(&nyt);
            let p = c.prepare("nyt_extract", "news/nyt_extract", &[("NYT headlines", &listed)])?;
            let extracted = first(c.text_step(p, 1)?);
            if is_none_reply(&extracted) {
                none_text.clone()
            } else {
                let p = c.prepare(
                    "nyt_paraphrase",
                    "news/nyt_paraphrase",
                    &[("filtered NYT headlines", &extracted)],
                )?;
                let para = first(c.text_step(p, 1)?);
                if is_none_reply(&para) {
                    none_text.clone()
                } else {
                    para
                }
            }
        };

        let p = c.prepare(
            "predict",
            "news/predict",
            &[
                ("filtered Hackernews headlines", &hn_section),
                ("summarized NYT headlines", &nyt_section),
            ],
        )?;
        c.predict_step(p)
    })
}

fn first(texts: Vec<String>) -> String {
    texts.into_iter().next().unwrap_or_default().trim().to_string()
}

/// Queries both sources concurrently and records one data step per source.
/// A failing source contributes no headlines and a warning.
fn query_both(c: &mut Chain<'_>, src: NewsSources<'_>, q: &QueryWindow) -> (Vec<Headline>, Vec<Headline>) {
    let (hn, nyt) = std::thread::scope(|s| {
        let hn = s.spawn(|| src.hackernews.query(q));
        let nyt = s.spawn(|| src.nyt.query(q));
        (
            hn.join().expect("news query thread panicked"),
            nyt.join().expect("news query thread panicked"),
        )
    });
    let mut out = Vec::with_capacity(2);
    for (name, result) in [("hackernews", hn), ("nyt", nyt)] {
        let (hs, warnings) = match result {
            // re-bound whatever the source returned; this is the last gate
            // before headlines reach a prompt
            Ok(hs) => (bound_headlines(hs, q.until, q.max_results), Vec::new()),
            Err(err) => {
                log::warn!("{}: {name} query failed: {err}", c.event.id);
                (Vec::new(), vec![format!("{name} query failed: {err}")])
            }
        };
        let mut step = StepRecord::data(format!("query/{name}"), Parsed::Headlines(hs.clone()));
        step.warnings = warnings;
        c.push_data(step);
        out.push(hs);
    }
    let nyt = out.pop().expect("two sources");
    let hn = out.pop().expect("two sources");
    (hn, nyt)
}
