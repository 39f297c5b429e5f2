//! One Basic forecast against a scripted backend, with its trace.
//!
//!     cargo run --example basic_forecast

use foresight::cli::load_events;
use foresight::llm::ScriptedMock;
use foresight::strategies::run_basic;

fn main() -> anyhow::Result<()> {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let split = load_events(&root.join("fixtures/val.jsonl"))?;
    let event = split.event("fed-75bp").expect("fixture event");
    let backend = ScriptedMock::from_file(&root.join("fixtures/mock.rules")).map_err(anyhow::Error::msg)?;

    let trace = run_basic(&backend, event, "2022-08-01".parse()?)?;
    println!("{}\n", trace.final_prompt().unwrap_or_default());
    for s in trace.llm_steps() {
        println!("step {}: {} samples {:?}", s.step_id, s.responses.len(), s.responses);
    }
    println!("p = {:.4}", trace.final_probability.unwrap_or(f64::NAN));
    Ok(())
}
