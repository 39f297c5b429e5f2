//! Record completions once, then serve them from disk with no backend.
//!
//!     cargo run --example record_replay

use std::sync::Arc;

use foresight::cli::load_events;
use foresight::llm::{CacheMode, CachedBackend, ScriptedMock};
use foresight::strategies::run_both_sides;

fn main() -> anyhow::Result<()> {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let split = load_events(&root.join("fixtures/val.jsonl"))?;
    let event = split.event("artemis-launch").expect("fixture event");
    let today = "2022-08-01".parse()?;
    let cache_dir = tempfile::tempdir()?;

    let mock = Arc::new(ScriptedMock::from_file(&root.join("fixtures/mock.rules")).map_err(anyhow::Error::msg)?);
    let recording = CachedBackend::new(mock.clone(), cache_dir.path(), CacheMode::ReadWrite);
    let first = run_both_sides(&recording, event, today)?;
    println!("recorded: {} backend calls, {} cache entries written", mock.calls(), recording.misses());

    let replay = CachedBackend::replay(cache_dir.path())?;
    let second = run_both_sides(&replay, event, today)?;
    println!("replayed: {} hits, {} misses", replay.hits(), replay.misses());
    assert_eq!(first.to_json_pretty(), second.to_json_pretty());
    println!("traces identical, p = {:.4}", second.final_probability.unwrap_or(f64::NAN));
    Ok(())
}
