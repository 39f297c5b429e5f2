//! Basic forecast against an OpenAI-compatible endpoint.
//!
//!     FORESIGHT_LLM_BASE_URL=... FORESIGHT_LLM_API_KEY=... \
//!         cargo run --example live_backend -- <model>
//!
//! Replies are cached under ./live-cache so reruns are free.

use std::sync::Arc;

use foresight::cli::load_events;
use foresight::llm::{CacheMode, CachedBackend, HttpBackend, HttpBackendConfig, ENV_BASE_URL};
use foresight::strategies::run_basic;

fn main() -> anyhow::Result<()> {
    let Some(model) = std::env::args().nth(1) else {
        eprintln!("usage: live_backend <model>  (needs {ENV_BASE_URL})");
        return Ok(());
    };
    let cfg = match HttpBackendConfig::from_env(model) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return Ok(());
        }
    };
    let backend = CachedBackend::new(Arc::new(HttpBackend::new(cfg)?), "live-cache", CacheMode::ReadWrite);

    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let split = load_events(&root.join("fixtures/val.jsonl"))?;
    let event = split.event("tesla-l3").expect("fixture event");
    let trace = run_basic(&backend, event, "2022-08-01".parse()?)?;
    println!("{}", trace.to_json_pretty());
    Ok(())
}
