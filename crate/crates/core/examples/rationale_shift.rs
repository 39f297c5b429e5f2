//! How much asking for a rationale first moves each forecast.
//!
//!     cargo run --example rationale_shift

use foresight::cli::{cmd_rationale, cmd_run, BackendChoice, RationaleConfig, RunConfig};
use foresight::strategies::StrategyId;

fn main() -> anyhow::Result<()> {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir()?;
    let mock = BackendChoice::Mock(root.join("fixtures/mock.rules"));
    let events = root.join("fixtures/val.jsonl");
    let date = "2022-08-01".parse()?;
    let just = dir.path().join("just.jsonl");
    let rationale = dir.path().join("rationale.jsonl");

    cmd_run(&RunConfig::new(&events, date, StrategyId::Basic, mock.clone(), &just))?;
    cmd_run(&RunConfig::new(&events, date, StrategyId::BasicWithRationale, mock, &rationale))?;
    let report = cmd_rationale(&RationaleConfig { just, rationale })?;
    print!("{}\n{}", report.csv, report.summary());
    Ok(())
}
