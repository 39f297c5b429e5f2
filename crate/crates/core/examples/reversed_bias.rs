//! Forward vs reworded-opposite forecasts over the fixture split, then the
//! coherence report. A coherent forecaster sums to 1.
//!
//!     cargo run --example reversed_bias

use foresight::cli::{cmd_bias, cmd_run, BackendChoice, BiasConfig, RunConfig};
use foresight::strategies::StrategyId;

fn main() -> anyhow::Result<()> {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir()?;
    let mock = BackendChoice::Mock(root.join("fixtures/mock.rules"));
    let events = root.join("fixtures/val.jsonl");
    let date = "2022-08-01".parse()?;

    for (id, name) in [(StrategyId::Basic, "forward"), (StrategyId::Reversed, "reversed")] {
        let cfg = RunConfig::new(&events, date, id, mock.clone(), dir.path().join(format!("{name}.jsonl")));
        eprintln!("{}", cmd_run(&cfg)?.describe());
    }
    let report = cmd_bias(&BiasConfig {
        forward: dir.path().join("forward.jsonl"),
        reversed: dir.path().join("reversed.jsonl"),
        events: Some(events),
    })?;
    print!("{}", report.render());
    Ok(())
}
