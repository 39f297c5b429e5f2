//! Brier / Weighted Brier table for two strategies next to the market.
//!
//!     cargo run --example score_forecasts

use foresight::cli::{cmd_score, ScoreConfig};

fn main() -> anyhow::Result<()> {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let out = cmd_score(&ScoreConfig {
        events: root.join("fixtures/val.jsonl"),
        forecasts: vec![root.join("fixtures/forecasts.jsonl")],
        from_market: true,
        date: Some("2022-08-01".parse()?),
    })?;
    print!("{}", out.markdown);
    Ok(())
}
