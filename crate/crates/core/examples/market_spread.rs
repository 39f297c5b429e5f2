//! Active events on a date and the market's point estimate for each.
//!
//!     cargo run --example market_spread

use foresight::cli::load_events;
use foresight::events::{active_events, market_point_prediction};

fn main() -> anyhow::Result<()> {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let split = load_events(&root.join("fixtures/three_events.jsonl"))?;
    let on = "2022-08-01".parse()?;
    println!("{} events, {} snapshots", split.events.len(), split.snapshots.len());
    for e in active_events(&split, on) {
        match split.snapshot_on(&e.id, on) {
            Some(s) => println!(
                "{}: spread [{}, {}] -> {:.3}",
                e.id,
                s.lower,
                s.upper,
                market_point_prediction(s)
            ),
            None => println!("{}: no snapshot on {on}", e.id),
        }
    }
    Ok(())
}
