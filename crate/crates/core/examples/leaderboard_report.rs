//! Leaderboard and accuracy trace of a search ledger.
//!
//! `cargo run --example leaderboard_report -- [ledger.ndjson] [top]`
//! Without a ledger, one holding the top five published configurations
//! among weaker filler iterations is built in memory.

use std::error::Error;

use eegline::hyperopt::{
    accuracy_trace, leaderboard, render_leaderboard, trace_csv, Ledger, LedgerHeader, SearchSpace, TrialRecord,
    TrialStatus,
};
use eegline::nn::ModelConfig;

const PUBLISHED: [(&str, f64); 5] = [
    ("conv(61,5x5), conv(69,8x8), pool(5x5,2)", 0.634),
    ("conv(210,5x5), fc(828), dropout(0.71), fc(18)", 0.6223),
    ("fc(2266)", 0.622),
    ("fc(664), fc(1025)", 0.62),
    ("pool(4x4, 2), conv(247,11x11)", 0.619),
];

fn demo_ledger() -> Result<Ledger, Box<dyn Error>> {
    let mut ledger = Ledger::new(LedgerHeader {
        search_id: "published".into(),
        base_seed: 0,
        space: SearchSpace::default(),
        settings: serde_json::Value::Null,
    });
    let filler = ModelConfig::parse_layers("fc(32)", 0.001)?;
    for i in 0..20 {
        let (config, accuracy) = match i % 4 {
            1 => (ModelConfig::parse_layers(PUBLISHED[(i / 4) % 5].0, 0.001)?, PUBLISHED[(i / 4) % 5].1),
            _ => (filler.clone(), 0.5 + (i % 7) as f64 * 0.01),
        };
        ledger.records.push(TrialRecord {
            iteration: i + 1,
            config,
            status: TrialStatus::Feasible,
            accuracy,
            wall_time: 0.0,
            seed: i as u64 + 1,
            reason: None,
            best_epoch: None,
        });
    }
    Ok(ledger)
}

fn main() -> Result<(), Box<dyn Error>> {
    let mut args = std::env::args().skip(1);
    let ledger = match args.next() {
        Some(path) => Ledger::load(path.as_ref())?,
        None => demo_ledger()?,
    };
    let top = args.next().map(|k| k.parse()).transpose()?.unwrap_or(5);
    print!("{}", render_leaderboard(&leaderboard(&ledger, top)?));
    println!();
    print!("{}", trace_csv(&accuracy_trace(&ledger)));
    Ok(())
}
