//! Random architecture search on a synthetic corpus with a resumable
//! ledger. Stops after half the budget, resumes, and prints the leaderboard.
//!
//! `cargo run --release --example random_search -- [budget]`

use std::error::Error;
use std::sync::atomic::{AtomicBool, Ordering};

use eegline::hyperopt::{
    leaderboard, render_leaderboard, run_search, LayerKind, SearchControl, SearchOptions, SearchSpace, TrialRecord,
};
use eegline::nn::TrainSettings;
use eegline::pipeline::prepare_split;
use eegline::synth::{write_corpus, SynthSpec};

fn main() -> Result<(), Box<dyn Error>> {
    let budget: usize = std::env::args().nth(1).map(|b| b.parse()).transpose()?.unwrap_or(8);
    let dir = tempfile::tempdir()?;
    write_corpus(&SynthSpec { subjects: 4, ..Default::default() }, &dir.path().join("edf"))?;
    let (_, train_set, test_set) = prepare_split(&dir.path().join("edf"), &dir.path().join("f.eegt"), 0.7, 1)?;

    // the default space allows networks far too large for a quick demo
    let space = SearchSpace {
        num_layers: [1, 3],
        layer_type_choices: vec![LayerKind::Conv, LayerKind::Pool, LayerKind::Fc, LayerKind::Dropout],
        filters: [1, 4],
        filter_size: [1, 5],
        pool_size: [2, 5],
        pool_stride: [2, 4],
        fc_units: [2, 32],
        keep_prob: [0.5, 0.95],
        learning_rate: [0.001, 0.03],
    };
    let options = SearchOptions {
        train: TrainSettings { epochs: 4, batch_size: 16, seed: 0, normalize: true },
        max_parameters: Some(2_000_000),
        ..SearchOptions::new("demo", 42, budget)
    };
    let ledger_path = dir.path().join("demo.ndjson");

    let cancel = AtomicBool::new(false);
    let mut print = |r: &TrialRecord| {
        println!(
            "{:>3} {:?} {:.3} {:>5.1}s {}{}",
            r.iteration,
            r.status,
            r.accuracy,
            r.wall_time,
            r.config.render(),
            r.reason.as_deref().map(|s| format!("  ({s})")).unwrap_or_default()
        );
        if r.iteration == budget / 2 {
            cancel.store(true, Ordering::SeqCst);
        }
    };
    let control = SearchControl { cancel: Some(&cancel), on_record: Some(&mut print) };
    let partial = run_search(&space, &train_set, &test_set, &options, &ledger_path, control)?;
    println!("-- stopped after {} iterations, resuming", partial.records.len());

    let mut print = |r: &TrialRecord| println!("{:>3} {:?} {:.3} {}", r.iteration, r.status, r.accuracy, r.config.render());
    let control = SearchControl { cancel: None, on_record: Some(&mut print) };
    let ledger = run_search(&space, &train_set, &test_set, &options, &ledger_path, control)?;
    println!();
    print!("{}", render_leaderboard(&leaderboard(&ledger, 5)?));
    Ok(())
}
