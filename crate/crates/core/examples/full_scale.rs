//! Long-run harness for the full PhysioNet motor movement/imagery corpus:
//! ingest, features, PCA(500)+SVM, the hand-built CNN and a 750-iteration
//! random search, each compared with the published result.
//!
//! ```text
//! EEGLINE_DATA_DIR=/data/eegmmidb cargo run --release --example full_scale -- work/ [budget] [epochs]
//! ```
//!
//! Every stage writes to `work/` and is skipped when its output exists, so
//! the harness can be stopped and restarted; the search resumes from its
//! ledger. Holding all 17232 feature tensors takes about 9.5 GB.

use std::error::Error;
use std::path::PathBuf;
use std::time::Instant;

use eegline::baseline::{run_handcrafted, run_pca_svm, BaselineOptions, BaselineReport};
use eegline::dataset::{ingest_dir, DatasetManifest};
use eegline::hyperopt::{leaderboard, render_leaderboard, run_search, trace_csv, accuracy_trace, SearchControl, SearchOptions, SearchSpace, TrialRecord};
use eegline::nn::TrainSettings;
use eegline::pipeline::{load_split, preprocess_to_cache, sidecar_path};

const PUBLISHED_SEARCH: f64 = 0.634;
const PUBLISHED_HANDCRAFTED_VAL: f64 = 0.5821;
const PUBLISHED_HANDCRAFTED_TRAIN: f64 = 0.9539;
const PUBLISHED_SVM: f64 = 0.56;

fn compare(name: &str, got: f64, want: f64) {
    let gap = (got - want) * 100.0;
    let verdict = if gap.abs() <= 3.0 { "within 3 points" } else { "outside 3 points" };
    println!("{name:<28} {:>6.2}%  published {:>6.2}%  ({gap:+.2}, {verdict})", got * 100.0, want * 100.0);
}

fn main() -> Result<(), Box<dyn Error>> {
    let mut args = std::env::args().skip(1);
    let work = PathBuf::from(args.next().unwrap_or_else(|| "full_scale".into()));
    let budget: usize = args.next().map(|b| b.parse()).transpose()?.unwrap_or(750);
    let epochs: usize = args.next().map(|e| e.parse()).transpose()?.unwrap_or(30);
    let data_dir = PathBuf::from(std::env::var_os("EEGLINE_DATA_DIR").ok_or("set EEGLINE_DATA_DIR to the corpus root")?);
    std::fs::create_dir_all(&work)?;
    let start = Instant::now();

    let cache = work.join("features.eegt");
    if !sidecar_path(&cache).exists() {
        let (manifest, summary) = ingest_dir(&data_dir, 0.7, 0)?;
        println!(
            "ingested {} files from {} subjects: {} trials, {} subjects excluded",
            summary.files,
            summary.subjects,
            manifest.trial_count,
            manifest.excluded_subjects.len()
        );
        for note in &manifest.notes {
            println!("note: {note}");
        }
        manifest.save(&work.join("manifest.json"))?;
        let written: DatasetManifest = preprocess_to_cache(&manifest, &data_dir, &cache)?;
        println!("{} flagged trials, features ready after {:.0?}", written.flagged.len(), start.elapsed());
    }
    let (manifest, train_set, test_set) = load_split(&cache, None)?;
    println!("{} train / {} test", train_set.len(), test_set.len());

    let baseline_path = work.join("baseline.json");
    let baseline: BaselineReport = match std::fs::read_to_string(&baseline_path) {
        Ok(text) => serde_json::from_str(&text)?,
        Err(_) => {
            let mut report = run_pca_svm(&train_set, &test_set, &manifest.id, &BaselineOptions::default())?;
            let settings = TrainSettings { epochs, ..TrainSettings::default() };
            report.handcrafted = Some(run_handcrafted(&train_set, &test_set, &settings)?);
            std::fs::write(&baseline_path, serde_json::to_string_pretty(&report)?)?;
            report
        }
    };

    let options = SearchOptions {
        train: TrainSettings { epochs, ..TrainSettings::default() },
        ..SearchOptions::new("full-scale", 0, budget)
    };
    let ledger_path = work.join("search.ndjson");
    let mut progress = |r: &TrialRecord| {
        println!("[{:>4}/{budget}] {:.4} {:>7.1}s {}", r.iteration, r.accuracy, r.wall_time, r.config.render());
    };
    let control = SearchControl { cancel: None, on_record: Some(&mut progress) };
    let ledger = run_search(&SearchSpace::default(), &train_set, &test_set, &options, &ledger_path, control)?;
    std::fs::write(work.join("trace.csv"), trace_csv(&accuracy_trace(&ledger)))?;

    println!();
    print!("{}", render_leaderboard(&leaderboard(&ledger, 5)?));
    println!();
    compare("random search best", ledger.best().map_or(0.0, |r| r.accuracy), PUBLISHED_SEARCH);
    if let Some(h) = &baseline.handcrafted {
        compare("hand-built CNN validation", h.test_accuracy, PUBLISHED_HANDCRAFTED_VAL);
        compare("hand-built CNN training", h.train_accuracy, PUBLISHED_HANDCRAFTED_TRAIN);
    }
    compare("PCA(500) + SVM", baseline.test_accuracy, PUBLISHED_SVM);
    println!("total {:.0?}", start.elapsed());
    Ok(())
}
