use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ledger::{header_line, read_ledger, record_line, Ledger, LedgerHeader, TrialRecord, TrialStatus};
use super::space::{sample_config, SearchSpace};
use super::SearchError;
use crate::nn::{infer_shapes, parameter_count, train, Dataset, NnError, TrainSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub search_id: String,
    pub base_seed: u64,
    /// Total number of iterations, counting infeasible ones.
    pub budget: usize,
    /// Epochs, batch size and normalization used for every feasible trial.
    /// The seed field is replaced by the per-iteration seed.
    pub train: TrainSettings,
    /// Networks with more parameters than this are recorded as infeasible.
    pub max_parameters: Option<usize>,
    /// Store measured wall time; when false every record holds 0.
    pub record_timing: bool,
}

impl SearchOptions {
    pub fn new(search_id: impl Into<String>, base_seed: u64, budget: usize) -> Self {
        Self {
            search_id: search_id.into(),
            base_seed,
            budget,
            train: TrainSettings::default(),
            max_parameters: None,
            record_timing: true,
        }
    }

    fn header(&self, space: &SearchSpace) -> LedgerHeader {
        LedgerHeader {
            search_id: self.search_id.clone(),
            base_seed: self.base_seed,
            space: space.clone(),
            settings: serde_json::json!({
                "epochs": self.train.epochs,
                "batch_size": self.train.batch_size,
                "normalize": self.train.normalize,
                "max_parameters": self.max_parameters,
            }),
        }
    }
}

/// Seed used for sampling and training at `iteration`.
pub fn iteration_seed(base_seed: u64, iteration: usize) -> u64 {
    base_seed ^ iteration as u64
}

/// Samples, checks and (if feasible) trains one iteration.
pub fn run_iteration(
    space: &SearchSpace,
    train_set: &Dataset,
    val_set: &Dataset,
    options: &SearchOptions,
    iteration: usize,
) -> Result<TrialRecord, SearchError> {
    let start = Instant::now();
    let seed = iteration_seed(options.base_seed, iteration);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = sample_config(space, &mut rng)?;
    let mut record = TrialRecord {
        iteration,
        config: config.clone(),
        status: TrialStatus::Infeasible,
        accuracy: 0.0,
        wall_time: 0.0,
        seed,
        reason: None,
        best_epoch: None,
    };
    let params = parameter_count(&config, train_set.sample_shape());
    if let Err(e) = infer_shapes(&config, train_set.sample_shape()) {
        record.reason = Some(e.to_string());
    } else if let Some(cap) = options.max_parameters.filter(|&cap| params > cap) {
        record.reason = Some(format!("{params} parameters exceed the cap of {cap}"));
    } else {
        let settings = TrainSettings { seed, ..options.train };
        match train(&config, train_set, val_set, &settings) {
            Ok((_, report)) => {
                record.status = TrialStatus::Feasible;
                record.accuracy = report.best_val_acc;
                record.best_epoch = report.best_epoch;
                if report.diverged {
                    record.reason = Some("training diverged".into());
                }
            }
            Err(NnError::InfeasibleConfig(e)) => record.reason = Some(e.to_string()),
            Err(e) => return Err(e.into()),
        }
    }
    if options.record_timing {
        record.wall_time = start.elapsed().as_secs_f64();
    }
    Ok(record)
}

/// Hooks observed between iterations.
#[derive(Default)]
pub struct SearchControl<'a> {
    /// Checked before each iteration; when set the search returns early.
    pub cancel: Option<&'a AtomicBool>,
    /// Called after each record is flushed.
    pub on_record: Option<&'a mut dyn FnMut(&TrialRecord)>,
}

/// Random search with a crash-resumable ledger at `ledger_path`.
///
/// An existing ledger with the same header is resumed: its records are kept,
/// a torn final line is cut off, and sampling continues at the next
/// iteration. Records are appended and flushed one at a time.
pub fn run_search(
    space: &SearchSpace,
    train_set: &Dataset,
    val_set: &Dataset,
    options: &SearchOptions,
    ledger_path: &Path,
    mut control: SearchControl<'_>,
) -> Result<Ledger, SearchError> {
    space.validate()?;
    if options.budget == 0 {
        return Err(SearchError::InvalidSpace("budget must be at least 1".into()));
    }
    if train_set.is_empty() || val_set.is_empty() {
        return Err(SearchError::Nn(NnError::EmptyDataset));
    }
    let header = options.header(space);
    let mut ledger = match fs::metadata(ledger_path) {
        Ok(m) if m.len() > 0 => {
            let loaded = read_ledger(ledger_path)?;
            if loaded.ledger.header != header {
                return Err(SearchError::Ledger(format!(
                    "{} belongs to a different search (header mismatch)",
                    ledger_path.display()
                )));
            }
            if loaded.valid_len as u64 != m.len() {
                let f = OpenOptions::new().write(true).open(ledger_path).map_err(|e| SearchError::io(ledger_path, e))?;
                f.set_len(loaded.valid_len as u64).map_err(|e| SearchError::io(ledger_path, e))?;
            }
            loaded.ledger
        }
        _ => {
            fs::write(ledger_path, header_line(&header)).map_err(|e| SearchError::io(ledger_path, e))?;
            Ledger::new(header)
        }
    };
    let mut file = OpenOptions::new().append(true).open(ledger_path).map_err(|e| SearchError::io(ledger_path, e))?;

    for iteration in ledger.records.len() + 1..=options.budget {
        if control.cancel.is_some_and(|c| c.load(Ordering::SeqCst)) {
            break;
        }
        let record = run_iteration(space, train_set, val_set, options, iteration)?;
        file.write_all(record_line(&record).as_bytes()).map_err(|e| SearchError::io(ledger_path, e))?;
        file.sync_data().map_err(|e| SearchError::io(ledger_path, e))?;
        if let Some(cb) = control.on_record.as_mut() {
            cb(&record);
        }
        ledger.records.push(record);
    }
    Ok(ledger)
}
