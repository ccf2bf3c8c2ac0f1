//! Bounded random search over network configurations with a persistent,
//! resumable ledger, leaderboard and accuracy trace.

pub mod ledger;
pub mod search;
pub mod space;

pub use ledger::{
    accuracy_trace, format_percent, leaderboard, render_leaderboard, trace_csv, Ledger, LedgerHeader, LeaderboardRow,
    TracePoint, TrialRecord, TrialStatus,
};
pub use search::{iteration_seed, run_iteration, run_search, SearchControl, SearchOptions};
pub use space::{sample_config, LayerKind, SearchSpace, DEFAULT_SPACE_JSON};

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("search space has no layer types to choose from")]
    EmptySpace,
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("ledger has no records")]
    EmptyLedger,
    #[error("ledger: {0}")]
    Ledger(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl SearchError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        SearchError::Io { path: path.to_path_buf(), source }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{infer_shapes, Dataset, Shape, TrainSettings};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Class 1 has a raised first half of each sample.
    fn data(n: usize, seed: u64) -> Dataset {
        let shape = Shape::map(2, 4, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let label = i % 2;
            for j in 0..shape.size() {
                let shift = if label == 1 && j < 20 { 1.0 } else { 0.0 };
                inputs.push(shift + rng.random_range(-0.5..0.5f32));
            }
            labels.push(label);
        }
        Dataset::new(shape, inputs, labels).unwrap()
    }

    fn small_space() -> SearchSpace {
        SearchSpace {
            num_layers: [1, 2],
            layer_type_choices: vec![LayerKind::Conv, LayerKind::Pool, LayerKind::Fc, LayerKind::Dropout],
            filters: [1, 3],
            filter_size: [1, 5],
            pool_size: [2, 5],
            pool_stride: [1, 2],
            fc_units: [2, 6],
            keep_prob: [0.5, 0.95],
            learning_rate: [0.01, 0.1],
        }
    }

    fn options(budget: usize) -> SearchOptions {
        SearchOptions {
            train: TrainSettings { epochs: 3, batch_size: 8, seed: 0, normalize: true },
            record_timing: false,
            ..SearchOptions::new("unit", 77, budget)
        }
    }

    #[test]
    fn forced_infeasible_space_records_zeros() {
        let mut space = small_space();
        space.layer_type_choices = vec![LayerKind::Conv];
        space.filter_size = [40, 40];
        let dir = tempfile::tempdir().unwrap();
        let d = data(16, 1);
        let ledger =
            run_search(&space, &d, &d, &options(5), &dir.path().join("l.ndjson"), SearchControl::default()).unwrap();
        assert_eq!(ledger.records.len(), 5);
        assert!(ledger.records.iter().all(|r| r.status == TrialStatus::Infeasible && r.accuracy == 0.0));
    }

    #[test]
    fn feasibility_is_consistent_and_resume_matches() {
        let space = small_space();
        let (tr, va) = (data(24, 2), data(12, 3));
        let dir = tempfile::tempdir().unwrap();
        let full = dir.path().join("full.ndjson");
        let ledger = run_search(&space, &tr, &va, &options(6), &full, SearchControl::default()).unwrap();
        assert_eq!(accuracy_trace(&ledger).len(), 6);
        for r in &ledger.records {
            let ok = infer_shapes(&r.config, tr.sample_shape()).is_ok();
            assert_eq!(ok, r.status == TrialStatus::Feasible, "{}", r.config.render());
        }

        let part = dir.path().join("part.ndjson");
        run_search(&space, &tr, &va, &options(3), &part, SearchControl::default()).unwrap();
        // simulate a crash in the middle of an append
        let mut bytes = std::fs::read(&part).unwrap();
        bytes.extend_from_slice(b"{\"iteration\":4,\"conf");
        std::fs::write(&part, bytes).unwrap();
        let resumed = run_search(&space, &tr, &va, &options(6), &part, SearchControl::default()).unwrap();
        assert_eq!(resumed, ledger);
        assert_eq!(std::fs::read(&part).unwrap(), std::fs::read(&full).unwrap());
    }

    #[test]
    fn cancel_and_header_mismatch() {
        let space = small_space();
        let d = data(16, 4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ndjson");
        let cancel = std::sync::atomic::AtomicBool::new(true);
        let mut seen = 0;
        let mut cb = |_: &TrialRecord| seen += 1;
        let control = SearchControl { cancel: Some(&cancel), on_record: Some(&mut cb) };
        let ledger = run_search(&space, &d, &d, &options(4), &path, control).unwrap();
        assert!(ledger.records.is_empty());
        assert_eq!(seen, 0);
        let other = SearchOptions { base_seed: 1, ..options(4) };
        assert!(matches!(
            run_search(&space, &d, &d, &other, &path, SearchControl::default()),
            Err(SearchError::Ledger(_))
        ));
        assert!(run_search(&space, &d, &d, &options(0), &path, SearchControl::default()).is_err());
    }
}
