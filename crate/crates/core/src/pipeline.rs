//! Glue between the stages: manifest trials to cached feature tensors, and
//! cached tensors to train/test datasets following the manifest split.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::{ingest_dir, load_trials, DatasetError, DatasetManifest, FlaggedTrial, Trial};
use crate::nn::{Dataset, NnError, Shape};
use crate::preprocess::{build_tensor, read_cache, CacheError, CacheRecord, CacheWriter, NUM_BANDS, NUM_FRAMES};

/// Per-trial network input: electrodes x bands x frames.
pub const FEATURE_SHAPE: Shape = Shape::Map { channels: crate::dataset::NUM_CHANNELS, height: NUM_BANDS, width: NUM_FRAMES };

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("cache and manifest disagree: {0}")]
    Mismatch(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Feature tensors for `trials` in order. Trials with a degenerate frame are
/// left out and reported as flagged, indexed by position in `trials`.
pub fn featurize(trials: &[Trial]) -> (Vec<CacheRecord>, Vec<FlaggedTrial>) {
    let results: Vec<_> = trials.par_iter().map(build_tensor).collect();
    let mut records = Vec::with_capacity(trials.len());
    let mut flagged = Vec::new();
    for (index, (trial, result)) in trials.iter().zip(results).enumerate() {
        match result {
            Ok(tensor) => records.push(CacheRecord::new(&trial.subject, trial.run, trial.class, &tensor)),
            Err(e) => flagged.push(FlaggedTrial { index, reason: e.to_string() }),
        }
    }
    (records, flagged)
}

/// Path of the manifest copy written next to a cache file.
pub fn sidecar_path(cache: &Path) -> PathBuf {
    let mut name = cache.as_os_str().to_os_string();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Re-cuts every manifest trial from `data_dir`, writes the feature cache to
/// `cache` and the manifest (with flagged trials) to its sidecar.
pub fn preprocess_to_cache(
    manifest: &DatasetManifest,
    data_dir: &Path,
    cache: &Path,
) -> Result<DatasetManifest, PipelineError> {
    let trials = load_trials(manifest, data_dir)?;
    let (records, flagged) = featurize(&trials);
    drop(trials);
    let file = File::create(cache).map_err(|source| PipelineError::Io { path: cache.into(), source })?;
    let mut writer = CacheWriter::new(BufWriter::new(file)).map_err(CacheError::from)?;
    for r in &records {
        writer.append(r)?;
    }
    writer.finish().map_err(CacheError::from)?;
    let mut out = manifest.clone();
    out.flagged = flagged;
    out.save(&sidecar_path(cache))?;
    Ok(out)
}

pub fn read_cache_file(path: &Path) -> Result<Vec<CacheRecord>, PipelineError> {
    let file = File::open(path).map_err(|source| PipelineError::Io { path: path.into(), source })?;
    Ok(read_cache(BufReader::new(file))?)
}

/// Manifest trial index of every cache record: all trials in order, minus
/// the flagged ones.
pub fn record_trial_indices(manifest: &DatasetManifest, records: &[CacheRecord]) -> Result<Vec<usize>, PipelineError> {
    let mut skip = vec![false; manifest.trials.len()];
    for f in &manifest.flagged {
        if f.index >= skip.len() {
            return Err(PipelineError::Mismatch(format!("flagged index {} out of range", f.index)));
        }
        skip[f.index] = true;
    }
    let indices: Vec<usize> = (0..manifest.trials.len()).filter(|&i| !skip[i]).collect();
    if indices.len() != records.len() {
        return Err(PipelineError::Mismatch(format!(
            "{} cache records for {} unflagged manifest trials",
            records.len(),
            indices.len()
        )));
    }
    for (r, &i) in records.iter().zip(&indices) {
        let t = &manifest.trials[i];
        if (r.subject.as_str(), r.run, r.class) != (t.subject.as_str(), t.run, t.class) {
            return Err(PipelineError::Mismatch(format!(
                "record for trial {i} is {} R{:02}, manifest has {} R{:02}",
                r.subject, r.run, t.subject, t.run
            )));
        }
    }
    Ok(indices)
}

fn to_dataset(records: Vec<CacheRecord>) -> Result<Dataset, PipelineError> {
    let labels = records.iter().map(|r| r.class.label()).collect();
    let mut inputs = Vec::with_capacity(records.len() * FEATURE_SHAPE.size());
    for r in records {
        inputs.extend_from_slice(&r.values);
    }
    Ok(Dataset::new(FEATURE_SHAPE, inputs, labels)?)
}

/// All records as one dataset, in cache order.
pub fn records_dataset(records: Vec<CacheRecord>) -> Result<Dataset, PipelineError> {
    to_dataset(records)
}

/// Train and test datasets following the manifest split; flagged trials are
/// skipped.
pub fn split_datasets(manifest: &DatasetManifest, records: Vec<CacheRecord>) -> Result<(Dataset, Dataset), PipelineError> {
    let indices = record_trial_indices(manifest, &records)?;
    let mut position = vec![None; manifest.trials.len()];
    for (pos, &i) in indices.iter().enumerate() {
        position[i] = Some(pos);
    }
    let mut slots: Vec<Option<CacheRecord>> = records.into_iter().map(Some).collect();
    let mut take = |which: &[usize]| -> Vec<CacheRecord> {
        which.iter().filter_map(|&i| position[i]).filter_map(|p| slots[p].take()).collect()
    };
    let train = take(&manifest.train_indices);
    let test = take(&manifest.test_indices);
    Ok((to_dataset(train)?, to_dataset(test)?))
}

/// Cache file plus its manifest (the sidecar unless `manifest` is given),
/// split into train and test datasets.
pub fn load_split(cache: &Path, manifest: Option<&Path>) -> Result<(DatasetManifest, Dataset, Dataset), PipelineError> {
    let manifest_path = manifest.map(Path::to_path_buf).unwrap_or_else(|| sidecar_path(cache));
    let manifest = DatasetManifest::load(&manifest_path)?;
    let records = read_cache_file(cache)?;
    let (train, test) = split_datasets(&manifest, records)?;
    Ok((manifest, train, test))
}

/// Ingest `data_dir`, write the feature cache and return the split datasets.
pub fn prepare_split(
    data_dir: &Path,
    cache: &Path,
    ratio: f64,
    seed: u64,
) -> Result<(DatasetManifest, Dataset, Dataset), PipelineError> {
    let (manifest, _) = ingest_dir(data_dir, ratio, seed)?;
    let manifest = preprocess_to_cache(&manifest, data_dir, cache)?;
    let records = read_cache_file(cache)?;
    let (train, test) = split_datasets(&manifest, records)?;
    Ok((manifest, train, test))
}
