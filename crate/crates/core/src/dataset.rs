//! Recordings, run semantics, trial segmentation and the train/test manifest.
//!
//! The corpus layout follows the PhysioNet EEG Motor Movement/Imagery
//! database: one EDF+ file per subject and run, named `S###R##.edf`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use ndarray::{s, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::edf::{self, Annotation, EdfError, EdfFile};

pub const SAMPLE_RATE: f64 = 160.0;
pub const NUM_CHANNELS: usize = 64;
/// Trial length in seconds.
pub const TRIAL_SECONDS: f64 = 4.1;
/// Samples per channel in one trial (4.1 s at 160 Hz).
pub const TRIAL_SAMPLES: usize = 656;
/// Trial count reported for the full 103-subject corpus.
pub const REFERENCE_TRIAL_COUNT: usize = 17232;
/// Subjects in the complete public corpus.
pub const REFERENCE_SUBJECT_COUNT: usize = 109;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("run {0} is outside 1..=14")]
    OutOfRangeRun(u8),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{path}: {source}")]
    Edf { path: PathBuf, source: EdfError },
    #[error("{0}")]
    Recording(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest: {0}")]
    Manifest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    Baseline,
    RealMovement,
    ImaginedMovement,
}

/// Maps a run number to its protocol task.
///
/// Runs 1-2 are eyes-open/eyes-closed baselines. Odd runs 3-13 are executed
/// movements and even runs 4-14 imagined ones.
pub fn classify_run(run: u8) -> Result<TaskKind, DatasetError> {
    match run {
        1 | 2 => Ok(TaskKind::Baseline),
        3..=14 if run % 2 == 1 => Ok(TaskKind::RealMovement),
        3..=14 => Ok(TaskKind::ImaginedMovement),
        _ => Err(DatasetError::OutOfRangeRun(run)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialClass {
    Real,
    Imagined,
}

impl TrialClass {
    pub fn label(self) -> usize {
        match self {
            TrialClass::Real => 0,
            TrialClass::Imagined => 1,
        }
    }

    pub fn from_label(label: usize) -> Option<Self> {
        match label {
            0 => Some(TrialClass::Real),
            1 => Some(TrialClass::Imagined),
            _ => None,
        }
    }

    pub fn for_task(task: TaskKind) -> Option<Self> {
        match task {
            TaskKind::Baseline => None,
            TaskKind::RealMovement => Some(TrialClass::Real),
            TaskKind::ImaginedMovement => Some(TrialClass::Imagined),
        }
    }
}

impl fmt::Display for TrialClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrialClass::Real => "real",
            TrialClass::Imagined => "imagined",
        })
    }
}

/// One subject/run recording with the annotation signal split off.
#[derive(Debug, Clone)]
pub struct RawRecording {
    pub subject: String,
    pub run: u8,
    pub channel_labels: Vec<String>,
    pub fs: f64,
    /// `[channels, samples]`, microvolts.
    pub samples: Array2<f64>,
    pub annotations: Vec<Annotation>,
    pub has_annotation_signal: bool,
}

impl RawRecording {
    /// Builds a recording from a decoded file. All data channels must share
    /// one sampling rate.
    pub fn from_edf(file: EdfFile, subject: impl Into<String>, run: u8) -> Result<Self, DatasetError> {
        let n_ch = file.channels.len();
        if n_ch == 0 {
            return Err(DatasetError::Recording("no data channels".into()));
        }
        let fs = file.sample_rate(0);
        if (1..n_ch).any(|i| file.sample_rate(i) != fs) {
            return Err(DatasetError::Recording("channels have different sampling rates".into()));
        }
        let len = file.channels[0].len();
        let channel_labels = file.data_headers().map(|h| h.label.clone()).collect();
        let mut samples = Array2::zeros((n_ch, len));
        for (mut row, ch) in samples.rows_mut().into_iter().zip(&file.channels) {
            row.assign(&ndarray::ArrayView1::from(ch.as_slice()));
        }
        Ok(Self {
            subject: subject.into(),
            run,
            channel_labels,
            fs,
            samples,
            annotations: file.annotations,
            has_annotation_signal: file.has_annotation_signal,
        })
    }

    pub fn num_samples(&self) -> usize {
        self.samples.ncols()
    }
}

/// Extracts `(subject, run)` from a `S###R##.edf` file name.
pub fn parse_run_file_name(path: &Path) -> Option<(String, u8)> {
    let stem = path.file_stem()?.to_str()?;
    if !path.extension()?.eq_ignore_ascii_case("edf") {
        return None;
    }
    let upper = stem.to_ascii_uppercase();
    let r = upper.rfind('R')?;
    let (subject, run) = (&upper[..r], &upper[r + 1..]);
    if !subject.starts_with('S') || subject.len() < 2 || !subject[1..].bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((subject.to_string(), run.parse().ok()?))
}

/// Reads and decodes one `S###R##.edf` file.
pub fn read_recording(path: &Path) -> Result<RawRecording, DatasetError> {
    let (subject, run) = parse_run_file_name(path)
        .ok_or_else(|| DatasetError::Recording(format!("{}: not a S###R##.edf name", path.display())))?;
    let bytes = std::fs::read(path).map_err(|source| DatasetError::Io { path: path.into(), source })?;
    let file = edf::parse_edf(&bytes).map_err(|source| DatasetError::Edf { path: path.into(), source })?;
    RawRecording::from_edf(file, subject, run)
}

/// One labelled 4.1 s window.
#[derive(Debug, Clone)]
pub struct Trial {
    pub subject: String,
    pub run: u8,
    pub event_label: String,
    pub onset: f64,
    pub class: TrialClass,
    /// `[channels, TRIAL_SAMPLES]`, microvolts.
    pub data: Array2<f64>,
}

fn is_movement_event(label: &str) -> bool {
    label == "T1" || label == "T2"
}

/// First sample index of an event.
pub fn onset_sample(onset: f64, fs: f64) -> usize {
    (onset * fs).round() as usize
}

/// Cuts every T1/T2 event into a `[channels, 656]` trial starting at the
/// event onset. Events whose window runs past the end are dropped; T0 and
/// baseline runs yield nothing.
pub fn segment_trials(rec: &RawRecording) -> Vec<Trial> {
    let Some(class) = classify_run(rec.run).ok().and_then(TrialClass::for_task) else {
        return Vec::new();
    };
    let total = rec.num_samples();
    rec.annotations
        .iter()
        .filter(|a| is_movement_event(&a.label))
        .filter_map(|a| {
            let start = onset_sample(a.onset, rec.fs);
            let end = start.checked_add(TRIAL_SAMPLES)?;
            (end <= total).then(|| Trial {
                subject: rec.subject.clone(),
                run: rec.run,
                event_label: a.label.clone(),
                onset: a.onset,
                class,
                data: rec.samples.slice(s![.., start..end]).to_owned(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    SamplingRate,
    ChannelCount,
    AnnotationLabels,
    MissingAnnotations,
    Unreadable,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::SamplingRate => "sampling-rate",
            RejectReason::ChannelCount => "channel-count",
            RejectReason::AnnotationLabels => "annotation-labels",
            RejectReason::MissingAnnotations => "missing-annotations",
            RejectReason::Unreadable => "unreadable",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject(RejectReason),
}

/// Rule-based subject screening over all of one subject's runs.
pub fn validate_subject(recordings: &[RawRecording]) -> Verdict {
    for rec in recordings {
        if rec.fs != SAMPLE_RATE {
            return Verdict::Reject(RejectReason::SamplingRate);
        }
    }
    for rec in recordings {
        if rec.samples.nrows() != NUM_CHANNELS {
            return Verdict::Reject(RejectReason::ChannelCount);
        }
    }
    for rec in recordings {
        let is_task = matches!(
            classify_run(rec.run),
            Ok(TaskKind::RealMovement | TaskKind::ImaginedMovement)
        );
        if is_task && !rec.has_annotation_signal {
            return Verdict::Reject(RejectReason::MissingAnnotations);
        }
        if rec.annotations.iter().any(|a| !matches!(a.label.as_str(), "T0" | "T1" | "T2")) {
            return Verdict::Reject(RejectReason::AnnotationLabels);
        }
    }
    Verdict::Accept
}

/// Inventory entry for one trial; enough to cut it again from its file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEntry {
    pub subject: String,
    pub run: u8,
    /// Path relative to the manifest's `data_dir`.
    pub file: PathBuf,
    pub event_label: String,
    pub onset: f64,
    pub class: TrialClass,
}

impl TrialEntry {
    pub fn from_trial(t: &Trial, file: PathBuf) -> Self {
        Self {
            subject: t.subject.clone(),
            run: t.run,
            file,
            event_label: t.event_label.clone(),
            onset: t.onset,
            class: t.class,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedSubject {
    pub subject: String,
    pub reason: RejectReason,
}

/// Frozen trial inventory and train/test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    /// Content hash over the inventory and split.
    pub id: String,
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
    pub included_subjects: Vec<String>,
    pub excluded_subjects: Vec<ExcludedSubject>,
    pub trials: Vec<TrialEntry>,
    pub trial_count: usize,
    pub split_ratio: f64,
    pub split_seed: u64,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    #[serde(default)]
    pub notes: Vec<String>,
    /// Trials left out of the feature cache, with the reason.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flagged: Vec<FlaggedTrial>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedTrial {
    pub index: usize,
    pub reason: String,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.into(), source })?;
        let m: Self = serde_json::from_str(&text).map_err(|e| DatasetError::Manifest(e.to_string()))?;
        m.check()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| DatasetError::Manifest(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|source| DatasetError::Io { path: path.into(), source })
    }

    /// Checks that train and test partition `0..trial_count`.
    pub fn check(&self) -> Result<(), DatasetError> {
        let n = self.trials.len();
        if self.trial_count != n {
            return Err(DatasetError::Manifest(format!("trial_count {} != {} entries", self.trial_count, n)));
        }
        let mut seen = vec![false; n];
        for &i in self.train_indices.iter().chain(&self.test_indices) {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(DatasetError::Manifest(format!("index {i} out of range or repeated")));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(DatasetError::Manifest("split does not cover every trial".into()));
        }
        Ok(())
    }

    fn content_id(&self) -> String {
        let mut hasher = Sha256::new();
        let body = serde_json::to_vec(&(
            &self.trials,
            self.split_ratio,
            self.split_seed,
            &self.train_indices,
            &self.test_indices,
        ))
        .expect("manifest body serialises");
        hasher.update(&body);
        hex::encode(&hasher.finalize()[..8])
    }
}

/// Deterministic shuffled split: the first `floor(ratio * N)` shuffled
/// indices train, the rest test.
pub fn make_manifest(trials: Vec<TrialEntry>, ratio: f64, seed: u64) -> Result<DatasetManifest, DatasetError> {
    if trials.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    let n = trials.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((ratio * n as f64).floor() as usize).min(n);
    let test_indices = order.split_off(n_train);

    let mut included: Vec<String> = trials.iter().map(|t| t.subject.clone()).collect();
    included.sort();
    included.dedup();

    let mut m = DatasetManifest {
        id: String::new(),
        data_dir: None,
        included_subjects: included,
        excluded_subjects: Vec::new(),
        trial_count: n,
        trials,
        split_ratio: ratio,
        split_seed: seed,
        train_indices: order,
        test_indices,
        notes: Vec::new(),
        flagged: Vec::new(),
    };
    m.id = m.content_id();
    Ok(m)
}

/// Per-file outcome of a directory scan, in subject order.
#[derive(Debug, Clone, Default)]
pub struct IngestSummary {
    pub files: usize,
    pub subjects: usize,
    pub trials_per_subject: BTreeMap<String, usize>,
}

/// Scans `data_dir` for `S###R##.edf` files, screens each subject, cuts
/// trials from accepted subjects and returns the manifest.
pub fn ingest_dir(data_dir: &Path, ratio: f64, seed: u64) -> Result<(DatasetManifest, IngestSummary), DatasetError> {
    let mut by_subject: BTreeMap<String, Vec<(u8, PathBuf)>> = BTreeMap::new();
    let mut files = 0;
    for entry in walkdir::WalkDir::new(data_dir).sort_by_file_name() {
        let entry = entry.map_err(|e| DatasetError::Io {
            path: data_dir.into(),
            source: e.into(),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        if let Some((subject, run)) = parse_run_file_name(entry.path()) {
            let rel = entry.path().strip_prefix(data_dir).unwrap_or(entry.path()).to_path_buf();
            by_subject.entry(subject).or_default().push((run, rel));
            files += 1;
        }
    }
    if by_subject.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }

    type SubjectOutcome = (String, Result<Vec<TrialEntry>, RejectReason>);
    let outcomes: Vec<SubjectOutcome> = by_subject
        .par_iter()
        .map(|(subject, runs)| {
            let mut runs = runs.clone();
            runs.sort();
            let mut recs = Vec::with_capacity(runs.len());
            for (_, rel) in &runs {
                match read_recording(&data_dir.join(rel)) {
                    Ok(r) => recs.push((r, rel.clone())),
                    Err(_) => return (subject.clone(), Err(RejectReason::Unreadable)),
                }
            }
            let only: Vec<RawRecording> = recs.iter().map(|(r, _)| r.clone()).collect();
            match validate_subject(&only) {
                Verdict::Reject(reason) => (subject.clone(), Err(reason)),
                Verdict::Accept => {
                    let entries = recs
                        .iter()
                        .flat_map(|(rec, rel)| {
                            segment_trials(rec)
                                .into_iter()
                                .map(move |t| TrialEntry::from_trial(&t, rel.clone()))
                        })
                        .collect();
                    (subject.clone(), Ok(entries))
                }
            }
        })
        .collect();

    let mut summary = IngestSummary { files, subjects: outcomes.len(), ..Default::default() };
    let mut trials = Vec::new();
    let mut excluded = Vec::new();
    for (subject, outcome) in outcomes {
        match outcome {
            Ok(entries) => {
                summary.trials_per_subject.insert(subject, entries.len());
                trials.extend(entries);
            }
            Err(reason) => excluded.push(ExcludedSubject { subject, reason }),
        }
    }
    let mut manifest = make_manifest(trials, ratio, seed)?;
    manifest.excluded_subjects = excluded;
    manifest.data_dir = Some(data_dir.to_path_buf());
    if summary.subjects == REFERENCE_SUBJECT_COUNT && manifest.trial_count != REFERENCE_TRIAL_COUNT {
        manifest.notes.push(format!(
            "trial count {} differs from the reference count {REFERENCE_TRIAL_COUNT}",
            manifest.trial_count
        ));
    }
    Ok((manifest, summary))
}

/// Re-cuts the trials of `manifest` from disk, in manifest order.
pub fn load_trials(manifest: &DatasetManifest, data_dir: &Path) -> Result<Vec<Trial>, DatasetError> {
    let mut by_file: BTreeMap<&Path, Vec<usize>> = BTreeMap::new();
    for (i, t) in manifest.trials.iter().enumerate() {
        by_file.entry(t.file.as_path()).or_default().push(i);
    }
    let mut out: Vec<Option<Trial>> = vec![None; manifest.trials.len()];
    let loaded: Vec<Result<Vec<(usize, Trial)>, DatasetError>> = by_file
        .par_iter()
        .map(|(file, idxs)| {
            let rec = read_recording(&data_dir.join(file))?;
            idxs.iter()
                .map(|&i| {
                    let e = &manifest.trials[i];
                    let start = onset_sample(e.onset, rec.fs);
                    if start + TRIAL_SAMPLES > rec.num_samples() {
                        return Err(DatasetError::Manifest(format!(
                            "trial {i} ({} at {}s) exceeds {}",
                            e.event_label,
                            e.onset,
                            file.display()
                        )));
                    }
                    Ok((
                        i,
                        Trial {
                            subject: e.subject.clone(),
                            run: e.run,
                            event_label: e.event_label.clone(),
                            onset: e.onset,
                            class: e.class,
                            data: rec.samples.slice(s![.., start..start + TRIAL_SAMPLES]).to_owned(),
                        },
                    ))
                })
                .collect()
        })
        .collect();
    for batch in loaded {
        for (i, t) in batch? {
            out[i] = Some(t);
        }
    }
    Ok(out.into_iter().map(|t| t.expect("every entry loaded")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recording(run: u8, len: usize, anns: &[(f64, &str)]) -> RawRecording {
        RawRecording {
            subject: "S001".into(),
            run,
            channel_labels: (0..NUM_CHANNELS).map(|i| format!("C{i}")).collect(),
            fs: SAMPLE_RATE,
            samples: Array2::from_shape_fn((NUM_CHANNELS, len), |(c, t)| (c * 10_000 + t) as f64),
            annotations: anns
                .iter()
                .map(|&(onset, label)| Annotation { onset, duration: 4.1, label: label.into() })
                .collect(),
            has_annotation_signal: true,
        }
    }

    #[test]
    fn run_mapping() {
        assert_eq!(classify_run(1).unwrap(), TaskKind::Baseline);
        assert_eq!(classify_run(2).unwrap(), TaskKind::Baseline);
        assert_eq!(classify_run(3).unwrap(), TaskKind::RealMovement);
        assert_eq!(classify_run(4).unwrap(), TaskKind::ImaginedMovement);
        assert_eq!(classify_run(13).unwrap(), TaskKind::RealMovement);
        assert_eq!(classify_run(14).unwrap(), TaskKind::ImaginedMovement);
        assert!(matches!(classify_run(0), Err(DatasetError::OutOfRangeRun(0))));
        assert!(matches!(classify_run(15), Err(DatasetError::OutOfRangeRun(15))));
    }

    #[test]
    fn short_recording_yields_no_trial() {
        assert!(segment_trials(&recording(3, 600, &[(0.0, "T1")])).is_empty());
    }

    #[test]
    fn two_events_two_trials() {
        let trials = segment_trials(&recording(4, 2000, &[(0.0, "T1"), (5.0, "T2")]));
        assert_eq!(trials.len(), 2);
        for t in &trials {
            assert_eq!(t.data.dim(), (NUM_CHANNELS, TRIAL_SAMPLES));
            assert_eq!(t.class, TrialClass::Imagined);
        }
        // Second window starts at sample 800.
        assert_eq!(trials[1].data[[0, 0]], 800.0);
        assert_eq!(trials[1].data[[3, 655]], (3 * 10_000 + 800 + 655) as f64);
    }

    #[test]
    fn rest_events_are_ignored() {
        assert!(segment_trials(&recording(3, 2000, &[(0.0, "T0")])).is_empty());
        assert!(segment_trials(&recording(1, 2000, &[(0.0, "T1")])).is_empty());
    }

    #[test]
    fn subject_screening() {
        let good = vec![recording(1, 100, &[(0.0, "T0")]), recording(3, 100, &[(0.0, "T1")])];
        assert_eq!(validate_subject(&good), Verdict::Accept);

        let mut slow = good.clone();
        slow[1].fs = 128.0;
        assert_eq!(validate_subject(&slow), Verdict::Reject(RejectReason::SamplingRate));
        assert_eq!(RejectReason::SamplingRate.as_str(), "sampling-rate");

        let mut odd = good.clone();
        odd[1].annotations[0].label = "T3".into();
        assert_eq!(validate_subject(&odd), Verdict::Reject(RejectReason::AnnotationLabels));

        let mut narrow = good.clone();
        narrow[0].samples = Array2::zeros((63, 100));
        assert_eq!(validate_subject(&narrow), Verdict::Reject(RejectReason::ChannelCount));

        let mut bare = good;
        bare[1].has_annotation_signal = false;
        assert_eq!(validate_subject(&bare), Verdict::Reject(RejectReason::MissingAnnotations));
    }

    fn entries(n: usize) -> Vec<TrialEntry> {
        (0..n)
            .map(|i| TrialEntry {
                subject: format!("S{:03}", i % 3 + 1),
                run: 3,
                file: format!("S{:03}R03.edf", i % 3 + 1).into(),
                event_label: "T1".into(),
                onset: i as f64,
                class: TrialClass::Real,
            })
            .collect()
    }

    #[test]
    fn manifest_split_is_seven_to_three() {
        let m = make_manifest(entries(10), 0.7, 42).unwrap();
        assert_eq!(m.train_indices.len(), 7);
        assert_eq!(m.test_indices.len(), 3);
        m.check().unwrap();
        assert_eq!(m, make_manifest(entries(10), 0.7, 42).unwrap());
        assert_ne!(m.train_indices, make_manifest(entries(10), 0.7, 43).unwrap().train_indices);
    }

    #[test]
    fn empty_manifest_is_an_error() {
        assert!(matches!(make_manifest(Vec::new(), 0.7, 1), Err(DatasetError::EmptyDataset)));
    }

    #[test]
    fn file_names() {
        assert_eq!(
            parse_run_file_name(Path::new("data/S001/S001R03.edf")),
            Some(("S001".into(), 3))
        );
        assert_eq!(parse_run_file_name(Path::new("S109R14.EDF")), Some(("S109".into(), 14)));
        assert_eq!(parse_run_file_name(Path::new("S001R03.edf.event")), None);
        assert_eq!(parse_run_file_name(Path::new("notes.edf")), None);
    }
}
