//! Synthetic motor-task recordings with a known answer.
//!
//! Every file holds 64 channels of Gaussian background noise at 160 Hz.
//! During each T1/T2 event a sinusoidal burst is added whose frequency
//! depends on the run's class: `real_hz` in executed-movement runs,
//! `imagined_hz` in imagery runs. Events alternate with T0 rest periods.

use std::f64::consts::PI;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{classify_run, TaskKind, NUM_CHANNELS, SAMPLE_RATE, TRIAL_SECONDS};
use crate::edf::{write_edf, Annotation, EdfDocument, EdfError, WriteSignal};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub subjects: usize,
    pub runs: Vec<u8>,
    /// T1/T2 events per task run.
    pub events_per_run: usize,
    pub seed: u64,
    pub real_hz: f64,
    pub imagined_hz: f64,
    /// Background noise standard deviation, microvolts.
    pub noise_uv: f64,
    /// Burst amplitude, microvolts.
    pub burst_uv: f64,
    /// Rest (T0) length between events, seconds.
    pub rest_seconds: f64,
}

impl Default for SynthSpec {
    /// 10 subjects x runs 3 and 4 x 20 events = 400 trials, half per class.
    fn default() -> Self {
        Self {
            subjects: 10,
            runs: vec![3, 4],
            events_per_run: 20,
            seed: 7,
            real_hz: 10.0,
            imagined_hz: 20.0,
            noise_uv: 10.0,
            burst_uv: 15.0,
            rest_seconds: 1.5,
        }
    }
}

impl SynthSpec {
    pub fn trial_count(&self) -> usize {
        let task_runs = self
            .runs
            .iter()
            .filter(|&&r| matches!(classify_run(r), Ok(TaskKind::RealMovement | TaskKind::ImaginedMovement)))
            .count();
        self.subjects * task_runs * self.events_per_run
    }
}

pub fn subject_id(index: usize) -> String {
    format!("S{:03}", index + 1)
}

pub fn file_name(subject: &str, run: u8) -> String {
    format!("{subject}R{run:02}.edf")
}

fn burst_hz(spec: &SynthSpec, run: u8) -> Option<f64> {
    match classify_run(run).ok()? {
        TaskKind::RealMovement => Some(spec.real_hz),
        TaskKind::ImaginedMovement => Some(spec.imagined_hz),
        TaskKind::Baseline => None,
    }
}

/// One recording as an EDF+C document. Baseline runs get a single T0 event.
pub fn synth_document(spec: &SynthSpec, subject_index: usize, run: u8) -> EdfDocument {
    let fs = SAMPLE_RATE;
    let event_len = TRIAL_SECONDS;
    let block = spec.rest_seconds + event_len;
    let hz = burst_hz(spec, run);
    let events = if hz.is_some() { spec.events_per_run } else { 0 };
    // whole seconds so the file is a whole number of 1 s records
    let seconds = ((events as f64 * block + spec.rest_seconds + 1.0).ceil() as usize).max(4);
    let total = seconds * fs as usize;

    let stream = (subject_index as u64) << 8 | run as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);
    let noise = Normal::new(0.0, spec.noise_uv).expect("finite noise level");

    let mut annotations = Vec::new();
    let mut windows = Vec::new();
    for e in 0..events {
        // microsecond grid keeps the TAL text short
        let rest_at = (e as f64 * block * 1e6).round() / 1e6;
        annotations.push(Annotation { onset: rest_at, duration: spec.rest_seconds, label: "T0".into() });
        let onset = ((rest_at + spec.rest_seconds) * 1e6).round() / 1e6;
        let label = if e % 2 == 0 { "T1" } else { "T2" };
        annotations.push(Annotation { onset, duration: event_len, label: label.into() });
        windows.push(((onset * fs).round() as usize, (event_len * fs).round() as usize));
    }
    if events == 0 {
        annotations.push(Annotation { onset: 0.0, duration: seconds as f64, label: "T0".into() });
    }

    let mut signals = Vec::with_capacity(NUM_CHANNELS);
    for ch in 0..NUM_CHANNELS {
        let mut samples: Vec<f64> = (0..total).map(|_| noise.sample(&mut rng)).collect();
        if let Some(hz) = hz {
            let gain = 0.6 + 0.8 * (ch as f64 / NUM_CHANNELS as f64);
            for &(start, len) in &windows {
                let phase = rng.random_range(0.0..2.0 * PI);
                let amp = spec.burst_uv * gain * rng.random_range(0.8..1.2);
                for i in 0..len.min(total - start) {
                    // Hann envelope keeps the burst inside the event window
                    let env = 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos();
                    samples[start + i] += amp * env * (2.0 * PI * hz * i as f64 / fs + phase).sin();
                }
            }
        }
        signals.push(WriteSignal {
            label: format!("Ch{:02}.", ch + 1),
            transducer: String::new(),
            physical_dim: "uV".into(),
            phys_min: -1000.0,
            phys_max: 1000.0,
            dig_min: -32768,
            dig_max: 32767,
            prefilter: String::new(),
            samples_per_record: fs as usize,
            samples,
        });
    }
    EdfDocument {
        patient_id: "X X X X".into(),
        recording_id: format!("Startdate 01-JAN-2024 X X synthetic-{}-R{run:02}", subject_id(subject_index)),
        start_date: "01.01.24".into(),
        start_time: "00.00.00".into(),
        record_duration: 1.0,
        signals,
        annotations: Some(annotations),
    }
}

pub fn synth_edf(spec: &SynthSpec, subject_index: usize, run: u8) -> Result<Vec<u8>, EdfError> {
    write_edf(&synth_document(spec, subject_index, run))
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error(transparent)]
    Edf(#[from] EdfError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// Writes `<dir>/S###/S###R##.edf` for every subject and run; returns the
/// written paths.
pub fn write_corpus(spec: &SynthSpec, dir: &Path) -> Result<Vec<PathBuf>, SynthError> {
    let mut paths = Vec::new();
    for s in 0..spec.subjects {
        let subject = subject_id(s);
        let sub_dir = dir.join(&subject);
        std::fs::create_dir_all(&sub_dir).map_err(|source| SynthError::Io { path: sub_dir.clone(), source })?;
        for &run in &spec.runs {
            let path = sub_dir.join(file_name(&subject, run));
            let bytes = synth_edf(spec, s, run)?;
            std::fs::write(&path, bytes).map_err(|source| SynthError::Io { path: path.clone(), source })?;
            paths.push(path);
        }
    }
    Ok(paths)
}
