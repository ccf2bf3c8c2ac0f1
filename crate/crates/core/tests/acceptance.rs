//! One PASS/FAIL line per acceptance criterion. Runs as a plain binary so the
//! lines are always visible; exits non-zero if any gated criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use eegline::baseline::{handcrafted_config, run_pca_svm, BaselineOptions};
use eegline::dataset::ingest_dir;
use eegline::edf::{parse_annotations, parse_edf, write_edf, Annotation, EdfDocument, EdfError, WriteSignal};
use eegline::hyperopt::{
    leaderboard, render_leaderboard, run_search, LayerKind, Ledger, LedgerHeader, SearchControl, SearchOptions,
    SearchSpace, TrialRecord, TrialStatus,
};
use eegline::nn::{infer_shapes, init_model, Dataset, LayerSpec, Mode, ModelConfig, Shape, Tensor, TrainSettings};
use eegline::pipeline::{load_split, preprocess_to_cache};
use eegline::preprocess::{
    apply_filter, band_average, design_bandpass, relative_log_power, stft_power, BandSpec, FilterSpec,
    SpectrogramSpec, LOG_EPS,
};
use eegline::synth::{synth_document, write_corpus, SynthSpec};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

// ---------------------------------------------------------------- criterion 1

const PUBLISHED_TOP_FIVE: [(&str, usize, &str); 5] = [
    ("conv(61,5x5), conv(69,8x8), pool(5x5,2)", 3, "63.4"),
    ("conv(210,5x5), fc(828), dropout(0.71), fc(18)", 4, "62.23"),
    ("fc(2266)", 1, "62.2"),
    ("fc(664), fc(1025)", 2, "62.0"),
    ("pool(4x4, 2), conv(247,11x11)", 2, "61.9"),
];

/// Slides every window position explicitly instead of using a formula.
fn positions(n: usize, k: usize, stride: usize) -> usize {
    let mut count = 0;
    let mut start = 0;
    while start + k <= n {
        count += 1;
        start += stride;
    }
    count
}

fn simulate(layers: &[LayerSpec], input: (usize, usize, usize)) -> Option<Vec<Shape>> {
    let mut map = Some(input);
    let mut flat = 0;
    let mut out = Vec::new();
    for layer in layers {
        match *layer {
            LayerSpec::Conv { filters, kh, kw } => {
                let (_, h, w) = map?;
                let (oh, ow) = (positions(h, kh, 1), positions(w, kw, 1));
                if oh == 0 || ow == 0 {
                    return None;
                }
                map = Some((filters, oh, ow));
            }
            LayerSpec::Pool { kh, kw, stride } => {
                let (c, h, w) = map?;
                let (oh, ow) = (positions(h, kh, stride), positions(w, kw, stride));
                if oh == 0 || ow == 0 {
                    return None;
                }
                map = Some((c, oh, ow));
            }
            LayerSpec::Fc { units } => {
                map = None;
                flat = units;
            }
            LayerSpec::Dropout { .. } => {}
        }
        out.push(match map {
            Some((c, h, w)) => Shape::map(c, h, w),
            None => Shape::Flat(flat),
        });
    }
    out.push(Shape::Flat(2));
    Some(out)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let input = Shape::map(64, 32, 67);
    let mut configs: Vec<ModelConfig> = Vec::new();
    for (text, hidden, _) in PUBLISHED_TOP_FIVE {
        let c = ModelConfig::parse_layers(text, 0.001)?;
        ensure(c.hidden_layers.len() == hidden, || format!("{text}: {} layers", c.hidden_layers.len()))?;
        configs.push(c);
    }
    configs.push(handcrafted_config());
    for c in &configs {
        let got = infer_shapes(c, input).map_err(|e| format!("{} declared infeasible: {e}", c.render()))?;
        let want = simulate(&c.hidden_layers, (64, 32, 67)).ok_or_else(|| format!("{} infeasible in simulator", c.render()))?;
        ensure(got == want, || format!("{}: {got:?} vs {want:?}", c.render()))?;
    }
    let too_tall = ModelConfig { hidden_layers: vec![LayerSpec::Conv { filters: 4, kh: 33, kw: 3 }], learning_rate: 0.01 };
    let too_wide = ModelConfig::parse_layers("pool(5x5,2), conv(8,40x3)", 0.01)?;
    for c in [&too_tall, &too_wide] {
        ensure(infer_shapes(c, input).is_err(), || format!("{} accepted", c.render()))?;
        ensure(simulate(&c.hidden_layers, (64, 32, 67)).is_none(), || "simulator disagrees".into())?;
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("6 configs feasible, shapes match simulator, 2 oversized kernels rejected ({:.0?})", start.elapsed()))
}

// ---------------------------------------------------------------- criterion 2

fn grad_check(layers: Vec<LayerSpec>, input: Shape, mode: Mode, seed: u64) -> Result<f64, String> {
    let config = ModelConfig { hidden_layers: layers, learning_rate: 0.1 };
    let mut model = init_model(&config, input, seed).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 3;
    let dims: Vec<usize> = match input {
        Shape::Map { channels, height, width } => vec![n, channels, height, width],
        Shape::Flat(d) => vec![n, d],
    };
    let data: Vec<f64> = (0..n * input.size()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let batch = Tensor::new(dims, data).map_err(|e| e.to_string())?;
    let labels = [0, 1, 1];
    let (_, grads) = model.loss_and_grad(&batch, &labels, mode).map_err(|e| e.to_string())?;
    let h = 1e-5;
    let mut worst = 0.0f64;
    for p in 0..grads.len() {
        for i in 0..grads[p].len() {
            let orig = model.params()[p].data()[i];
            model.params_mut()[p].data_mut()[i] = orig + h;
            let (up, _) = model.loss_and_grad(&batch, &labels, mode).map_err(|e| e.to_string())?;
            model.params_mut()[p].data_mut()[i] = orig - h;
            let (down, _) = model.loss_and_grad(&batch, &labels, mode).map_err(|e| e.to_string())?;
            model.params_mut()[p].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads[p].data()[i];
            let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-7);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let cases: Vec<(&str, Vec<LayerSpec>, Shape, Mode)> = vec![
        ("conv", vec![LayerSpec::Conv { filters: 3, kh: 2, kw: 3 }], Shape::map(2, 4, 5), Mode::Eval),
        (
            "pool",
            vec![LayerSpec::Conv { filters: 2, kh: 2, kw: 2 }, LayerSpec::Pool { kh: 2, kw: 3, stride: 2 }],
            Shape::map(2, 6, 7),
            Mode::Eval,
        ),
        ("fc", vec![LayerSpec::Fc { units: 5 }, LayerSpec::Fc { units: 3 }], Shape::Flat(6), Mode::Eval),
        (
            "dropout",
            vec![LayerSpec::Fc { units: 7 }, LayerSpec::Dropout { keep_prob: 0.6 }, LayerSpec::Fc { units: 4 }],
            Shape::Flat(5),
            Mode::Train { dropout_seed: 23 },
        ),
    ];
    let mut report = Vec::new();
    for (name, layers, input, mode) in cases {
        for seed in [1, 2] {
            let worst = grad_check(layers.clone(), input, mode, seed)?;
            ensure(worst <= 1e-4, || format!("{name} seed {seed}: relative error {worst:.2e}"))?;
            if seed == 1 {
                report.push(format!("{name} {worst:.1e}"));
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!("worst relative error: {}", report.join(", ")))
}

// ---------------------------------------------------------------- criterion 3

/// Analog Butterworth bandpass magnitude at `f`, with bilinear prewarping.
fn butterworth_oracle(f: f64, spec: &FilterSpec) -> f64 {
    let warp = |hz: f64| 2.0 * spec.fs * (std::f64::consts::PI * hz / spec.fs).tan();
    let (lo, hi, w) = (warp(spec.low_cut), warp(spec.high_cut), warp(f));
    let x = (w * w - lo * hi) / (w * (hi - lo));
    1.0 / (1.0 + x.powi(2 * spec.order as i32)).sqrt()
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let fs = 160.0;
    let spec = SpectrogramSpec::default();
    ensure(spec.frames(656) == 67, || format!("{} frames", spec.frames(656)))?;

    let sine = |hz: f64, n: usize| -> Vec<f64> { (0..n).map(|i| (2.0 * std::f64::consts::PI * hz * i as f64 / fs).sin()).collect() };
    let s = stft_power(&sine(10.0, 656), &spec).map_err(|e| e.to_string())?;
    ensure(s.power.ncols() == 67, || format!("{} spectrogram frames", s.power.ncols()))?;
    for frame in s.power.columns() {
        let peak = frame.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i);
        ensure(peak == Some(8), || format!("10 Hz peak at bin {peak:?}"))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noise: Vec<f64> = (0..656).map(|_| rng.random_range(-1.0..1.0)).collect();
    let banded = band_average(&stft_power(&noise, &spec).map_err(|e| e.to_string())?, &BandSpec::default())
        .map_err(|e| e.to_string())?;
    ensure(banded.nrows() == 32, || format!("{} bands", banded.nrows()))?;
    let rlp = relative_log_power(&banded).map_err(|e| e.to_string())?;
    let mut worst_sum = 0.0f64;
    for frame in rlp.columns() {
        let total: f64 = frame.iter().map(|v| v.exp() - LOG_EPS).sum();
        worst_sum = worst_sum.max((total - 1.0).abs());
    }
    ensure(worst_sum <= 1e-9, || format!("relative power sums off by {worst_sum:.2e}"))?;

    let fspec = FilterSpec::default();
    let filter = design_bandpass(&fspec).map_err(|e| e.to_string())?;
    let oracle = butterworth_oracle(50.0, &fspec);
    let designed = filter.magnitude(50.0);
    ensure((designed - oracle).abs() <= 1e-9 + 1e-6 * oracle, || format!("|H(50)| {designed} vs oracle {oracle}"))?;
    // forward-backward squares the single-pass magnitude
    let threshold = oracle * oracle;
    ensure(threshold <= 0.03, || format!("oracle amplitude {threshold}"))?;
    let filtered = apply_filter(&sine(50.0, 656), &filter).map_err(|e| e.to_string())?;
    let peak = filtered[164..492].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    ensure(peak <= 0.03, || format!("50 Hz amplitude {peak:.5} over a trial"))?;
    // away from the edges the output settles to the oracle amplitude
    let mut steady = Vec::new();
    for (hz, oracle) in [(50.0, threshold), (12.0, butterworth_oracle(12.0, &fspec).powi(2))] {
        let long = apply_filter(&sine(hz, 8000), &filter).map_err(|e| e.to_string())?;
        let amp = long[3000..5000].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        ensure((amp - oracle).abs() <= 0.02 * oracle + 1e-6, || format!("{hz} Hz steady amplitude {amp} vs {oracle}"))?;
        steady.push(amp);
    }

    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "67 frames, 32 bands, sum err {worst_sum:.1e}, 10 Hz at bin 8, 50 Hz amplitude {peak:.5} per trial, {:.5} steady (oracle {threshold:.5})",
        steady[0]
    ))
}

// ------------------------------------------------------- shared synthetic data

struct Corpus {
    _dir: tempfile::TempDir,
    train: Dataset,
    test: Dataset,
    manifest_id: String,
    prepared_in: Duration,
}

fn corpus() -> Result<&'static Corpus, String> {
    static CORPUS: OnceLock<Result<Corpus, String>> = OnceLock::new();
    CORPUS
        .get_or_init(|| {
            let start = Instant::now();
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let data = dir.path().join("edf");
            let spec = SynthSpec::default();
            write_corpus(&spec, &data).map_err(|e| e.to_string())?;
            let (manifest, _) = ingest_dir(&data, 0.7, 1).map_err(|e| e.to_string())?;
            if manifest.trial_count != 400 {
                return Err(format!("{} trials ingested", manifest.trial_count));
            }
            let cache = dir.path().join("features.eegt");
            preprocess_to_cache(&manifest, &data, &cache).map_err(|e| e.to_string())?;
            let (manifest, train, test) = load_split(&cache, None).map_err(|e| e.to_string())?;
            Ok(Corpus { _dir: dir, train, test, manifest_id: manifest.id, prepared_in: start.elapsed() })
        })
        .as_ref()
        .map_err(Clone::clone)
}

fn synthetic_space() -> SearchSpace {
    SearchSpace {
        num_layers: [1, 2],
        layer_type_choices: vec![LayerKind::Conv, LayerKind::Pool, LayerKind::Fc, LayerKind::Dropout],
        filters: [1, 4],
        filter_size: [1, 3],
        pool_size: [2, 4],
        pool_stride: [2, 4],
        fc_units: [4, 16],
        keep_prob: [0.5, 0.95],
        learning_rate: [0.001, 0.03],
    }
}

// ---------------------------------------------------------------- criterion 4

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let c = corpus()?;
    let baseline = run_pca_svm(&c.train, &c.test, &c.manifest_id, &BaselineOptions { k: 50, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let options = SearchOptions {
        train: TrainSettings { epochs: 5, batch_size: 16, seed: 0, normalize: true },
        ..SearchOptions::new("synthetic", 11, 20)
    };
    let ledger = run_search(&synthetic_space(), &c.train, &c.test, &options, &dir.path().join("l.ndjson"), SearchControl::default())
        .map_err(|e| e.to_string())?;
    let best = ledger.best().map(|r| r.accuracy).unwrap_or(0.0);
    ensure(ledger.records.len() == 20, || format!("{} records", ledger.records.len()))?;
    ensure(best >= 0.9, || format!("search best {best:.4} < 0.90"))?;
    ensure(baseline.test_accuracy >= 0.85, || format!("PCA(50)+SVM {:.4} < 0.85", baseline.test_accuracy))?;
    let total = start.elapsed();
    within(total, Duration::from_secs(15 * 60))?;
    Ok(format!(
        "{} train / {} test trials; search best {:.4}, PCA(50)+SVM {:.4} ({:.0?} incl. {:.0?} data prep)",
        c.train.len(),
        c.test.len(),
        best,
        baseline.test_accuracy,
        total,
        c.prepared_in
    ))
}

// ---------------------------------------------------------------- criterion 5

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let c = corpus()?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let budget = 6;
    let options = SearchOptions {
        train: TrainSettings { epochs: 2, batch_size: 16, seed: 0, normalize: true },
        record_timing: false,
        ..SearchOptions::new("resume", 2024, budget)
    };
    let space = synthetic_space();
    let full = dir.path().join("full.ndjson");
    run_search(&space, &c.train, &c.test, &options, &full, SearchControl::default()).map_err(|e| e.to_string())?;

    let split = dir.path().join("split.ndjson");
    let cancel = AtomicBool::new(false);
    let mut seen = 0;
    let mut stop_half = |_: &TrialRecord| {
        seen += 1;
        if seen == budget / 2 {
            cancel.store(true, Ordering::SeqCst);
        }
    };
    let partial = run_search(
        &space,
        &c.train,
        &c.test,
        &options,
        &split,
        SearchControl { cancel: Some(&cancel), on_record: Some(&mut stop_half) },
    )
    .map_err(|e| e.to_string())?;
    ensure(partial.records.len() == budget / 2, || format!("interrupted run kept {} records", partial.records.len()))?;
    run_search(&space, &c.train, &c.test, &options, &split, SearchControl::default()).map_err(|e| e.to_string())?;

    let a = std::fs::read(&full).map_err(|e| e.to_string())?;
    let b = std::fs::read(&split).map_err(|e| e.to_string())?;
    ensure(a == b, || "resumed ledger differs from uninterrupted run".into())?;
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!("budget {budget} interrupted at {}, {} identical bytes ({:.0?})", budget / 2, a.len(), start.elapsed()))
}

// ---------------------------------------------------------------- criterion 6

fn random_document(rng: &mut ChaCha8Rng) -> EdfDocument {
    let channels = rng.random_range(1..5);
    let records = rng.random_range(1..6);
    let signals = (0..channels)
        .map(|ch| {
            let spr = rng.random_range(1..40);
            let span = rng.random_range(1.0..5000.0);
            let phys_min = rng.random_range(-span..0.0);
            let phys_max = phys_min + span;
            let samples = (0..spr * records).map(|_| rng.random_range(phys_min..phys_max)).collect();
            WriteSignal {
                label: format!("C{ch}"),
                transducer: "AgAgCl".into(),
                physical_dim: "uV".into(),
                phys_min,
                phys_max,
                dig_min: -32768,
                dig_max: 32767,
                prefilter: "HP:0.1Hz".into(),
                samples_per_record: spr,
                samples,
            }
        })
        .collect();
    let annotations = (0..rng.random_range(0..4))
        .map(|i| Annotation { onset: i as f64 * 0.5, duration: 0.25, label: format!("T{}", i % 3) })
        .collect();
    EdfDocument {
        patient_id: "P 1".into(),
        recording_id: "R 1".into(),
        start_date: "02.03.24".into(),
        start_time: "10.11.12".into(),
        record_duration: 1.0,
        signals,
        annotations: Some(annotations),
    }
}

fn round_trip(doc: &EdfDocument) -> Result<(), String> {
    let bytes = write_edf(doc).map_err(|e| e.to_string())?;
    let file = parse_edf(&bytes).map_err(|e| e.to_string())?;
    let h = &file.header;
    ensure(
        (h.patient_id.as_str(), h.recording_id.as_str(), h.start_date.as_str(), h.start_time.as_str())
            == (doc.patient_id.as_str(), doc.recording_id.as_str(), doc.start_date.as_str(), doc.start_time.as_str()),
        || format!("header text changed: {h:?}"),
    )?;
    ensure(h.record_duration == doc.record_duration, || "record duration changed".into())?;
    ensure(file.channels.len() == doc.signals.len(), || "channel count changed".into())?;
    for ((sig, hdr), samples) in doc.signals.iter().zip(file.data_headers()).zip(&file.channels) {
        ensure(
            hdr.label == sig.label
                && hdr.transducer == sig.transducer
                && hdr.physical_dim == sig.physical_dim
                && hdr.prefilter == sig.prefilter
                && hdr.dig_min == sig.dig_min
                && hdr.dig_max == sig.dig_max
                && hdr.samples_per_record == sig.samples_per_record,
            || format!("signal header changed: {hdr:?}"),
        )?;
        ensure((hdr.phys_min - sig.phys_min).abs() <= 1e-3 * sig.phys_min.abs().max(1.0), || "phys_min".into())?;
        ensure((hdr.phys_max - sig.phys_max).abs() <= 1e-3 * sig.phys_max.abs().max(1.0), || "phys_max".into())?;
        ensure(samples.len() == sig.samples.len(), || "sample count changed".into())?;
        let q = hdr.quantum();
        for (a, b) in samples.iter().zip(&sig.samples) {
            ensure((a - b).abs() <= q, || format!("sample {b} read back as {a}, quantum {q}"))?;
        }
    }
    let want = doc.annotations.as_deref().unwrap_or_default();
    ensure(file.annotations.len() == want.len(), || "annotation count changed".into())?;
    for (a, b) in file.annotations.iter().zip(want) {
        ensure(a.label == b.label && (a.onset - b.onset).abs() < 1e-9 && (a.duration - b.duration).abs() < 1e-9, || {
            format!("annotation {b:?} read back as {a:?}")
        })?;
    }
    Ok(())
}

fn mutate(base: &[u8], rng: &mut ChaCha8Rng) -> Vec<u8> {
    const ALPHABET: &[u8] = b"+-.0123456789\x14\x15\x00 Tx";
    let mut v = base.to_vec();
    for _ in 0..rng.random_range(1..5) {
        let op = rng.random_range(0..5);
        let at = if v.is_empty() { 0 } else { rng.random_range(0..v.len()) };
        match op {
            0 if !v.is_empty() => v[at] = ALPHABET[rng.random_range(0..ALPHABET.len())],
            1 if !v.is_empty() => v[at] = rng.random(),
            2 => v.insert(at.min(v.len()), ALPHABET[rng.random_range(0..ALPHABET.len())]),
            3 if !v.is_empty() => {
                v.remove(at);
            }
            _ => v.truncate(at),
        }
    }
    v
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    round_trip(&synth_document(&SynthSpec { events_per_run: 4, ..Default::default() }, 0, 4))?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        round_trip(&random_document(&mut rng))?;
    }

    let mut base = b"+0\x14\x14\x00".to_vec();
    for (onset, label) in [(0.0, "T0"), (4.2, "T1"), (8.35, "T2")] {
        base.extend_from_slice(format!("+{onset}\x154.1\x14{label}\x14\x00").as_bytes());
    }
    base.extend_from_slice(&[0; 6]);
    parse_annotations(&base).map_err(|e| format!("seed TAL rejected: {e}"))?;
    let (mut ok, mut malformed) = (0, 0);
    for i in 0..10_000 {
        let input = mutate(&base, &mut rng);
        match catch_unwind(AssertUnwindSafe(|| parse_annotations(&input))) {
            Ok(Ok(_)) => ok += 1,
            Ok(Err(EdfError::MalformedTal(_))) => malformed += 1,
            Ok(Err(e)) => return Err(format!("mutation {i} returned {e}")),
            Err(_) => return Err(format!("mutation {i} panicked on {input:?}")),
        }
    }
    Ok(format!(
        "51 documents round-trip within one quantum; 10000 TAL mutations: {ok} parsed, {malformed} MalformedTal, 0 crashes ({:.0?})",
        start.elapsed()
    ))
}

// ---------------------------------------------------------------- criterion 7

fn top_five_ledger() -> Result<Ledger, String> {
    let header = LedgerHeader {
        search_id: "table".into(),
        base_seed: 0,
        space: SearchSpace::default(),
        settings: serde_json::Value::Null,
    };
    let mut ledger = Ledger::new(header);
    // iteration order deliberately unlike the ranking, with filler below it
    let order = [3usize, 0, 4, 1, 2];
    let mut iteration = 0;
    for &row in &order {
        iteration += 1;
        ledger.records.push(filler(iteration, 0.5 + iteration as f64 * 0.001));
        iteration += 1;
        let (text, _, pct) = PUBLISHED_TOP_FIVE[row];
        ledger.records.push(TrialRecord {
            iteration,
            config: ModelConfig::parse_layers(text, 0.001)?,
            status: TrialStatus::Feasible,
            accuracy: pct.parse::<f64>().map_err(|e| e.to_string())? / 100.0,
            wall_time: 0.0,
            seed: iteration as u64,
            reason: None,
            best_epoch: Some(1),
        });
    }
    Ok(ledger)
}

fn filler(iteration: usize, accuracy: f64) -> TrialRecord {
    TrialRecord {
        iteration,
        config: ModelConfig { hidden_layers: vec![LayerSpec::Fc { units: 8 }], learning_rate: 0.01 },
        status: TrialStatus::Feasible,
        accuracy,
        wall_time: 0.0,
        seed: iteration as u64,
        reason: None,
        best_epoch: Some(1),
    }
}

fn accuracy_column(table: &str) -> Vec<String> {
    table.lines().skip(1).filter_map(|l| l.split_whitespace().last().map(str::to_string)).collect()
}

fn criterion_7() -> Outcome {
    let want: Vec<String> = PUBLISHED_TOP_FIVE.iter().map(|(_, _, p)| p.to_string()).collect();
    let ledger = top_five_ledger()?;
    let rows = leaderboard(&ledger, 5).map_err(|e| e.to_string())?;
    let table = render_leaderboard(&rows);
    ensure(accuracy_column(&table) == want, || format!("library rendering:\n{table}"))?;
    for (row, (text, hidden, _)) in rows.iter().zip(PUBLISHED_TOP_FIVE) {
        let canonical = ModelConfig::parse_layers(text, 0.001)?.render();
        ensure(row.config == canonical && row.hidden_layers == hidden, || format!("row {row:?}"))?;
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("table.ndjson");
    ledger.save(&path).map_err(|e| e.to_string())?;
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_eegline"))
        .args(["report", "--ledger"])
        .arg(&path)
        .args(["--top", "5"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.code() == Some(0), || format!("report exited {:?}", out.status.code()))?;
    let cli_table = String::from_utf8_lossy(&out.stdout).to_string();
    ensure(accuracy_column(&cli_table) == want, || format!("CLI rendering:\n{cli_table}"))?;
    Ok(format!("ordering {}", want.join(", ")))
}

// ---------------------------------------------------------------- criterion 8

fn criterion_8() -> String {
    let harness: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/full_scale.rs");
    format!(
        "not gated; long-run harness at {} (targets 63.4% search, 58.21%/95.39% hand-crafted, 56% SVM)",
        harness.strip_prefix(env!("CARGO_MANIFEST_DIR")).unwrap_or(&harness).display()
    )
}

fn main() {
    let criteria: [(u8, &str, fn() -> Outcome); 7] = [
        (1, "shape feasibility oracle", criterion_1),
        (2, "gradient checks", criterion_2),
        (3, "DSP properties", criterion_3),
        (4, "synthetic end-to-end learnability", criterion_4),
        (5, "determinism and resumability", criterion_5),
        (6, "EDF round-trip and TAL fuzz", criterion_6),
        (7, "report fidelity", criterion_7),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        let outcome = catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {n} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} FAIL  {name}: {detail}");
            }
        }
    }
    println!("criterion 8 INFO  full-corpus numbers: {}", criterion_8());
    if failed > 0 {
        std::process::exit(1);
    }
}
