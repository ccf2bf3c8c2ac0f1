//! Feature tensor of one trial: per electrode, 32 bands of 2.5 Hz by 67
//! frames of log relative power. Prints the band profile of one electrode.
//!
//! `cargo run --example spectro_features`

use std::error::Error;

use eegline::dataset::{segment_trials, RawRecording};
use eegline::edf::parse_edf;
use eegline::preprocess::{build_tensor, FeaturePipeline};
use eegline::synth::{synth_edf, SynthSpec};

fn main() -> Result<(), Box<dyn Error>> {
    let spec = SynthSpec { events_per_run: 2, ..Default::default() };
    for run in [3u8, 4] {
        let rec = RawRecording::from_edf(parse_edf(&synth_edf(&spec, 0, run)?)?, "S001", run)?;
        let trial = &segment_trials(&rec)[0];
        let tensor = build_tensor(trial)?;
        let (c, b, f) = tensor.shape();
        println!("run {run} ({:?}): tensor {c} x {b} x {f}", trial.class);

        // mean over frames for the last electrode, where the burst gain is highest
        let electrode = c - 1;
        let profile: Vec<f64> = (0..b).map(|band| (0..f).map(|t| tensor.values[[electrode, band, t]]).sum::<f64>() / f as f64).collect();
        let peak = profile.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).map(|(i, _)| i).unwrap_or(0);
        println!("  strongest band {peak}: {:.1}-{:.1} Hz", peak as f64 * 2.5, (peak + 1) as f64 * 2.5);
        for (band, v) in profile.iter().enumerate().take(16) {
            let bar = "#".repeat(((v + 14.0).max(0.0) * 3.0) as usize);
            println!("  {:>5.1} Hz {v:>7.2} {bar}", band as f64 * 2.5);
        }
    }
    let filter = FeaturePipeline::standard().filter();
    println!("bandpass {}-{} Hz", filter.spec.low_cut, filter.spec.high_cut);
    Ok(())
}
