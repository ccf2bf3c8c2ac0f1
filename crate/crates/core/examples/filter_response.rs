//! Magnitude response of the 3-30 Hz bandpass, single pass and zero-phase,
//! next to the measured amplitude of filtered test tones.
//!
//! `cargo run --example filter_response`

use std::error::Error;
use std::f64::consts::PI;

use eegline::preprocess::{apply_filter, design_bandpass, FilterSpec};

fn main() -> Result<(), Box<dyn Error>> {
    let spec = FilterSpec::default();
    let filter = design_bandpass(&spec)?;
    println!(
        "order {} Butterworth bandpass {}-{} Hz at {} Hz, {} sections, edge padding {} samples",
        spec.order,
        spec.low_cut,
        spec.high_cut,
        spec.fs,
        filter.sections.len(),
        filter.settle_len()
    );
    println!("{:>6} {:>10} {:>12} {:>12}", "Hz", "|H|", "|H|^2", "measured");
    for hz in [0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 20.0, 30.0, 35.0, 40.0, 50.0, 60.0, 79.0] {
        let tone: Vec<f64> = (0..4000).map(|i| (2.0 * PI * hz * i as f64 / spec.fs).sin()).collect();
        let out = apply_filter(&tone, &filter)?;
        let measured = out[1500..2500].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let h = filter.magnitude(hz);
        println!("{hz:>6.1} {h:>10.5} {:>12.6} {measured:>12.6}", h * h);
    }
    Ok(())
}
