//! Parse an EDF+ recording and cut it into trials.
//!
//! `cargo run --example parse_edf -- [path/to/S001R04.edf]`
//! Without a path a synthetic imagery run is generated in memory.

use std::error::Error;

use eegline::dataset::{parse_run_file_name, segment_trials, RawRecording};
use eegline::edf::parse_edf;
use eegline::synth::{synth_edf, SynthSpec};

fn main() -> Result<(), Box<dyn Error>> {
    let (bytes, subject, run) = match std::env::args_os().nth(1) {
        Some(path) => {
            let path = std::path::PathBuf::from(path);
            let (subject, run) = parse_run_file_name(&path).ok_or("file name must look like S001R04.edf")?;
            (std::fs::read(&path)?, subject, run)
        }
        None => (synth_edf(&SynthSpec { events_per_run: 4, ..Default::default() }, 0, 4)?, "S001".to_string(), 4),
    };

    let file = parse_edf(&bytes)?;
    let h = &file.header;
    println!("{} bytes, version {:?}, reserved field {:?}", bytes.len(), h.version, h.reserved);
    println!("patient  {:?}\nrecording {:?}", h.patient_id, h.recording_id);
    println!("{} records of {} s, {} signals", h.num_records, h.record_duration, h.num_signals);
    for sig in file.data_headers().take(3) {
        println!(
            "  {:<8} {} [{}, {}] digital [{}, {}], {} samples/record",
            sig.label, sig.physical_dim, sig.phys_min, sig.phys_max, sig.dig_min, sig.dig_max, sig.samples_per_record
        );
    }
    if file.channels.len() > 3 {
        println!("  ... {} more", file.channels.len() - 3);
    }
    for a in file.annotations.iter().take(8) {
        println!("  {:>7.2} s  {:>4.1} s  {}", a.onset, a.duration, a.label);
    }

    let rec = RawRecording::from_edf(file, subject, run)?;
    let trials = segment_trials(&rec);
    println!("run {run}: {} trials of {} samples", trials.len(), trials.first().map_or(0, |t| t.data.ncols()));
    for t in &trials {
        println!("  {} at {:.2} s -> {:?}", t.event_label, t.onset, t.class);
    }
    Ok(())
}
