//! EDF / EDF+C serialisation. Used to build fixtures and synthetic corpora.

use super::tal::{encode_tal, encode_timekeeping};
use super::{Annotation, EdfError, SignalHeader, ANNOTATION_LABEL};

/// One data signal to be written, samples in physical units.
#[derive(Debug, Clone)]
pub struct WriteSignal {
    pub label: String,
    pub transducer: String,
    pub physical_dim: String,
    pub phys_min: f64,
    pub phys_max: f64,
    pub dig_min: i32,
    pub dig_max: i32,
    pub prefilter: String,
    pub samples_per_record: usize,
    pub samples: Vec<f64>,
}

/// A whole file to be written. `annotations: Some(..)` produces EDF+C with
/// an `EDF Annotations` signal appended after the data signals.
#[derive(Debug, Clone)]
pub struct EdfDocument {
    pub patient_id: String,
    pub recording_id: String,
    pub start_date: String,
    pub start_time: String,
    pub record_duration: f64,
    pub signals: Vec<WriteSignal>,
    pub annotations: Option<Vec<Annotation>>,
}

fn invalid(field: &'static str, value: impl Into<String>) -> EdfError {
    EdfError::MalformedHeader { field, value: value.into() }
}

fn put_text(out: &mut Vec<u8>, text: &str, width: usize, field: &'static str) -> Result<(), EdfError> {
    if !text.is_ascii() || text.len() > width {
        return Err(invalid(field, text));
    }
    out.extend(text.bytes());
    out.extend(std::iter::repeat_n(b' ', width - text.len()));
    Ok(())
}

/// Shortest decimal rendering of `v` that fits in `width` characters.
fn fit_number(v: f64, width: usize, field: &'static str) -> Result<String, EdfError> {
    let plain = format!("{v}");
    if plain.len() <= width {
        return Ok(plain);
    }
    for precision in (0..width).rev() {
        let s = format!("{v:.precision$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        if s.len() <= width {
            return Ok(s);
        }
    }
    Err(invalid(field, plain))
}

/// Serialises `doc`. Physical limits are written with at most 8 characters
/// and samples are quantised against the limits exactly as written, so a
/// parse of the output reproduces every sample within one digital step.
pub fn write_edf(doc: &EdfDocument) -> Result<Vec<u8>, EdfError> {
    if !(doc.record_duration > 0.0) {
        return Err(invalid("record_duration", doc.record_duration.to_string()));
    }
    let first = doc.signals.first().ok_or_else(|| invalid("num_signals", "0"))?;
    let num_records = first.samples.len() / first.samples_per_record.max(1);
    let mut headers: Vec<SignalHeader> = Vec::with_capacity(doc.signals.len() + 1);
    for s in &doc.signals {
        if s.samples_per_record == 0 || s.samples.len() != num_records * s.samples_per_record {
            return Err(invalid(
                "samples_per_record",
                format!("{} samples for {} per record", s.samples.len(), s.samples_per_record),
            ));
        }
        if s.dig_min < i32::from(i16::MIN) || s.dig_max > i32::from(i16::MAX) || s.dig_min >= s.dig_max {
            return Err(invalid("dig_min/dig_max", format!("{}/{}", s.dig_min, s.dig_max)));
        }
        let phys_min: f64 = fit_number(s.phys_min, 8, "phys_min")?.parse().unwrap_or(s.phys_min);
        let phys_max: f64 = fit_number(s.phys_max, 8, "phys_max")?.parse().unwrap_or(s.phys_max);
        headers.push(SignalHeader {
            label: s.label.clone(),
            transducer: s.transducer.clone(),
            physical_dim: s.physical_dim.clone(),
            phys_min,
            phys_max,
            dig_min: s.dig_min,
            dig_max: s.dig_max,
            prefilter: s.prefilter.clone(),
            samples_per_record: s.samples_per_record,
        });
    }

    // Annotation signal content, one TAL block per record.
    let tal_records: Option<Vec<Vec<u8>>> = doc.annotations.as_ref().map(|anns| {
        let mut blocks: Vec<Vec<u8>> = (0..num_records.max(1))
            .map(|r| encode_timekeeping(r as f64 * doc.record_duration))
            .collect();
        for a in anns {
            let r = ((a.onset / doc.record_duration).floor().max(0.0) as usize).min(blocks.len() - 1);
            blocks[r].extend(encode_tal(a));
        }
        blocks
    });
    if let Some(blocks) = &tal_records {
        let longest = blocks.iter().map(Vec::len).max().unwrap_or(0);
        headers.push(SignalHeader {
            label: ANNOTATION_LABEL.into(),
            transducer: String::new(),
            physical_dim: String::new(),
            phys_min: -1.0,
            phys_max: 1.0,
            dig_min: -32768,
            dig_max: 32767,
            prefilter: String::new(),
            samples_per_record: longest.div_ceil(2).max(1),
        });
    }

    let ns = headers.len();
    let header_bytes = 256 + 256 * ns;
    let mut out = Vec::with_capacity(header_bytes);
    put_text(&mut out, "0", 8, "version")?;
    put_text(&mut out, &doc.patient_id, 80, "patient_id")?;
    put_text(&mut out, &doc.recording_id, 80, "recording_id")?;
    put_text(&mut out, &doc.start_date, 8, "start_date")?;
    put_text(&mut out, &doc.start_time, 8, "start_time")?;
    put_text(&mut out, &header_bytes.to_string(), 8, "header_bytes")?;
    put_text(&mut out, if tal_records.is_some() { "EDF+C" } else { "" }, 44, "reserved")?;
    put_text(&mut out, &num_records.to_string(), 8, "num_records")?;
    put_text(&mut out, &fit_number(doc.record_duration, 8, "record_duration")?, 8, "record_duration")?;
    put_text(&mut out, &ns.to_string(), 4, "num_signals")?;

    for h in &headers {
        put_text(&mut out, &h.label, 16, "label")?;
    }
    for h in &headers {
        put_text(&mut out, &h.transducer, 80, "transducer")?;
    }
    for h in &headers {
        put_text(&mut out, &h.physical_dim, 8, "physical_dim")?;
    }
    for h in &headers {
        put_text(&mut out, &fit_number(h.phys_min, 8, "phys_min")?, 8, "phys_min")?;
    }
    for h in &headers {
        put_text(&mut out, &fit_number(h.phys_max, 8, "phys_max")?, 8, "phys_max")?;
    }
    for h in &headers {
        put_text(&mut out, &h.dig_min.to_string(), 8, "dig_min")?;
    }
    for h in &headers {
        put_text(&mut out, &h.dig_max.to_string(), 8, "dig_max")?;
    }
    for h in &headers {
        put_text(&mut out, &h.prefilter, 80, "prefilter")?;
    }
    for h in &headers {
        put_text(&mut out, &h.samples_per_record.to_string(), 8, "samples_per_record")?;
    }
    for _ in &headers {
        put_text(&mut out, "", 32, "reserved")?;
    }
    debug_assert_eq!(out.len(), header_bytes);

    for r in 0..num_records {
        for (s, h) in doc.signals.iter().zip(&headers) {
            let spr = h.samples_per_record;
            for &p in &s.samples[r * spr..(r + 1) * spr] {
                out.extend((h.to_digital(p) as i16).to_le_bytes());
            }
        }
        if let (Some(blocks), Some(h)) = (&tal_records, headers.last()) {
            let block = &blocks[r];
            out.extend(block);
            out.extend(std::iter::repeat_n(0u8, h.samples_per_record * 2 - block.len()));
        }
    }
    Ok(out)
}
