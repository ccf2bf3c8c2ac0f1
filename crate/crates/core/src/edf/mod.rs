//! EDF / EDF+ reading and writing.
//!
//! Only the contiguous flavours are handled: plain EDF and EDF+C. The
//! annotation signal of an EDF+ file is recognised by its label
//! `EDF Annotations` and decoded into [`Annotation`]s instead of being
//! returned as a data channel.
//!
//! Layout reference: <https://www.edfplus.info/specs/edf.html> and
//! <https://www.edfplus.info/specs/edfplus.html>.

mod tal;
mod writer;

pub use tal::{encode_tal, parse_annotations};
pub use writer::{write_edf, EdfDocument, WriteSignal};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Label of the EDF+ annotation signal.
pub const ANNOTATION_LABEL: &str = "EDF Annotations";

/// Size of the fixed part of the header.
pub const MAIN_HEADER_BYTES: usize = 256;
/// Size of one per-signal header block.
pub const SIGNAL_HEADER_BYTES: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EdfError {
    #[error("TruncatedFile: need {needed} bytes, got {actual}")]
    TruncatedFile { needed: usize, actual: usize },
    #[error("MalformedHeader: field `{field}` has value {value:?}")]
    MalformedHeader { field: &'static str, value: String },
    #[error("UnsupportedVariant: {0}")]
    UnsupportedVariant(String),
    #[error("MalformedTal: {0}")]
    MalformedTal(String),
}

impl EdfError {
    /// Stable machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            EdfError::TruncatedFile { .. } => "TruncatedFile",
            EdfError::MalformedHeader { .. } => "MalformedHeader",
            EdfError::UnsupportedVariant(_) => "UnsupportedVariant",
            EdfError::MalformedTal(_) => "MalformedTal",
        }
    }
}

/// Main (file-level) header. Text fields are stored with trailing padding removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdfHeader {
    pub version: String,
    pub patient_id: String,
    pub recording_id: String,
    pub start_date: String,
    pub start_time: String,
    pub header_bytes: usize,
    /// Content of the 44-byte reserved field, `EDF+C` for EDF+ files.
    pub reserved: String,
    pub num_records: i64,
    pub record_duration: f64,
    pub num_signals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalHeader {
    pub label: String,
    pub transducer: String,
    pub physical_dim: String,
    pub phys_min: f64,
    pub phys_max: f64,
    pub dig_min: i32,
    pub dig_max: i32,
    pub prefilter: String,
    pub samples_per_record: usize,
}

impl SignalHeader {
    pub fn is_annotation(&self) -> bool {
        self.label == ANNOTATION_LABEL
    }

    /// Digital to physical conversion.
    ///
    /// Written as a linear interpolation so that `dig_min` and `dig_max`
    /// land exactly on `phys_min` and `phys_max`.
    #[inline]
    pub fn to_physical(&self, digital: i32) -> f64 {
        let t = f64::from(digital - self.dig_min) / f64::from(self.dig_max - self.dig_min);
        self.phys_min * (1.0 - t) + self.phys_max * t
    }

    /// Physical to digital conversion with rounding and clamping.
    pub fn to_digital(&self, physical: f64) -> i32 {
        let span = f64::from(self.dig_max - self.dig_min);
        let d = (physical - self.phys_min) / (self.phys_max - self.phys_min) * span
            + f64::from(self.dig_min);
        if d.is_nan() {
            return self.dig_min;
        }
        (d.round() as i64).clamp(i64::from(self.dig_min), i64::from(self.dig_max)) as i32
    }

    /// Physical size of one digital step.
    pub fn quantum(&self) -> f64 {
        (self.phys_max - self.phys_min).abs() / f64::from(self.dig_max - self.dig_min)
    }
}

/// Time-stamped annotation decoded from an EDF+ TAL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    /// Seconds since recording start.
    pub onset: f64,
    /// Seconds; zero when the TAL carried no duration.
    pub duration: f64,
    pub label: String,
}

/// Decoded file: headers, physical-unit data channels and annotations.
#[derive(Debug, Clone)]
pub struct EdfFile {
    pub header: EdfHeader,
    /// Headers of every signal in file order, annotation signals included.
    pub signals: Vec<SignalHeader>,
    /// Indices into `signals` of the data (non-annotation) channels.
    pub data_signals: Vec<usize>,
    /// One vector per data channel, parallel to `data_signals`.
    pub channels: Vec<Vec<f64>>,
    pub annotations: Vec<Annotation>,
    pub has_annotation_signal: bool,
}

impl EdfFile {
    pub fn data_headers(&self) -> impl Iterator<Item = &SignalHeader> {
        self.data_signals.iter().map(|&i| &self.signals[i])
    }

    /// Sampling rate of data signal `idx` (index into `channels`).
    pub fn sample_rate(&self, idx: usize) -> f64 {
        self.signals[self.data_signals[idx]].samples_per_record as f64 / self.header.record_duration
    }
}

fn field_text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).trim_end_matches([' ', '\0']).to_string()
}

fn parse_num<T: std::str::FromStr>(field: &'static str, bytes: &[u8]) -> Result<T, EdfError> {
    let text = field_text(bytes);
    text.trim().parse::<T>().map_err(|_| EdfError::MalformedHeader { field, value: text })
}

/// Splits a run of `n` consecutive fixed-width fields.
fn columns(bytes: &[u8], n: usize, width: usize) -> impl Iterator<Item = &[u8]> {
    bytes[..n * width].chunks_exact(width)
}

fn parse_main_header(bytes: &[u8]) -> Result<EdfHeader, EdfError> {
    if bytes.len() < MAIN_HEADER_BYTES {
        return Err(EdfError::TruncatedFile { needed: MAIN_HEADER_BYTES, actual: bytes.len() });
    }
    if bytes[0] == 0xFF {
        return Err(EdfError::UnsupportedVariant(format!(
            "BDF ({})",
            String::from_utf8_lossy(&bytes[1..8]).trim_end()
        )));
    }
    let version = field_text(&bytes[0..8]);
    if version.trim() != "0" {
        return Err(EdfError::UnsupportedVariant(format!("version {version:?}")));
    }
    let reserved = field_text(&bytes[192..236]);
    if reserved.starts_with("EDF+D") {
        return Err(EdfError::UnsupportedVariant("EDF+D (discontinuous)".into()));
    }
    let header = EdfHeader {
        version,
        patient_id: field_text(&bytes[8..88]),
        recording_id: field_text(&bytes[88..168]),
        start_date: field_text(&bytes[168..176]),
        start_time: field_text(&bytes[176..184]),
        header_bytes: parse_num("header_bytes", &bytes[184..192])?,
        reserved,
        num_records: parse_num("num_records", &bytes[236..244])?,
        record_duration: parse_num("record_duration", &bytes[244..252])?,
        num_signals: parse_num("num_signals", &bytes[252..256])?,
    };
    if header.num_signals == 0 {
        return Err(EdfError::MalformedHeader { field: "num_signals", value: "0".into() });
    }
    let expected = MAIN_HEADER_BYTES + SIGNAL_HEADER_BYTES * header.num_signals;
    if header.header_bytes != expected {
        return Err(EdfError::MalformedHeader {
            field: "header_bytes",
            value: format!("{} (expected {expected})", header.header_bytes),
        });
    }
    if header.num_records < -1 {
        return Err(EdfError::MalformedHeader {
            field: "num_records",
            value: header.num_records.to_string(),
        });
    }
    if !(header.record_duration >= 0.0) || !header.record_duration.is_finite() {
        return Err(EdfError::MalformedHeader {
            field: "record_duration",
            value: header.record_duration.to_string(),
        });
    }
    Ok(header)
}

fn parse_signal_headers(block: &[u8], ns: usize) -> Result<Vec<SignalHeader>, EdfError> {
    // Fields are stored column-wise: all labels, then all transducers, ...
    const WIDTHS: [usize; 10] = [16, 80, 8, 8, 8, 8, 8, 80, 8, 32];
    let mut offset = 0;
    let mut cols: Vec<Vec<&[u8]>> = Vec::with_capacity(WIDTHS.len());
    for w in WIDTHS {
        cols.push(columns(&block[offset..], ns, w).collect());
        offset += ns * w;
    }
    (0..ns)
        .map(|i| {
            let sig = SignalHeader {
                label: field_text(cols[0][i]).trim().to_string(),
                transducer: field_text(cols[1][i]),
                physical_dim: field_text(cols[2][i]),
                phys_min: parse_num("phys_min", cols[3][i])?,
                phys_max: parse_num("phys_max", cols[4][i])?,
                dig_min: parse_num("dig_min", cols[5][i])?,
                dig_max: parse_num("dig_max", cols[6][i])?,
                prefilter: field_text(cols[7][i]),
                samples_per_record: parse_num("samples_per_record", cols[8][i])?,
            };
            if sig.dig_min >= sig.dig_max {
                return Err(EdfError::MalformedHeader {
                    field: "dig_min/dig_max",
                    value: format!("{}/{}", sig.dig_min, sig.dig_max),
                });
            }
            if sig.phys_min == sig.phys_max || !sig.phys_min.is_finite() || !sig.phys_max.is_finite() {
                return Err(EdfError::MalformedHeader {
                    field: "phys_min/phys_max",
                    value: format!("{}/{}", sig.phys_min, sig.phys_max),
                });
            }
            if sig.samples_per_record == 0 {
                return Err(EdfError::MalformedHeader {
                    field: "samples_per_record",
                    value: "0".into(),
                });
            }
            Ok(sig)
        })
        .collect()
}

/// Decodes a complete EDF or EDF+C file held in memory.
pub fn parse_edf(bytes: &[u8]) -> Result<EdfFile, EdfError> {
    let header = parse_main_header(bytes)?;
    if bytes.len() < header.header_bytes {
        return Err(EdfError::TruncatedFile { needed: header.header_bytes, actual: bytes.len() });
    }
    let ns = header.num_signals;
    let signals = parse_signal_headers(&bytes[MAIN_HEADER_BYTES..header.header_bytes], ns)?;

    let data_signals: Vec<usize> = (0..ns).filter(|&i| !signals[i].is_annotation()).collect();
    let has_annotation_signal = data_signals.len() < ns;
    if header.record_duration == 0.0 && !data_signals.is_empty() {
        return Err(EdfError::MalformedHeader {
            field: "record_duration",
            value: "0 with data signals present".into(),
        });
    }

    let record_bytes: usize = signals.iter().map(|s| s.samples_per_record * 2).sum();
    let available = bytes.len() - header.header_bytes;
    let num_records = if header.num_records < 0 {
        available / record_bytes
    } else {
        header.num_records as usize
    };
    let needed = num_records
        .checked_mul(record_bytes)
        .and_then(|n| n.checked_add(header.header_bytes))
        .ok_or_else(|| EdfError::MalformedHeader {
            field: "num_records",
            value: header.num_records.to_string(),
        })?;
    if bytes.len() < needed {
        return Err(EdfError::TruncatedFile { needed, actual: bytes.len() });
    }

    let mut channels: Vec<Vec<f64>> = data_signals
        .iter()
        .map(|&i| Vec::with_capacity(num_records * signals[i].samples_per_record))
        .collect();
    let mut tal_bytes = Vec::new();
    let data = &bytes[header.header_bytes..needed];
    for record in data.chunks_exact(record_bytes.max(1)).take(num_records) {
        let mut pos = 0;
        let mut data_idx = 0;
        for sig in &signals {
            let len = sig.samples_per_record * 2;
            let chunk = &record[pos..pos + len];
            pos += len;
            if sig.is_annotation() {
                tal_bytes.extend_from_slice(chunk);
            } else {
                let out = &mut channels[data_idx];
                out.extend(
                    chunk
                        .chunks_exact(2)
                        .map(|b| sig.to_physical(i32::from(i16::from_le_bytes([b[0], b[1]])))),
                );
                data_idx += 1;
            }
        }
    }

    let annotations = parse_annotations(&tal_bytes)?;
    Ok(EdfFile {
        header,
        signals,
        data_signals,
        channels,
        annotations,
        has_annotation_signal,
    })
}
