//! Time-stamped Annotation Lists (TALs) carried by the EDF+ annotation signal.
//!
//! One TAL is `+onset[\x15duration]\x14[label\x14]*\x00`. The first TAL of
//! every data record only keeps time (`+t\x14\x14\x00`) and carries no label.
//! Unused bytes of the annotation signal are zero padding.

use super::{Annotation, EdfError};

const DURATION_MARK: u8 = 0x15;
const SEPARATOR: u8 = 0x14;
const TERMINATOR: u8 = 0x00;

fn malformed(msg: impl Into<String>) -> EdfError {
    EdfError::MalformedTal(msg.into())
}

fn is_decimal(s: &[u8]) -> bool {
    let mut parts = s.splitn(2, |&b| b == b'.');
    let int = parts.next().unwrap_or_default();
    let frac = parts.next();
    !int.is_empty()
        && int.iter().all(u8::is_ascii_digit)
        && frac.is_none_or(|f| !f.is_empty() && f.iter().all(u8::is_ascii_digit))
}

fn parse_decimal(s: &[u8], what: &str) -> Result<f64, EdfError> {
    if !is_decimal(s) {
        return Err(malformed(format!(
            "non-numeric {what} {:?}",
            String::from_utf8_lossy(s)
        )));
    }
    // Only ASCII digits and one dot at this point.
    std::str::from_utf8(s)
        .ok()
        .and_then(|t| t.parse::<f64>().ok())
        .filter(|v| v.is_finite())
        .ok_or_else(|| malformed(format!("unparseable {what}")))
}

fn parse_one(tal: &[u8], out: &mut Vec<Annotation>) -> Result<(), EdfError> {
    let sep = tal
        .iter()
        .position(|&b| b == SEPARATOR)
        .ok_or_else(|| malformed("missing 0x14 separator after onset"))?;
    let (timing, rest) = (&tal[..sep], &tal[sep + 1..]);

    let mut timing_parts = timing.split(|&b| b == DURATION_MARK);
    let onset_field = timing_parts.next().unwrap_or_default();
    let duration_field = timing_parts.next();
    if timing_parts.next().is_some() {
        return Err(malformed("more than one duration"));
    }

    let (sign, magnitude) = match onset_field.split_first() {
        Some((b'+', m)) => (1.0, m),
        Some((b'-', m)) => (-1.0, m),
        _ => return Err(malformed("onset must start with '+' or '-'")),
    };
    let onset = sign * parse_decimal(magnitude, "onset")?;
    if onset < 0.0 {
        return Err(malformed(format!("negative onset {onset}")));
    }
    let duration = match duration_field {
        Some(d) => parse_decimal(d, "duration")?,
        None => 0.0,
    };

    if rest.is_empty() {
        return Ok(());
    }
    if rest.last() != Some(&SEPARATOR) {
        return Err(malformed("annotation text not closed by 0x14"));
    }
    for label in rest[..rest.len() - 1].split(|&b| b == SEPARATOR) {
        if label.is_empty() {
            continue;
        }
        out.push(Annotation {
            onset,
            duration,
            label: String::from_utf8_lossy(label).into_owned(),
        });
    }
    Ok(())
}

/// Decodes the concatenated annotation-signal bytes of one or more records.
///
/// Timekeeping TALs are skipped; the result is ordered by onset (stable for
/// equal onsets).
pub fn parse_annotations(tal_bytes: &[u8]) -> Result<Vec<Annotation>, EdfError> {
    let mut out = Vec::new();
    let mut pieces = tal_bytes.split(|&b| b == TERMINATOR).peekable();
    while let Some(piece) = pieces.next() {
        if piece.is_empty() {
            continue;
        }
        if pieces.peek().is_none() {
            // Last piece without a terminating NUL.
            return Err(malformed("unterminated TAL"));
        }
        parse_one(piece, &mut out)?;
    }
    out.sort_by(|a, b| a.onset.total_cmp(&b.onset));
    Ok(out)
}

fn format_seconds(v: f64) -> String {
    // f64 Display never uses exponent notation.
    format!("{v}")
}

/// Encodes one annotation as a TAL. A zero duration is omitted.
pub fn encode_tal(a: &Annotation) -> Vec<u8> {
    let mut out = format!("+{}", format_seconds(a.onset)).into_bytes();
    if a.duration > 0.0 {
        out.push(DURATION_MARK);
        out.extend(format_seconds(a.duration).bytes());
    }
    out.push(SEPARATOR);
    out.extend(a.label.bytes());
    out.push(SEPARATOR);
    out.push(TERMINATOR);
    out
}

/// Timekeeping TAL that opens every record.
pub(crate) fn encode_timekeeping(t: f64) -> Vec<u8> {
    let mut out = format!("+{}", format_seconds(t)).into_bytes();
    out.extend([SEPARATOR, SEPARATOR, TERMINATOR]);
    out
}
