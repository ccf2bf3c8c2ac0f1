//! Feature cache (`.eegt`) file.
//!
//! ```text
//! "EEGT"                      4 bytes magic
//! version                     u16 LE (= 1)
//! then, until end of file, one record per trial:
//!   subject length            u16 LE
//!   subject                   UTF-8 bytes
//!   run                       u8
//!   class                     u8 (0 = real, 1 = imagined)
//!   values                    64*32*67 f32 LE, row-major [channel][band][frame]
//! ```

use std::io::{self, Read, Write};

use thiserror::Error;

use super::features::{FeatureTensor, NUM_BANDS, NUM_FRAMES};
use crate::dataset::{TrialClass, NUM_CHANNELS};

pub const CACHE_MAGIC: &[u8; 4] = b"EEGT";
pub const CACHE_VERSION: u16 = 1;
pub const VALUES_PER_RECORD: usize = NUM_CHANNELS * NUM_BANDS * NUM_FRAMES;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("not a feature cache (bad magic)")]
    BadMagic,
    #[error("unsupported cache version {0}")]
    Version(u16),
    #[error("record {0} is truncated")]
    Truncated(usize),
    #[error("record {index}: {reason}")]
    BadRecord { index: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheRecord {
    pub subject: String,
    pub run: u8,
    pub class: TrialClass,
    /// `VALUES_PER_RECORD` values.
    pub values: Vec<f32>,
}

impl CacheRecord {
    pub fn new(subject: &str, run: u8, class: TrialClass, tensor: &FeatureTensor) -> Self {
        Self { subject: subject.to_string(), run, class, values: tensor.to_f32() }
    }
}

/// Sequential writer; records are appended in call order.
pub struct CacheWriter<W: Write> {
    out: W,
}

impl<W: Write> CacheWriter<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        out.write_all(CACHE_MAGIC)?;
        out.write_all(&CACHE_VERSION.to_le_bytes())?;
        Ok(Self { out })
    }

    pub fn append(&mut self, rec: &CacheRecord) -> Result<(), CacheError> {
        let subject = rec.subject.as_bytes();
        let len = u16::try_from(subject.len()).map_err(|_| CacheError::BadRecord {
            index: 0,
            reason: "subject id longer than 65535 bytes".into(),
        })?;
        if rec.values.len() != VALUES_PER_RECORD {
            return Err(CacheError::BadRecord {
                index: 0,
                reason: format!("{} values, expected {VALUES_PER_RECORD}", rec.values.len()),
            });
        }
        self.out.write_all(&len.to_le_bytes())?;
        self.out.write_all(subject)?;
        self.out.write_all(&[rec.run, rec.class.label() as u8])?;
        let mut buf = Vec::with_capacity(rec.values.len() * 4);
        for v in &rec.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.out.write_all(&buf)?;
        Ok(())
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

fn read_exact_or_eof<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(false),
            Ok(0) => return Err(io::ErrorKind::UnexpectedEof.into()),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

/// Reads every record of a cache stream.
pub fn read_cache<R: Read>(mut input: R) -> Result<Vec<CacheRecord>, CacheError> {
    let mut head = [0u8; 6];
    if !read_exact_or_eof(&mut input, &mut head).map_err(|_| CacheError::BadMagic)? || &head[..4] != CACHE_MAGIC {
        return Err(CacheError::BadMagic);
    }
    let version = u16::from_le_bytes([head[4], head[5]]);
    if version != CACHE_VERSION {
        return Err(CacheError::Version(version));
    }
    let mut out = Vec::new();
    let mut value_bytes = vec![0u8; VALUES_PER_RECORD * 4];
    loop {
        let index = out.len();
        let truncated = |_| CacheError::Truncated(index);
        let mut len = [0u8; 2];
        if !read_exact_or_eof(&mut input, &mut len).map_err(truncated)? {
            break;
        }
        let mut subject = vec![0u8; u16::from_le_bytes(len) as usize];
        input.read_exact(&mut subject).map_err(truncated)?;
        let mut meta = [0u8; 2];
        input.read_exact(&mut meta).map_err(truncated)?;
        input.read_exact(&mut value_bytes).map_err(truncated)?;
        let subject = String::from_utf8(subject).map_err(|e| CacheError::BadRecord {
            index,
            reason: e.to_string(),
        })?;
        let class = TrialClass::from_label(meta[1] as usize).ok_or_else(|| CacheError::BadRecord {
            index,
            reason: format!("class byte {}", meta[1]),
        })?;
        let values = value_bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        out.push(CacheRecord { subject, run: meta[0], class, values });
    }
    Ok(out)
}
