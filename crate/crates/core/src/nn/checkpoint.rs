//! Model checkpoint (`.eegm`) file.
//!
//! ```text
//! "EEGM"                 4 bytes magic
//! version                u16 LE (= 1)
//! header length          u32 LE
//! header                 canonical JSON: {"config", "input_shape", "normalization", "seed"}
//! parameter count        u32 LE
//! per parameter:
//!   rank                 u8
//!   dims                 rank x u32 LE
//!   values               prod(dims) x f64 LE
//! ```

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{ModelConfig, Shape};
use super::model::{Model, Normalization};
use super::{NnError, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"EEGM";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a model checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u16),
    #[error("malformed checkpoint header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("checkpoint does not match its configuration: {0}")]
    Model(#[from] NnError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

// Field order is alphabetical so the serialized header is canonical.
#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    input_shape: Shape,
    normalization: Normalization,
    seed: u64,
}

pub fn write_checkpoint<W: Write>(model: &Model, mut out: W) -> Result<(), CheckpointError> {
    let header = serde_json::to_vec(&Header {
        config: model.config().clone(),
        input_shape: model.input_shape(),
        normalization: model.normalization,
        seed: model.seed(),
    })?;
    let mut buf = Vec::with_capacity(16 + header.len() + model.num_parameters() * 8);
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    buf.extend_from_slice(&(model.params().len() as u32).to_le_bytes());
    for p in model.params() {
        buf.push(p.shape().len() as u8);
        for &d in p.shape() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in p.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Model, CheckpointError> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic).map_err(|_| CheckpointError::BadMagic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut version = [0u8; 2];
    input.read_exact(&mut version)?;
    let version = u16::from_le_bytes(version);
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version(version));
    }
    let mut header = vec![0u8; read_u32(&mut input)? as usize];
    input.read_exact(&mut header)?;
    let header: Header = serde_json::from_slice(&header)?;
    let count = read_u32(&mut input)? as usize;
    let mut params = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let mut rank = [0u8; 1];
        input.read_exact(&mut rank)?;
        let mut shape = Vec::with_capacity(rank[0] as usize);
        for _ in 0..rank[0] {
            shape.push(read_u32(&mut input)? as usize);
        }
        let n: usize = shape.iter().product();
        let mut bytes = vec![0u8; n * 8];
        input.read_exact(&mut bytes)?;
        let data = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
        params.push(Tensor::new(shape, data)?);
    }
    Ok(Model::from_parts(header.config, header.input_shape, header.seed, header.normalization, params)?)
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<(), CheckpointError> {
    let mut buf = Vec::new();
    write_checkpoint(model, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Model, CheckpointError> {
    read_checkpoint(io::BufReader::new(fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_model, LayerSpec};

    fn model() -> Model {
        let config = ModelConfig {
            hidden_layers: vec![
                LayerSpec::Conv { filters: 2, kh: 2, kw: 2 },
                LayerSpec::Pool { kh: 2, kw: 2, stride: 2 },
                LayerSpec::Fc { units: 3 },
            ],
            learning_rate: 0.001,
        };
        let mut m = init_model(&config, Shape::map(3, 5, 7), 17).unwrap();
        m.normalization = Normalization { mean: -3.5, std: 2.25 };
        m
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let mut bytes = Vec::new();
        write_checkpoint(&m, &mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"EEGM");
        let back = read_checkpoint(bytes.as_slice()).unwrap();
        assert_eq!(back, m);
        let mut again = Vec::new();
        write_checkpoint(&back, &mut again).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn corrupt_inputs() {
        let mut bytes = Vec::new();
        write_checkpoint(&model(), &mut bytes).unwrap();
        assert!(matches!(read_checkpoint(&b"EEGT\x01\x00"[..]), Err(CheckpointError::BadMagic)));
        assert!(matches!(read_checkpoint(&bytes[..bytes.len() - 3]), Err(CheckpointError::Io(_))));
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(read_checkpoint(v2.as_slice()), Err(CheckpointError::Version(2))));
    }
}
