//! Trial to feature-tensor transform: 3-30 Hz zero-phase bandpass, Hann
//! spectrogram, 2.5 Hz band averaging and per-frame log relative power.

pub mod bands;
pub mod cache;
pub mod features;
pub mod filter;
pub mod spectrogram;

pub use bands::{band_average, relative_log_power, BandSpec, LOG_EPS};
pub use cache::{read_cache, CacheError, CacheRecord, CacheWriter};
pub use features::{build_tensor, build_tensors, FeaturePipeline, FeatureTensor, NUM_BANDS, NUM_FRAMES};
pub use filter::{apply_filter, design_bandpass, BandpassFilter, Biquad, FilterMode, FilterSpec};
pub use spectrogram::{stft_power, Spectrogram, SpectrogramSpec, Stft, Window};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("invalid band {low}-{high} Hz at fs {fs} Hz")]
    InvalidBand { low: f64, high: f64, fs: f64 },
    #[error("signal of {len} samples is too short (need at least {min})")]
    SignalTooShort { len: usize, min: usize },
    #[error("band width {band_width} Hz is not a whole number of {bin_hz} Hz bins")]
    IncompatibleBandWidth { band_width: f64, bin_hz: f64 },
    #[error("degenerate frame {frame}{}", channel.map(|c| format!(" on channel {c}")).unwrap_or_default())]
    DegenerateFrame { channel: Option<usize>, frame: usize },
    #[error("invalid spectrogram settings: {0}")]
    InvalidSpectrogram(String),
    #[error("shape: {0}")]
    Shape(String),
}
