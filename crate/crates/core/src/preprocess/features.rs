use std::sync::OnceLock;

use ndarray::{Array2, Array3, Axis};
use rayon::prelude::*;

use super::bands::{band_average, relative_log_power, BandSpec};
use super::filter::{apply_filter, design_bandpass, BandpassFilter, FilterSpec};
use super::spectrogram::{SpectrogramSpec, Stft};
use super::PreprocessError;
use crate::dataset::Trial;

/// Bands x frames produced for one 656-sample channel.
pub const NUM_BANDS: usize = 32;
pub const NUM_FRAMES: usize = 67;

/// `[channels, bands, frames]` log relative power.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub values: Array3<f64>,
}

impl FeatureTensor {
    pub fn shape(&self) -> (usize, usize, usize) {
        self.values.dim()
    }

    /// Row-major flattening at `f32`, the cache and training layout.
    pub fn to_f32(&self) -> Vec<f32> {
        self.values.iter().map(|&v| v as f32).collect()
    }
}

/// Filter, spectrogram and banding settings bundled with the designed filter
/// and planned transform.
#[derive(Debug, Clone)]
pub struct FeaturePipeline {
    filter: BandpassFilter,
    stft: Stft,
    bands: BandSpec,
}

impl FeaturePipeline {
    pub fn new(filter: FilterSpec, spectrogram: SpectrogramSpec, bands: BandSpec) -> Result<Self, PreprocessError> {
        Ok(Self { filter: design_bandpass(&filter)?, stft: Stft::new(spectrogram)?, bands })
    }

    /// 3-30 Hz, Hann 128/8, 2.5 Hz bands.
    pub fn standard() -> &'static FeaturePipeline {
        static PIPELINE: OnceLock<FeaturePipeline> = OnceLock::new();
        PIPELINE.get_or_init(|| {
            FeaturePipeline::new(FilterSpec::default(), SpectrogramSpec::default(), BandSpec::default())
                .expect("default preprocessing settings are valid")
        })
    }

    pub fn filter(&self) -> &BandpassFilter {
        &self.filter
    }

    /// `[bands, frames]` for one channel.
    pub fn channel_features(&self, signal: &[f64]) -> Result<Array2<f64>, PreprocessError> {
        let filtered = apply_filter(signal, &self.filter)?;
        let spec = self.stft.power(&filtered)?;
        relative_log_power(&band_average(&spec, &self.bands)?)
    }

    /// Runs every channel of `data` (`[channels, samples]`) and stacks the results.
    pub fn build(&self, data: &Array2<f64>) -> Result<FeatureTensor, PreprocessError> {
        let per_channel: Vec<Array2<f64>> = data
            .axis_iter(Axis(0))
            .enumerate()
            .map(|(c, row)| {
                let signal = row.to_vec();
                self.channel_features(&signal).map_err(|e| match e {
                    PreprocessError::DegenerateFrame { frame, .. } => {
                        PreprocessError::DegenerateFrame { channel: Some(c), frame }
                    }
                    other => other,
                })
            })
            .collect::<Result<_, _>>()?;
        let views: Vec<_> = per_channel.iter().map(|a| a.view()).collect();
        let values = ndarray::stack(Axis(0), &views).map_err(|e| PreprocessError::Shape(e.to_string()))?;
        Ok(FeatureTensor { values })
    }
}

/// Feature tensor of one trial with the standard pipeline.
pub fn build_tensor(trial: &Trial) -> Result<FeatureTensor, PreprocessError> {
    FeaturePipeline::standard().build(&trial.data)
}

/// [`build_tensor`] over many trials in parallel; results keep input order.
pub fn build_tensors(trials: &[Trial]) -> Vec<Result<FeatureTensor, PreprocessError>> {
    trials.par_iter().map(build_tensor).collect()
}
