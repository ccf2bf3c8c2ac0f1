use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::spectrogram::Spectrogram;
use super::PreprocessError;

/// Floor added before the logarithm.
pub const LOG_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub band_width: f64,
    pub num_bands: usize,
}

impl Default for BandSpec {
    /// 2.5 Hz bands from 0 Hz to the 80 Hz Nyquist limit.
    fn default() -> Self {
        Self { band_width: 2.5, num_bands: 32 }
    }
}

impl BandSpec {
    /// Bin ranges per band. The bins left over at the top (the Nyquist bin
    /// for an even transform) are folded into the last band.
    pub fn layout(&self, bins: usize, bin_hz: f64) -> Result<Vec<std::ops::Range<usize>>, PreprocessError> {
        let incompatible = || PreprocessError::IncompatibleBandWidth { band_width: self.band_width, bin_hz };
        let ratio = self.band_width / bin_hz;
        let per_band = ratio.round() as usize;
        if per_band == 0 || (ratio - per_band as f64).abs() > 1e-9 || self.num_bands == 0 {
            return Err(incompatible());
        }
        let covered = per_band * self.num_bands;
        if covered > bins || bins - covered > per_band {
            return Err(incompatible());
        }
        Ok((0..self.num_bands)
            .map(|i| {
                let end = if i + 1 == self.num_bands { bins } else { (i + 1) * per_band };
                i * per_band..end
            })
            .collect())
    }
}

/// Mean power per band, `[bands, frames]`.
///
/// With 1.25 Hz bins, band `i` averages bins `2i` and `2i+1`; band 31 also
/// takes the Nyquist bin 64 and averages three bins.
pub fn band_average(spec: &Spectrogram, bands: &BandSpec) -> Result<Array2<f64>, PreprocessError> {
    let (bins, frames) = spec.power.dim();
    let layout = bands.layout(bins, spec.bin_hz)?;
    let mut out = Array2::zeros((bands.num_bands, frames));
    for (b, range) in layout.iter().enumerate() {
        let n = range.len() as f64;
        for t in 0..frames {
            out[[b, t]] = range.clone().map(|k| spec.power[[k, t]]).sum::<f64>() / n;
        }
    }
    Ok(out)
}

/// Per frame: `RP_i = P_i / sum_j P_j`, output `ln(RP_i + LOG_EPS)`.
///
/// Frames whose total power is at most `LOG_EPS * bands` are rejected.
pub fn relative_log_power(banded: &Array2<f64>) -> Result<Array2<f64>, PreprocessError> {
    let (n_bands, frames) = banded.dim();
    let mut out = Array2::zeros((n_bands, frames));
    for t in 0..frames {
        let col = banded.column(t);
        let total: f64 = col.sum();
        if !(total > LOG_EPS * n_bands as f64) {
            return Err(PreprocessError::DegenerateFrame { channel: None, frame: t });
        }
        for (i, p) in col.iter().enumerate() {
            out[[i, t]] = (p / total + LOG_EPS).ln();
        }
    }
    Ok(out)
}
