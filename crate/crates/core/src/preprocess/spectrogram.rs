use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::PreprocessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    /// Periodic Hann, `0.5 - 0.5 cos(2 pi n / N)`.
    Hann,
    Rectangular,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos())
                .collect(),
            Window::Rectangular => vec![1.0; len],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramSpec {
    pub window: Window,
    pub window_len: usize,
    pub hop: usize,
    pub nfft: usize,
    pub fs: f64,
}

impl Default for SpectrogramSpec {
    /// 0.8 s Hann frames every 0.05 s at 160 Hz, 128-point transform.
    fn default() -> Self {
        Self { window: Window::Hann, window_len: 128, hop: 8, nfft: 128, fs: 160.0 }
    }
}

impl SpectrogramSpec {
    /// Frames produced for a signal of `len` samples.
    pub fn frames(&self, len: usize) -> usize {
        if len < self.window_len {
            0
        } else {
            (len - self.window_len) / self.hop + 1
        }
    }

    pub fn bins(&self) -> usize {
        self.nfft / 2 + 1
    }

    pub fn bin_hz(&self) -> f64 {
        self.fs / self.nfft as f64
    }
}

/// One-sided power, `[bins, frames]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub power: Array2<f64>,
    pub bin_hz: f64,
}

/// Reusable short-time power transform.
#[derive(Clone)]
pub struct Stft {
    spec: SpectrogramSpec,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft").field("spec", &self.spec).finish()
    }
}

impl Stft {
    pub fn new(spec: SpectrogramSpec) -> Result<Self, PreprocessError> {
        if spec.window_len == 0 || spec.window_len > spec.nfft || spec.hop == 0 {
            return Err(PreprocessError::InvalidSpectrogram(format!(
                "window_len {} nfft {} hop {}",
                spec.window_len, spec.nfft, spec.hop
            )));
        }
        let fft = FftPlanner::new().plan_fft_forward(spec.nfft);
        Ok(Self { window: spec.window.coefficients(spec.window_len), spec, fft })
    }

    pub fn spec(&self) -> &SpectrogramSpec {
        &self.spec
    }

    /// Frame `t` covers `[t*hop, t*hop + window_len)`, windowed and
    /// zero-padded to `nfft`; power is `|X_k|^2` for `k = 0..=nfft/2`.
    pub fn power(&self, signal: &[f64]) -> Result<Spectrogram, PreprocessError> {
        let spec = &self.spec;
        if signal.len() < spec.window_len {
            return Err(PreprocessError::SignalTooShort { len: signal.len(), min: spec.window_len });
        }
        let frames = spec.frames(signal.len());
        let bins = spec.bins();
        let mut power = Array2::zeros((bins, frames));
        let mut buf = vec![Complex64::new(0.0, 0.0); spec.nfft];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for t in 0..frames {
            let frame = &signal[t * spec.hop..t * spec.hop + spec.window_len];
            for (slot, (x, w)) in buf.iter_mut().zip(frame.iter().zip(&self.window)) {
                *slot = Complex64::new(x * w, 0.0);
            }
            for slot in &mut buf[spec.window_len..] {
                *slot = Complex64::new(0.0, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for k in 0..bins {
                power[[k, t]] = buf[k].norm_sqr();
            }
        }
        Ok(Spectrogram { power, bin_hz: spec.bin_hz() })
    }
}

/// One-shot convenience over [`Stft`].
pub fn stft_power(signal: &[f64], spec: &SpectrogramSpec) -> Result<Spectrogram, PreprocessError> {
    Stft::new(*spec)?.power(signal)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_count() {
        let spec = SpectrogramSpec::default();
        assert_eq!(spec.frames(656), 67);
        assert_eq!(spec.frames(128), 1);
        assert_eq!(spec.frames(135), 1);
        assert_eq!(spec.frames(136), 2);
        let s = stft_power(&vec![0.5; 656], &spec).unwrap();
        assert_eq!(s.power.dim(), (65, 67));
        assert_eq!(s.bin_hz, 1.25);
    }

    #[test]
    fn constant_signal_stays_in_dc() {
        let s = stft_power(&vec![3.0; 656], &SpectrogramSpec::default()).unwrap();
        for t in 0..67 {
            let dc = s.power[[0, t]];
            assert!(dc > 0.0);
            for k in 2..65 {
                assert!(s.power[[k, t]] < 1e-20 * dc, "bin {k} frame {t}");
            }
        }
    }

    #[test]
    fn ten_hz_peaks_at_bin_eight() {
        let x: Vec<f64> = (0..656)
            .map(|i| (2.0 * std::f64::consts::PI * 10.0 * i as f64 / 160.0).sin())
            .collect();
        let s = stft_power(&x, &SpectrogramSpec::default()).unwrap();
        for t in 0..67 {
            let col = s.power.column(t);
            let argmax = (0..65).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap();
            assert_eq!(argmax, 8);
        }
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            stft_power(&[0.0; 127], &SpectrogramSpec::default()),
            Err(PreprocessError::SignalTooShort { len: 127, min: 128 })
        ));
    }
}
