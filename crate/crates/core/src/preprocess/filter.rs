//! Butterworth bandpass design (bilinear transform) and zero-phase filtering
//! with cascaded second-order sections.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::PreprocessError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FilterMode {
    /// Filter forwards, then backwards over the result.
    ForwardBackward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub low_cut: f64,
    pub high_cut: f64,
    pub fs: f64,
    /// Order of the lowpass prototype; the bandpass has twice as many poles.
    pub order: usize,
    pub mode: FilterMode,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self { low_cut: 3.0, high_cut: 30.0, fs: 160.0, order: 4, mode: FilterMode::ForwardBackward }
    }
}

impl FilterSpec {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        let ok = self.order >= 1
            && self.low_cut > 0.0
            && self.low_cut < self.high_cut
            && self.high_cut < self.fs / 2.0;
        if ok {
            Ok(())
        } else {
            Err(PreprocessError::InvalidBand {
                low: self.low_cut,
                high: self.high_cut,
                fs: self.fs,
            })
        }
    }
}

/// Second-order section, `a[0]` normalised to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + self.b[1] * z_inv + self.b[2] * z2) / (self.a[0] + self.a[1] * z_inv + self.a[2] * z2)
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2])
    }

    /// Transposed direct-form II state reached after a long run of input `x`.
    fn steady_state(&self, x: f64) -> [f64; 2] {
        let y = self.dc_gain() * x;
        let z1 = self.b[2] * x - self.a[2] * y;
        let z0 = self.b[1] * x - self.a[1] * y + z1;
        [z0, z1]
    }

    #[inline]
    fn step(&self, x: f64, z: &mut [f64; 2]) -> f64 {
        let y = self.b[0] * x + z[0];
        z[0] = self.b[1] * x - self.a[1] * y + z[1];
        z[1] = self.b[2] * x - self.a[2] * y;
        y
    }
}

/// Cascade of biquads implementing one bandpass.
#[derive(Debug, Clone, PartialEq)]
pub struct BandpassFilter {
    pub spec: FilterSpec,
    pub sections: Vec<Biquad>,
}

impl BandpassFilter {
    /// `|H(e^{j 2 pi f / fs})|` of a single pass.
    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * freq_hz / self.spec.fs;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections.iter().map(|s| s.response(z_inv)).product::<Complex64>().norm()
    }

    /// Samples needed for the slowest pole's start-up transient to decay
    /// below `1e-12`.
    pub fn settle_len(&self) -> usize {
        let slowest = self
            .sections
            .iter()
            .map(|s| s.a[2].abs().sqrt())
            .fold(0.0f64, f64::max)
            .clamp(f64::MIN_POSITIVE, 1.0 - 1e-15);
        (1e-12f64.ln() / slowest.ln()).ceil() as usize
    }

    /// Edge padding used by [`apply_filter`] for a signal of `len` samples:
    /// the settling length, limited to what an odd reflection can supply,
    /// and never less than `3 * order`.
    pub fn pad_len(&self, len: usize) -> usize {
        self.settle_len().min(len.saturating_sub(1)).max(self.min_pad())
    }

    fn min_pad(&self) -> usize {
        3 * self.spec.order
    }

    fn run(&self, x: &mut [f64]) {
        let mut level = x[0];
        for s in &self.sections {
            let mut z = s.steady_state(level);
            for v in x.iter_mut() {
                *v = s.step(*v, &mut z);
            }
            level *= s.dc_gain();
        }
    }
}

/// Designs a Butterworth bandpass as cascaded biquads.
///
/// The analog lowpass prototype is shifted to the prewarped band edges and
/// mapped with the bilinear transform; gain is normalised to 1 at the
/// digital image of the analog centre frequency.
pub fn design_bandpass(spec: &FilterSpec) -> Result<BandpassFilter, PreprocessError> {
    spec.validate()?;
    let n = spec.order;
    let fs2 = 2.0 * spec.fs;
    let warp = |f: f64| fs2 * (std::f64::consts::PI * f / spec.fs).tan();
    let (w1, w2) = (warp(spec.low_cut), warp(spec.high_cut));
    let w0 = (w1 * w2).sqrt();
    let bw = w2 - w1;

    let mut poles = Vec::with_capacity(2 * n);
    for k in 0..n {
        let theta = std::f64::consts::PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
        let p = Complex64::from_polar(1.0, theta) * bw;
        let root = (p * p - 4.0 * w0 * w0).sqrt();
        for s in [(p + root) / 2.0, (p - root) / 2.0] {
            poles.push((fs2 + s) / (fs2 - s));
        }
    }

    let eps = 1e-12;
    let mut sections: Vec<Biquad> = poles
        .iter()
        .filter(|z| z.im > eps)
        .map(|z| Biquad { b: [1.0, 0.0, -1.0], a: [1.0, -2.0 * z.re, z.norm_sqr()] })
        .collect();
    let mut real: Vec<f64> = poles.iter().filter(|z| z.im.abs() <= eps).map(|z| z.re).collect();
    real.sort_by(f64::total_cmp);
    for pair in real.chunks(2) {
        let (r1, r2) = (pair[0], pair.get(1).copied().unwrap_or(0.0));
        sections.push(Biquad { b: [1.0, 0.0, -1.0], a: [1.0, -(r1 + r2), r1 * r2] });
    }

    let mut filter = BandpassFilter { spec: *spec, sections };
    let centre = spec.fs / std::f64::consts::PI * (w0 / fs2).atan();
    let g = filter.magnitude(centre);
    let per_section = g.powf(-1.0 / filter.sections.len() as f64);
    for s in &mut filter.sections {
        for b in &mut s.b {
            *b *= per_section;
        }
    }
    Ok(filter)
}

/// Zero-phase forward-backward filtering.
///
/// The signal is extended at both ends by an odd reflection of
/// [`BandpassFilter::pad_len`] samples and each pass starts from the
/// steady state of its first input sample. The padding is trimmed, so the
/// output has the input's length and the squared magnitude response.
pub fn apply_filter(signal: &[f64], filter: &BandpassFilter) -> Result<Vec<f64>, PreprocessError> {
    let n = signal.len();
    if n <= filter.min_pad() {
        return Err(PreprocessError::SignalTooShort { len: n, min: filter.min_pad() + 1 });
    }
    let pad = filter.pad_len(n);
    let (first, last) = (signal[0], signal[n - 1]);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - signal[i]));
    ext.extend_from_slice(signal);
    ext.extend((1..=pad).map(|i| 2.0 * last - signal[n - 1 - i]));

    filter.run(&mut ext);
    ext.reverse();
    filter.run(&mut ext);
    ext.reverse();
    Ok(ext[pad..pad + n].to_vec())
}
