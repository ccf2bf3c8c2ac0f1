//! Batched layer kernels over flat row-major buffers.
//!
//! Work is split across rayon threads by output row only, and every sum is
//! accumulated in a fixed order, so results do not depend on thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Geometry of one convolution: input `[c, h, w]`, `f` filters of `kh x kw`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvDims {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub f: usize,
    pub kh: usize,
    pub kw: usize,
}

impl ConvDims {
    pub fn out_hw(&self) -> (usize, usize) {
        (self.h - self.kh + 1, self.w - self.kw + 1)
    }
    fn in_size(&self) -> usize {
        self.c * self.h * self.w
    }
    fn kernel_size(&self) -> usize {
        self.c * self.kh * self.kw
    }
}

pub(crate) fn conv_forward(x: &[f64], n: usize, d: ConvDims, weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let (oh, ow) = d.out_hw();
    let plane = oh * ow;
    let mut out = vec![0.0; n * d.f * plane];
    out.par_chunks_mut(plane).enumerate().for_each(|(idx, o)| {
        let (b, fi) = (idx / d.f, idx % d.f);
        o.fill(bias[fi]);
        let xb = &x[b * d.in_size()..(b + 1) * d.in_size()];
        let wf = &weight[fi * d.kernel_size()..(fi + 1) * d.kernel_size()];
        for ci in 0..d.c {
            let xc = &xb[ci * d.h * d.w..(ci + 1) * d.h * d.w];
            for i in 0..d.kh {
                for j in 0..d.kw {
                    let wv = wf[(ci * d.kh + i) * d.kw + j];
                    for r in 0..oh {
                        let start = (r + i) * d.w + j;
                        axpy(wv, &xc[start..start + ow], &mut o[r * ow..(r + 1) * ow]);
                    }
                }
            }
        }
    });
    out
}

/// Returns `(dx, dweight, dbias)`; `dx` is skipped when not needed.
pub(crate) fn conv_backward(
    x: &[f64],
    dy: &[f64],
    n: usize,
    d: ConvDims,
    weight: &[f64],
    need_dx: bool,
) -> (Option<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let (oh, ow) = d.out_hw();
    let plane = oh * ow;
    let ks = d.kernel_size();

    let mut dw = vec![0.0; d.f * ks];
    dw.par_chunks_mut(ks).enumerate().for_each(|(fi, g)| {
        for b in 0..n {
            let dyp = &dy[(b * d.f + fi) * plane..(b * d.f + fi + 1) * plane];
            let xb = &x[b * d.in_size()..(b + 1) * d.in_size()];
            for ci in 0..d.c {
                let xc = &xb[ci * d.h * d.w..(ci + 1) * d.h * d.w];
                for i in 0..d.kh {
                    for j in 0..d.kw {
                        let mut acc = 0.0;
                        for r in 0..oh {
                            let start = (r + i) * d.w + j;
                            acc += dot(&dyp[r * ow..(r + 1) * ow], &xc[start..start + ow]);
                        }
                        g[(ci * d.kh + i) * d.kw + j] += acc;
                    }
                }
            }
        }
    });

    let mut db = vec![0.0; d.f];
    for (fi, g) in db.iter_mut().enumerate() {
        for b in 0..n {
            *g += dy[(b * d.f + fi) * plane..(b * d.f + fi + 1) * plane].iter().sum::<f64>();
        }
    }

    let dx = need_dx.then(|| {
        let mut dx = vec![0.0; n * d.in_size()];
        dx.par_chunks_mut(d.in_size()).enumerate().for_each(|(b, g)| {
            for fi in 0..d.f {
                let dyp = &dy[(b * d.f + fi) * plane..(b * d.f + fi + 1) * plane];
                let wf = &weight[fi * ks..(fi + 1) * ks];
                for ci in 0..d.c {
                    let gc = &mut g[ci * d.h * d.w..(ci + 1) * d.h * d.w];
                    for i in 0..d.kh {
                        for j in 0..d.kw {
                            let wv = wf[(ci * d.kh + i) * d.kw + j];
                            for r in 0..oh {
                                let start = (r + i) * d.w + j;
                                axpy(wv, &dyp[r * ow..(r + 1) * ow], &mut gc[start..start + ow]);
                            }
                        }
                    }
                }
            }
        });
        dx
    });
    (dx, dw, db)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PoolDims {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
}

impl PoolDims {
    pub fn out_hw(&self) -> (usize, usize) {
        ((self.h - self.kh) / self.stride + 1, (self.w - self.kw) / self.stride + 1)
    }
}

/// Max pooling. Also returns, per output, the in-plane index of the first
/// (row-major) maximal input.
pub(crate) fn pool_forward(x: &[f64], n: usize, d: PoolDims) -> (Vec<f64>, Vec<u32>) {
    let (oh, ow) = d.out_hw();
    let (in_plane, out_plane) = (d.h * d.w, oh * ow);
    let mut out = vec![0.0; n * d.c * out_plane];
    let mut arg = vec![0u32; n * d.c * out_plane];
    out.par_chunks_mut(out_plane)
        .zip(arg.par_chunks_mut(out_plane))
        .enumerate()
        .for_each(|(p, (o, a))| {
            let xp = &x[p * in_plane..(p + 1) * in_plane];
            for r in 0..oh {
                for col in 0..ow {
                    let (r0, c0) = (r * d.stride, col * d.stride);
                    let mut best_idx = r0 * d.w + c0;
                    let mut best = xp[best_idx];
                    for i in 0..d.kh {
                        for j in 0..d.kw {
                            let idx = (r0 + i) * d.w + c0 + j;
                            if xp[idx] > best {
                                best = xp[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    o[r * ow + col] = best;
                    a[r * ow + col] = best_idx as u32;
                }
            }
        });
    (out, arg)
}

pub(crate) fn pool_backward(dy: &[f64], arg: &[u32], n: usize, d: PoolDims) -> Vec<f64> {
    let (oh, ow) = d.out_hw();
    let (in_plane, out_plane) = (d.h * d.w, oh * ow);
    let mut dx = vec![0.0; n * d.c * in_plane];
    dx.par_chunks_mut(in_plane).enumerate().for_each(|(p, g)| {
        let dyp = &dy[p * out_plane..(p + 1) * out_plane];
        let ap = &arg[p * out_plane..(p + 1) * out_plane];
        for (v, &idx) in dyp.iter().zip(ap) {
            g[idx as usize] += v;
        }
    });
    dx
}

/// `y = x W^T + b` for `x: [n, inputs]`, `W: [units, inputs]`.
pub(crate) fn dense_forward(x: &[f64], n: usize, inputs: usize, weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let units = bias.len();
    let mut out = vec![0.0; n * units];
    out.par_chunks_mut(units).enumerate().for_each(|(b, o)| {
        let xb = &x[b * inputs..(b + 1) * inputs];
        for (u, v) in o.iter_mut().enumerate() {
            *v = bias[u] + dot(&weight[u * inputs..(u + 1) * inputs], xb);
        }
    });
    out
}

pub(crate) fn dense_backward(
    x: &[f64],
    dy: &[f64],
    n: usize,
    inputs: usize,
    weight: &[f64],
    need_dx: bool,
) -> (Option<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let units = dy.len() / n;
    let mut dw = vec![0.0; units * inputs];
    dw.par_chunks_mut(inputs).enumerate().for_each(|(u, g)| {
        for b in 0..n {
            axpy(dy[b * units + u], &x[b * inputs..(b + 1) * inputs], g);
        }
    });
    let mut db = vec![0.0; units];
    for b in 0..n {
        for u in 0..units {
            db[u] += dy[b * units + u];
        }
    }
    let dx = need_dx.then(|| {
        let mut dx = vec![0.0; n * inputs];
        dx.par_chunks_mut(inputs).enumerate().for_each(|(b, g)| {
            for u in 0..units {
                axpy(dy[b * units + u], &weight[u * inputs..(u + 1) * inputs], g);
            }
        });
        dx
    });
    (dx, dw, db)
}

pub(crate) fn relu_in_place(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Zeroes gradient entries whose forward output was clamped.
pub(crate) fn relu_backward_in_place(dy: &mut [f64], y: &[f64]) {
    for (g, &v) in dy.iter_mut().zip(y) {
        if v <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Inverted-dropout multipliers: `1/keep` with probability `keep`, else 0.
pub(crate) fn dropout_mask(len: usize, keep_prob: f64, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let scale = 1.0 / keep_prob;
    (0..len)
        .map(|_| if rng.random::<f64>() < keep_prob { scale } else { 0.0 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_convolution() {
        let d = ConvDims { c: 1, h: 3, w: 4, f: 1, kh: 1, kw: 1 };
        let out = conv_forward(&[1.0; 12], 1, d, &[1.0], &[0.0]);
        assert_eq!(out, vec![1.0; 12]);
    }

    #[test]
    fn pool_tie_goes_to_first_element() {
        let d = PoolDims { c: 1, h: 2, w: 2, kh: 2, kw: 2, stride: 2 };
        let (y, arg) = pool_forward(&[5.0, 5.0, 1.0, 5.0], 1, d);
        assert_eq!(y, vec![5.0]);
        assert_eq!(arg, vec![0]);
        assert_eq!(pool_backward(&[2.0], &arg, 1, d), vec![2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn overlapping_pool_windows_accumulate() {
        let d = PoolDims { c: 1, h: 1, w: 3, kh: 1, kw: 2, stride: 1 };
        let (y, arg) = pool_forward(&[0.0, 9.0, 1.0], 1, d);
        assert_eq!(y, vec![9.0, 9.0]);
        assert_eq!(pool_backward(&[1.0, 1.0], &arg, 1, d), vec![0.0, 2.0, 0.0]);
    }

    #[test]
    fn dot_matches_naive_sum() {
        let a: Vec<f64> = (0..11).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..11).map(|i| 1.0 - i as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn dropout_mask_is_seeded() {
        let m1 = dropout_mask(1000, 0.7, 9, 2);
        assert_eq!(m1, dropout_mask(1000, 0.7, 9, 2));
        assert_ne!(m1, dropout_mask(1000, 0.7, 9, 3));
        let kept = m1.iter().filter(|&&v| v > 0.0).count();
        assert!((600..800).contains(&kept));
        assert!(dropout_mask(50, 1.0, 1, 0).iter().all(|&v| v == 1.0));
    }
}
