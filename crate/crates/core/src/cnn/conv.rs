//! Convolution kernels on channels-last buffers via im2col and GEMM.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub kernel: usize,
    pub stride: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub transpose: bool,
}

impl ConvSpec {
    pub fn weight_count(&self) -> usize {
        self.kernel * self.kernel * self.in_channels * self.out_channels
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.out_channels
    }

    /// Output `(height, width)` for an input of `(h, w)` with "same" padding.
    pub fn output_hw(&self, h: usize, w: usize) -> (usize, usize) {
        if self.transpose {
            (h * self.stride, w * self.stride)
        } else {
            (h.div_ceil(self.stride), w.div_ceil(self.stride))
        }
    }

    /// Fan-in used for initialization.
    pub fn fan_in(&self) -> usize {
        self.kernel * self.kernel * self.in_channels
    }

    /// Geometry of the forward (non-transposed) correlation this layer is
    /// built on. For a transposed layer that is the strided convolution
    /// from its output back to its input.
    fn geometry(&self, in_h: usize, in_w: usize) -> Geom {
        if self.transpose {
            let (oh, ow) = self.output_hw(in_h, in_w);
            Geom::same(oh, ow, self.out_channels, self.kernel, self.stride)
        } else {
            Geom::same(in_h, in_w, self.in_channels, self.kernel, self.stride)
        }
    }
}

/// Sliding-window layout of a "same"-padded correlation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Geom {
    h: usize,
    w: usize,
    c: usize,
    k: usize,
    s: usize,
    ho: usize,
    wo: usize,
    pt: usize,
    pl: usize,
}

impl Geom {
    pub(crate) fn same(h: usize, w: usize, c: usize, k: usize, s: usize) -> Self {
        let ho = h.div_ceil(s);
        let wo = w.div_ceil(s);
        let pad = |o: usize, i: usize| ((o - 1) * s + k).saturating_sub(i) / 2;
        Self { h, w, c, k, s, ho, wo, pt: pad(ho, h), pl: pad(wo, w) }
    }

    fn rows(&self) -> usize {
        self.ho * self.wo
    }

    fn cols(&self) -> usize {
        self.k * self.k * self.c
    }
}

/// Patch matrix: one row per output pixel, columns ordered `(ky, kx, c)`.
#[cfg(test)]
fn im2col<T: Real>(x: &[T], g: &Geom, col: &mut [T]) {
    im2col_band(x, g, 0, g.ho, col)
}

/// Patch matrix restricted to output rows `oy0..oy1`.
fn im2col_band<T: Real>(x: &[T], g: &Geom, oy0: usize, oy1: usize, col: &mut [T]) {
    let kc = g.k * g.c;
    let kk = g.cols();
    debug_assert_eq!(col.len(), (oy1 - oy0) * g.wo * kk);
    for oy in oy0..oy1 {
        for ox in 0..g.wo {
            let row = &mut col[((oy - oy0) * g.wo + ox) * kk..][..kk];
            let ix0 = (ox * g.s) as isize - g.pl as isize;
            for ky in 0..g.k {
                let seg = &mut row[ky * kc..(ky + 1) * kc];
                let iy = (oy * g.s + ky) as isize - g.pt as isize;
                if iy < 0 || iy >= g.h as isize {
                    seg.fill(T::zero());
                    continue;
                }
                let base = iy as usize * g.w;
                if ix0 >= 0 && ix0 as usize + g.k <= g.w {
                    let start = (base + ix0 as usize) * g.c;
                    seg.copy_from_slice(&x[start..start + kc]);
                } else {
                    for kx in 0..g.k {
                        let ix = ix0 + kx as isize;
                        let dst = &mut seg[kx * g.c..(kx + 1) * g.c];
                        if ix < 0 || ix >= g.w as isize {
                            dst.fill(T::zero());
                        } else {
                            let start = (base + ix as usize) * g.c;
                            dst.copy_from_slice(&x[start..start + g.c]);
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch rows back, summing overlaps.
#[cfg(test)]
fn col2im<T: Real>(col: &[T], g: &Geom, x: &mut [T]) {
    x.fill(T::zero());
    col2im_band_add(col, g, 0, g.ho, x)
}

/// Adds the scatter of output rows `oy0..oy1` into `x`.
fn col2im_band_add<T: Real>(col: &[T], g: &Geom, oy0: usize, oy1: usize, x: &mut [T]) {
    let kc = g.k * g.c;
    let kk = g.cols();
    for oy in oy0..oy1 {
        for ox in 0..g.wo {
            let row = &col[((oy - oy0) * g.wo + ox) * kk..][..kk];
            let ix0 = (ox * g.s) as isize - g.pl as isize;
            for ky in 0..g.k {
                let iy = (oy * g.s + ky) as isize - g.pt as isize;
                if iy < 0 || iy >= g.h as isize {
                    continue;
                }
                let base = iy as usize * g.w;
                for kx in 0..g.k {
                    let ix = ix0 + kx as isize;
                    if ix < 0 || ix >= g.w as isize {
                        continue;
                    }
                    let dst = &mut x[(base + ix as usize) * g.c..][..g.c];
                    let src = &row[ky * kc + kx * g.c..][..g.c];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
        }
    }
}

// patch-matrix rows per band, keeping a band within a few hundred KiB
const BAND_ELEMENTS: usize = 1 << 16;

fn bands(g: &Geom) -> impl Iterator<Item = (usize, usize)> {
    let per = (BAND_ELEMENTS / (g.wo * g.cols()).max(1)).max(1);
    let ho = g.ho;
    (0..ho).step_by(per).map(move |a| (a, (a + per).min(ho)))
}

/// Forward pass of one (possibly transposed) convolution with optional
/// ReLU. `weight` is `k*k*cin x cout` for a plain convolution and
/// `k*k*cout x cin` for a transposed one.
#[allow(clippy::too_many_arguments)]
pub(crate) fn forward<T: Real>(
    spec: &ConvSpec,
    relu: bool,
    weight: &[T],
    bias: &[T],
    x: &[T],
    in_h: usize,
    in_w: usize,
) -> Vec<T> {
    let g = spec.geometry(in_h, in_w);
    let (oh, ow) = spec.output_hw(in_h, in_w);
    let cout = spec.out_channels;
    let mut y = vec![T::zero(); oh * ow * cout];
    if spec.transpose {
        let (cin, kk) = (spec.in_channels, g.cols());
        let mut d = Vec::new();
        for (a, b) in bands(&g) {
            let m = (b - a) * g.wo;
            d.resize(m * kk, T::zero());
            let xs = &x[a * g.wo * cin..b * g.wo * cin];
            T::gemm(m, cin, kk, T::one(), xs, cin as isize, 1, weight, 1, cin as isize, T::zero(), &mut d, kk as isize, 1);
            col2im_band_add(&d, &g, a, b, &mut y);
        }
        for px in y.chunks_exact_mut(cout) {
            for (v, &b) in px.iter_mut().zip(bias) {
                *v += b;
            }
        }
    } else {
        let kk = g.cols();
        for px in y.chunks_exact_mut(cout) {
            px.copy_from_slice(bias);
        }
        let mut col = Vec::new();
        for (a, b) in bands(&g) {
            let m = (b - a) * g.wo;
            col.resize(m * kk, T::zero());
            im2col_band(x, &g, a, b, &mut col);
            let out = &mut y[a * g.wo * cout..b * g.wo * cout];
            T::gemm(m, kk, cout, T::one(), &col, kk as isize, 1, weight, cout as isize, 1, T::one(), out, cout as isize, 1);
        }
    }
    if relu {
        for v in &mut y {
            if *v < T::zero() {
                *v = T::zero();
            }
        }
    }
    y
}

/// Backward pass. `dy` is the gradient at the layer output and is
/// overwritten with the gradient at the pre-activation. Parameter
/// gradients are accumulated into `dw`/`db`; the input gradient is
/// returned when requested.
#[allow(clippy::too_many_arguments)]
pub(crate) fn backward<T: Real>(
    spec: &ConvSpec,
    relu: bool,
    weight: &[T],
    x: &[T],
    in_h: usize,
    in_w: usize,
    y: &[T],
    dy: &mut [T],
    dw: &mut [T],
    db: &mut [T],
    want_dx: bool,
) -> Option<Vec<T>> {
    if relu {
        for (d, &v) in dy.iter_mut().zip(y) {
            if v <= T::zero() {
                *d = T::zero();
            }
        }
    }
    let cout = spec.out_channels;
    for px in dy.chunks_exact(cout) {
        for (b, &d) in db.iter_mut().zip(px) {
            *b += d;
        }
    }
    let g = spec.geometry(in_h, in_w);
    let kk = g.cols();
    let mut buf = Vec::new();
    if spec.transpose {
        let cin = spec.in_channels;
        let mut dx = if want_dx { vec![T::zero(); g.rows() * cin] } else { Vec::new() };
        for (a, b) in bands(&g) {
            let m = (b - a) * g.wo;
            buf.resize(m * kk, T::zero());
            im2col_band(dy, &g, a, b, &mut buf);
            let xs = &x[a * g.wo * cin..b * g.wo * cin];
            T::gemm(kk, m, cin, T::one(), &buf, 1, kk as isize, xs, cin as isize, 1, T::one(), dw, cin as isize, 1);
            if want_dx {
                let out = &mut dx[a * g.wo * cin..b * g.wo * cin];
                T::gemm(m, kk, cin, T::one(), &buf, kk as isize, 1, weight, cin as isize, 1, T::zero(), out, cin as isize, 1);
            }
        }
        want_dx.then_some(dx)
    } else {
        let mut dx = if want_dx { vec![T::zero(); in_h * in_w * spec.in_channels] } else { Vec::new() };
        for (a, b) in bands(&g) {
            let m = (b - a) * g.wo;
            buf.resize(m * kk, T::zero());
            im2col_band(x, &g, a, b, &mut buf);
            let dys = &dy[a * g.wo * cout..b * g.wo * cout];
            T::gemm(kk, m, cout, T::one(), &buf, 1, kk as isize, dys, cout as isize, 1, T::one(), dw, cout as isize, 1);
            if want_dx {
                // the patch buffer is reused for the patch-space gradient
                T::gemm(m, cout, kk, T::one(), dys, cout as isize, 1, weight, 1, cout as isize, T::zero(), &mut buf, kk as isize, 1);
                col2im_band_add(&buf, &g, a, b, &mut dx);
            }
        }
        want_dx.then_some(dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // direct seven-loop correlation with explicit zero padding
    fn naive(spec: &ConvSpec, w: &[f64], b: &[f64], x: &[f64], h: usize, wd: usize) -> Vec<f64> {
        let g = Geom::same(h, wd, spec.in_channels, spec.kernel, spec.stride);
        let (k, cin, cout) = (spec.kernel, spec.in_channels, spec.out_channels);
        let mut y = vec![0.0; g.ho * g.wo * cout];
        for oy in 0..g.ho {
            for ox in 0..g.wo {
                for o in 0..cout {
                    let mut acc = b[o];
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = (oy * spec.stride + ky) as isize - g.pt as isize;
                            let ix = (ox * spec.stride + kx) as isize - g.pl as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                continue;
                            }
                            for ci in 0..cin {
                                let xv = x[((iy as usize) * wd + ix as usize) * cin + ci];
                                acc += xv * w[((ky * k + kx) * cin + ci) * cout + o];
                            }
                        }
                    }
                    y[(oy * g.wo + ox) * cout + o] = acc;
                }
            }
        }
        y
    }

    fn ramp(n: usize, a: f64) -> Vec<f64> {
        (0..n).map(|i| ((i as f64 * a).sin() * 3.0).round() / 4.0).collect()
    }

    #[test]
    fn im2col_matches_direct_convolution() {
        for &(h, w, k, s) in &[(7, 9, 3, 1), (7, 9, 3, 2), (8, 6, 5, 2), (5, 5, 5, 1), (1, 3, 3, 2)] {
            let spec = ConvSpec { kernel: k, stride: s, in_channels: 3, out_channels: 2, transpose: false };
            let wt = ramp(spec.weight_count(), 0.7);
            let b = vec![0.25, -0.5];
            let x = ramp(h * w * 3, 1.3);
            let fast = forward(&spec, false, &wt, &b, &x, h, w);
            assert_eq!(fast, naive(&spec, &wt, &b, &x, h, w), "{h}x{w} k{k} s{s}");
        }
    }

    #[test]
    fn same_padding_sizes() {
        let g = Geom::same(384, 768, 2, 5, 2);
        assert_eq!((g.ho, g.wo, g.pt, g.pl), (192, 384, 1, 1));
        let g = Geom::same(12, 24, 64, 3, 2);
        assert_eq!((g.ho, g.wo, g.pt, g.pl), (6, 12, 0, 0));
        let g = Geom::same(6, 12, 64, 3, 1);
        assert_eq!((g.ho, g.wo, g.pt, g.pl), (6, 12, 1, 1));
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), c> == <x, col2im(c)>
        let g = Geom::same(6, 7, 2, 3, 2);
        let x = ramp(6 * 7 * 2, 0.9);
        let c = ramp(g.rows() * g.cols(), 0.4);
        let mut col = vec![0.0; c.len()];
        im2col(&x, &g, &mut col);
        let mut back = vec![0.0; x.len()];
        col2im(&c, &g, &mut back);
        let lhs: f64 = col.iter().zip(&c).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn transpose_is_adjoint_of_strided_conv() {
        // the transposed layer with zero bias is the adjoint of the plain
        // strided convolution sharing its weights
        let down = ConvSpec { kernel: 3, stride: 2, in_channels: 2, out_channels: 3, transpose: false };
        let up = ConvSpec { kernel: 3, stride: 2, in_channels: 3, out_channels: 2, transpose: true };
        let wt = ramp(down.weight_count(), 0.3);
        let x = ramp(6 * 8 * 2, 1.1);
        let z = ramp(3 * 4 * 3, 0.6);
        let dx = forward(&down, false, &wt, &[0.0; 3], &x, 6, 8);
        let uz = forward(&up, false, &wt, &[0.0; 2], &z, 3, 4);
        assert_eq!(uz.len(), x.len());
        let lhs: f64 = dx.iter().zip(&z).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&uz).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
