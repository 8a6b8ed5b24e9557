use super::{fill_from_nearest, Correspondence, Map2, ProjectionError};
use crate::scalar::Real;

pub const NET_OUTPUT_HEIGHT: usize = 12;
pub const NET_OUTPUT_WIDTH: usize = 24;

/// Source position that output index `i` samples when stretching `from`
/// samples over `to` with the first and last samples on the corners.
#[inline]
fn corner_aligned<T: Real>(i: usize, from: usize, to: usize) -> T {
    if to <= 1 || from <= 1 {
        T::zero()
    } else {
        T::of(i as f64) * T::of((from - 1) as f64) / T::of((to - 1) as f64)
    }
}

/// Bilinear interpolation of `map` at continuous `(y, x)`, clamped to the
/// grid.
pub fn sample_bilinear<T: Real>(map: &Map2<T>, y: T, x: T) -> T {
    let (h, w) = (map.height(), map.width());
    let clamp = |v: T, n: usize| v.max(T::zero()).min(T::of((n - 1) as f64));
    let (y, x) = (clamp(y, h), clamp(x, w));
    let y0 = y.floor().to_usize().unwrap_or(0).min(h - 1);
    let x0 = x.floor().to_usize().unwrap_or(0).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let fy = y - T::of(y0 as f64);
    let fx = x - T::of(x0 as f64);
    let top = lerp(map.get(y0, x0), map.get(y0, x1), fx);
    let bottom = lerp(map.get(y1, x0), map.get(y1, x1), fx);
    lerp(top, bottom, fy)
}

// exact at equal endpoints and never outside [a, b]
#[inline]
fn lerp<T: Real>(a: T, b: T, t: T) -> T {
    (a + (b - a) * t).max(a.min(b)).min(a.max(b))
}

/// Bilinear upscale with corner-aligned sampling to an arbitrary size.
pub fn resize_bilinear<T: Real>(src: &Map2<T>, height: usize, width: usize) -> Map2<T> {
    let mut out = Vec::with_capacity(height * width);
    for r in 0..height {
        let y = corner_aligned(r, src.height(), height);
        for c in 0..width {
            let x = corner_aligned(c, src.width(), width);
            out.push(sample_bilinear(src, y, x));
        }
    }
    Map2::from_vec(height, width, out)
}

/// Upscales the 12x24 network output to the 384x768 raster.
pub fn upscale_bilinear<T: Real>(src: &Map2<T>) -> Result<Map2<T>, ProjectionError> {
    if (src.height(), src.width()) != (NET_OUTPUT_HEIGHT, NET_OUTPUT_WIDTH) {
        return Err(ProjectionError::Shape {
            expected: (NET_OUTPUT_HEIGHT, NET_OUTPUT_WIDTH),
            got: (src.height(), src.width()),
        });
    }
    Ok(resize_bilinear(
        src,
        super::RASTER_HEIGHT,
        super::RASTER_WIDTH,
    ))
}

/// Reduces a masked raster to a coarse grid whose cells sit where
/// [`resize_bilinear`] would sample them back.
///
/// Each coarse cell averages the masked pixels within half a cell spacing of
/// its corner-aligned position. Cells with no masked pixels copy their
/// nearest non-empty cell; an entirely empty mask yields zeros.
pub fn downsample_masked<T: Real>(
    map: &Map2<T>,
    mask: &[u8],
    height: usize,
    width: usize,
) -> Map2<T> {
    let (h, w) = (map.height(), map.width());
    let half_y = if height > 1 { (h - 1) as f64 / (height - 1) as f64 / 2.0 } else { h as f64 };
    let half_x = if width > 1 { (w - 1) as f64 / (width - 1) as f64 / 2.0 } else { w as f64 };
    let mut out = vec![T::zero(); height * width];
    let mut valued = vec![false; height * width];
    for r in 0..height {
        let cy: f64 = corner_aligned(r, h, height);
        let (y0, y1) = window(cy, half_y, h);
        for c in 0..width {
            let cx: f64 = corner_aligned(c, w, width);
            let (x0, x1) = window(cx, half_x, w);
            let mut sum = T::zero();
            let mut n = 0u32;
            let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
            for y in y0..=y1 {
                for x in x0..=x1 {
                    if mask[y * w + x] != 0 {
                        let v = map.get(y, x);
                        sum += v;
                        n += 1;
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
            }
            if n > 0 {
                out[r * width + c] = (sum / T::of(n as f64)).max(lo).min(hi);
                valued[r * width + c] = true;
            }
        }
    }
    let everything = vec![1u8; height * width];
    fill_from_nearest(&mut out, valued, &everything, height, width);
    Map2::from_vec(height, width, out)
}

fn window(center: f64, half: f64, n: usize) -> (usize, usize) {
    let lo = (center - half).ceil().max(0.0) as usize;
    let hi = ((center + half).floor() as usize).min(n - 1);
    (lo.min(hi), hi)
}

/// Reads each vertex's value at its corresponding pixel.
pub fn reproject<T: Real>(map: &Map2<T>, corr: &Correspondence) -> Result<Vec<T>, ProjectionError> {
    if (map.height(), map.width()) != (corr.height, corr.width) {
        return Err(ProjectionError::Shape {
            expected: (corr.height, corr.width),
            got: (map.height(), map.width()),
        });
    }
    corr.pixels
        .iter()
        .map(|&(r, c)| {
            if r < corr.height && c < corr.width {
                Ok(map.get(r, c))
            } else {
                Err(ProjectionError::PixelOutOfBounds { row: r, col: c })
            }
        })
        .collect()
}
