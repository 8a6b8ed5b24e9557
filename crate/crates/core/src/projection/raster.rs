use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{Map2, ProjectionError, ProjectionPlane};
use crate::mesh::Mesh;
use crate::scalar::Real;

pub const RASTER_HEIGHT: usize = 384;
pub const RASTER_WIDTH: usize = 768;
pub const RASTER_MARGIN: usize = 4;

/// Image size and framing margin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RasterSpec {
    pub height: usize,
    pub width: usize,
    pub margin: usize,
}

impl Default for RasterSpec {
    fn default() -> Self {
        Self {
            height: RASTER_HEIGHT,
            width: RASTER_WIDTH,
            margin: RASTER_MARGIN,
        }
    }
}

/// Maps plane coordinates to pixels: `col = floor((u - offset[0]) / scale)`,
/// `row = floor((v - offset[1]) / scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterFrame<T> {
    pub plane: ProjectionPlane<T>,
    /// Millimetres per pixel.
    pub scale: T,
    /// Plane coordinates of the image's top-left corner (mm).
    pub offset: [T; 2],
    pub height: usize,
    pub width: usize,
}

impl<T: Real> RasterFrame<T> {
    /// Continuous `(x, y)` image position of a plane coordinate pair.
    pub fn continuous(&self, uv: [T; 2]) -> [T; 2] {
        [
            (uv[0] - self.offset[0]) / self.scale,
            (uv[1] - self.offset[1]) / self.scale,
        ]
    }

    /// Pixel `(row, col)` containing a plane coordinate pair, clamped to the
    /// image.
    pub fn pixel(&self, uv: [T; 2]) -> (usize, usize) {
        let [x, y] = self.continuous(uv);
        let clamp = |f: T, n: usize| {
            let f = f.floor().to_f64().unwrap_or(0.0);
            if f <= 0.0 {
                0
            } else {
                (f as usize).min(n - 1)
            }
        };
        (clamp(y, self.height), clamp(x, self.width))
    }
}

/// Two-channel projection image: per-pixel fill time and silhouette mask.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterMap<T> {
    pub frame: RasterFrame<T>,
    /// Channel 0, row-major; zero outside the mask.
    pub values: Map2<T>,
    /// Channel 1, row-major, 0 or 1.
    pub mask: Vec<u8>,
}

impl<T: Real> RasterMap<T> {
    pub fn height(&self) -> usize {
        self.frame.height
    }

    pub fn width(&self) -> usize {
        self.frame.width
    }

    pub fn mask_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m != 0).count()
    }
}

/// Pixel `(row, col)` of every vertex, in vertex order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correspondence {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<(usize, usize)>,
}

#[inline]
fn edge<T: Real>(a: [T; 2], b: [T; 2], p: [T; 2]) -> T {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

// Tie rule for pixel centres exactly on an edge. Exactly one of `d` and
// `-d` qualifies, so a shared edge is owned by one of its two triangles.
#[inline]
fn owns_edge<T: Real>(a: [T; 2], b: [T; 2]) -> bool {
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    dy < T::zero() || (dy == T::zero() && dx > T::zero())
}

/// Calls `f(row, col)` for every pixel whose centre is covered by the
/// triangle (image coordinates, `x` along columns). Degenerate triangles
/// cover nothing.
pub fn rasterize_triangle<T: Real>(
    tri: [[T; 2]; 3],
    height: usize,
    width: usize,
    mut f: impl FnMut(usize, usize),
) {
    let [mut a, mut b, c] = tri;
    let area = edge(a, b, c);
    if area == T::zero() || !area.is_finite() {
        return;
    }
    if area < T::zero() {
        std::mem::swap(&mut a, &mut b);
    }
    let edges = [(b, c), (c, a), (a, b)];
    let owned = edges.map(|(p, q)| owns_edge(p, q));
    let half = T::of(0.5);
    let lo = |v: T, n: usize| -> usize {
        let f = (v - half).ceil().to_f64().unwrap_or(0.0);
        if f <= 0.0 {
            0
        } else {
            (f as usize).min(n)
        }
    };
    let hi = |v: T, n: usize| -> usize {
        // last pixel whose centre is <= v
        let f = (v - half).floor().to_f64().unwrap_or(-1.0);
        if f < 0.0 {
            0
        } else {
            (f as usize + 1).min(n)
        }
    };
    let xs = [a[0], b[0], c[0]];
    let ys = [a[1], b[1], c[1]];
    let fold = |v: [T; 3], g: fn(T, T) -> T| g(g(v[0], v[1]), v[2]);
    let (x0, x1) = (lo(fold(xs, T::min), width), hi(fold(xs, T::max), width));
    let (y0, y1) = (lo(fold(ys, T::min), height), hi(fold(ys, T::max), height));
    for row in y0..y1 {
        let py = T::of(row as f64) + half;
        for col in x0..x1 {
            let p = [T::of(col as f64) + half, py];
            let inside = edges.iter().zip(owned).all(|(&(s, e), own)| {
                let w = edge(s, e, p);
                w > T::zero() || (w == T::zero() && own)
            });
            if inside {
                f(row, col);
            }
        }
    }
}

/// Projects a per-vertex field onto the plane and rasterises it.
pub fn project<T: Real>(
    mesh: &Mesh<T>,
    field: &[T],
    plane: &ProjectionPlane<T>,
) -> Result<(RasterMap<T>, Correspondence), ProjectionError> {
    project_with(mesh, field, plane, RasterSpec::default())
}

/// Computes the image frame (scale and offset) for a mesh.
pub fn frame_for<T: Real>(
    mesh: &Mesh<T>,
    plane: &ProjectionPlane<T>,
    spec: RasterSpec,
) -> Result<RasterFrame<T>, ProjectionError> {
    let uv: Vec<[T; 2]> = mesh.vertices().iter().map(|&p| plane.coordinates(p)).collect();
    frame_from_coordinates(&uv, plane, spec)
}

fn frame_from_coordinates<T: Real>(
    uv: &[[T; 2]],
    plane: &ProjectionPlane<T>,
    spec: RasterSpec,
) -> Result<RasterFrame<T>, ProjectionError> {
    if spec.height <= 2 * spec.margin || spec.width <= 2 * spec.margin {
        return Err(ProjectionError::Degenerate("margin leaves no drawable area"));
    }
    let mut lo = uv[0];
    let mut hi = uv[0];
    for p in uv {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let inner_w = T::of((spec.width - 2 * spec.margin) as f64);
    let inner_h = T::of((spec.height - 2 * spec.margin) as f64);
    let scale = ((hi[0] - lo[0]) / inner_w).max((hi[1] - lo[1]) / inner_h);
    if !(scale > T::zero()) || !scale.is_finite() {
        return Err(ProjectionError::Degenerate("projection collapses to a point"));
    }
    let two = T::of(2.0);
    let center = [(lo[0] + hi[0]) / two, (lo[1] + hi[1]) / two];
    let offset = [
        center[0] - T::of(spec.width as f64) / two * scale,
        center[1] - T::of(spec.height as f64) / two * scale,
    ];
    Ok(RasterFrame {
        plane: *plane,
        scale,
        offset,
        height: spec.height,
        width: spec.width,
    })
}

/// [`project`] with an explicit image size.
///
/// The mask is the union of the projected triangles (pixel-centre coverage)
/// and every pixel a vertex lands on. Channel 0 holds the mean value of the
/// vertices landing on each pixel; remaining mask pixels copy the nearest
/// valued pixel by breadth-first fill through the mask.
pub fn project_with<T: Real>(
    mesh: &Mesh<T>,
    field: &[T],
    plane: &ProjectionPlane<T>,
    spec: RasterSpec,
) -> Result<(RasterMap<T>, Correspondence), ProjectionError> {
    if field.len() != mesh.vertex_count() {
        return Err(ProjectionError::FieldLength {
            expected: mesh.vertex_count(),
            got: field.len(),
        });
    }
    let uv: Vec<[T; 2]> = mesh.vertices().iter().map(|&p| plane.coordinates(p)).collect();
    let frame = frame_from_coordinates(&uv, plane, spec)?;
    let (h, w) = (spec.height, spec.width);
    let xy: Vec<[T; 2]> = uv.iter().map(|&c| frame.continuous(c)).collect();
    let mut mask = vec![0u8; h * w];
    for f in mesh.faces() {
        rasterize_triangle([xy[f[0]], xy[f[1]], xy[f[2]]], h, w, |r, c| mask[r * w + c] = 1);
    }
    let pixels: Vec<(usize, usize)> = uv.iter().map(|&c| frame.pixel(c)).collect();
    let mut sum = vec![T::zero(); h * w];
    let mut count = vec![0u32; h * w];
    let mut range = vec![(T::infinity(), T::neg_infinity()); h * w];
    for (&(r, c), &v) in pixels.iter().zip(field) {
        let i = r * w + c;
        mask[i] = 1;
        sum[i] += v;
        count[i] += 1;
        range[i] = (range[i].0.min(v), range[i].1.max(v));
    }
    let mut values = vec![T::zero(); h * w];
    for i in 0..h * w {
        if count[i] > 0 {
            // clamping keeps a constant field exactly constant
            values[i] = (sum[i] / T::of(count[i] as f64)).max(range[i].0).min(range[i].1);
        }
    }
    let valued: Vec<bool> = count.iter().map(|&c| c > 0).collect();
    fill_from_nearest(&mut values, valued, &mask, h, w);
    Ok((
        RasterMap {
            frame,
            values: Map2::from_vec(h, w, values),
            mask,
        },
        Correspondence {
            height: h,
            width: w,
            pixels,
        },
    ))
}

/// Copies values into unvalued pixels of `region` from the nearest valued
/// pixel (8-connected breadth-first search seeded in row-major order).
/// Pixels the search cannot reach fall back to the nearest valued pixel by
/// straight-line distance.
pub(crate) fn fill_from_nearest<T: Real>(
    values: &mut [T],
    mut valued: Vec<bool>,
    region: &[u8],
    h: usize,
    w: usize,
) {
    let mut queue: VecDeque<usize> = (0..h * w).filter(|&i| valued[i]).collect();
    if queue.is_empty() {
        return;
    }
    let seeds: Vec<usize> = queue.iter().copied().collect();
    while let Some(i) = queue.pop_front() {
        let (r, c) = ((i / w) as isize, (i % w) as isize);
        for (dr, dc) in [(-1, 0), (0, -1), (0, 1), (1, 0), (-1, -1), (-1, 1), (1, -1), (1, 1)] {
            let (nr, nc) = (r + dr, c + dc);
            if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                continue;
            }
            let j = nr as usize * w + nc as usize;
            if region[j] != 0 && !valued[j] {
                valued[j] = true;
                values[j] = values[i];
                queue.push_back(j);
            }
        }
    }
    for i in 0..h * w {
        if region[i] != 0 && !valued[i] {
            let (r, c) = ((i / w) as isize, (i % w) as isize);
            let nearest = seeds
                .iter()
                .min_by_key(|&&s| {
                    let (sr, sc) = ((s / w) as isize, (s % w) as isize);
                    ((sr - r).pow(2) + (sc - c).pow(2), s)
                })
                .copied()
                .unwrap();
            values[i] = values[nearest];
        }
    }
}
