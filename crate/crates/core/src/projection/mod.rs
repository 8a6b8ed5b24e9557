//! Planar projection of a mesh and its per-vertex field into a fixed-size
//! two-channel image, and the way back from image to vertices.

mod export;
mod mirror;
mod plane;
mod raster;
mod resample;

use thiserror::Error;

pub use export::{export_debug, RasterSidecar};
pub use mirror::{mirror, mirror_variants, Flip};
pub use plane::{fit_plane, ProjectionPlane};
pub(crate) use raster::fill_from_nearest;
pub use raster::{
    frame_for, project, project_with, rasterize_triangle, Correspondence, RasterFrame,
    RasterMap, RasterSpec, RASTER_HEIGHT, RASTER_MARGIN, RASTER_WIDTH,
};
pub use resample::{
    downsample_masked, reproject, resize_bilinear, sample_bilinear, upscale_bilinear,
    NET_OUTPUT_HEIGHT, NET_OUTPUT_WIDTH,
};

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("degenerate geometry: {0}")]
    Degenerate(&'static str),
    #[error("field has {got} values for {expected} vertices")]
    FieldLength { expected: usize, got: usize },
    #[error("expected a {expected:?} map, got {got:?}")]
    Shape {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("pixel ({row}, {col}) outside the image")]
    PixelOutOfBounds { row: usize, col: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Single-channel row-major grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Map2<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Copy> Map2<T> {
    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), height * width, "map data length");
        Self { height, width, data }
    }

    pub fn filled(height: usize, width: usize, value: T) -> Self {
        Self::from_vec(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Map2<U> {
        Map2::from_vec(self.height, self.width, self.data.iter().map(|&v| f(v)).collect())
    }
}
