use super::CnnError;
use crate::projection::{Map2, RasterMap};
use crate::scalar::Real;

/// Dense `height x width x channels` array, channels fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: [usize; 3],
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self { shape: [height, width, channels], data: vec![T::zero(); height * width * channels] }
    }

    pub fn from_vec(shape: [usize; 3], data: Vec<T>) -> Result<Self, CnnError> {
        if data.len() != shape.iter().product::<usize>() {
            return Err(CnnError::Length { shape, len: data.len() });
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn height(&self) -> usize {
        self.shape[0]
    }

    pub fn width(&self) -> usize {
        self.shape[1]
    }

    pub fn channels(&self) -> usize {
        self.shape[2]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> T {
        self.data[(row * self.shape[1] + col) * self.shape[2] + ch]
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

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Extracts one channel as a map.
    pub fn channel(&self, ch: usize) -> Map2<T> {
        let c = self.shape[2];
        Map2::from_vec(
            self.shape[0],
            self.shape[1],
            self.data.iter().skip(ch).step_by(c).copied().collect(),
        )
    }

    pub fn from_map(map: &Map2<T>) -> Self {
        Self { shape: [map.height(), map.width(), 1], data: map.data().to_vec() }
    }

    pub fn flipped(&self, flip: crate::projection::Flip) -> Self {
        let [h, w, c] = self.shape;
        Self { shape: self.shape, data: flip.apply_hwc(&self.data, h, w, c) }
    }
}

/// Interleaves fill time (channel 0) and silhouette mask (channel 1).
pub fn raster_tensor<T: Real>(map: &RasterMap<T>) -> Tensor<T> {
    let vals = map.values.data();
    let mut data = Vec::with_capacity(vals.len() * 2);
    for (&v, &m) in vals.iter().zip(&map.mask) {
        data.push(v);
        data.push(if m != 0 { T::one() } else { T::zero() });
    }
    Tensor { shape: [map.height(), map.width(), 2], data }
}
