use super::GbmError;
use crate::mesh::{Mesh, PointIndex};
use crate::scalar::Real;

/// Spreads sampled predictions over their `k` Euclidean-nearest vertices.
///
/// A vertex covered by several neighbourhoods gets the mean of the values
/// copied onto it (accumulated in sample order, clamped to the range of
/// those values). A vertex covered by none takes the value of the nearest
/// sampled vertex, ties to the earlier sample.
pub fn smooth_predictions<T: Real>(
    mesh: &Mesh<T>,
    sampled: &[usize],
    preds: &[T],
    k: usize,
) -> Result<Vec<T>, GbmError> {
    Neighborhoods::build(mesh, sampled, k)?.apply(preds)
}

/// The geometric half of [`smooth_predictions`]: which vertices each
/// sample covers and which sample an uncovered vertex falls back to.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhoods {
    vertex_count: usize,
    areas: Vec<Vec<usize>>,
    fallback: Vec<Option<usize>>,
}

impl Neighborhoods {
    pub fn build<T: Real>(mesh: &Mesh<T>, sampled: &[usize], k: usize) -> Result<Self, GbmError> {
        if sampled.is_empty() {
            return Err(GbmError::NoSamples);
        }
        let n = mesh.vertex_count();
        if k < 1 || k > n {
            return Err(crate::mesh::MeshError::KOutOfRange { k, count: n }.into());
        }
        for &s in sampled {
            mesh.vertex(s)?;
        }
        let index = PointIndex::new(mesh.vertices().to_vec());
        let areas: Vec<Vec<usize>> = sampled.iter().map(|&s| index.knn(mesh.vertices()[s], k)).collect();
        let mut covered = vec![false; n];
        for a in &areas {
            for &v in a {
                covered[v] = true;
            }
        }
        let mut fallback = vec![None; n];
        if covered.iter().any(|c| !c) {
            let near = PointIndex::new(sampled.iter().map(|&s| mesh.vertices()[s]).collect());
            for v in 0..n {
                if !covered[v] {
                    fallback[v] = Some(near.nearest(mesh.vertices()[v]));
                }
            }
        }
        Ok(Self { vertex_count: n, areas, fallback })
    }

    pub fn sample_count(&self) -> usize {
        self.areas.len()
    }

    pub fn apply<T: Real>(&self, preds: &[T]) -> Result<Vec<T>, GbmError> {
        if preds.len() != self.areas.len() {
            return Err(GbmError::SampleMismatch { samples: self.areas.len(), preds: preds.len() });
        }
        let n = self.vertex_count;
        let mut sum = vec![T::zero(); n];
        let mut count = vec![0u32; n];
        let mut lo = vec![T::infinity(); n];
        let mut hi = vec![T::neg_infinity(); n];
        for (area, &p) in self.areas.iter().zip(preds) {
            for &v in area {
                sum[v] += p;
                count[v] += 1;
                lo[v] = lo[v].min(p);
                hi[v] = hi[v].max(p);
            }
        }
        Ok((0..n)
            .map(|v| match self.fallback[v] {
                Some(s) => preds[s],
                None => (sum[v] / T::of(count[v] as f64)).max(lo[v]).min(hi[v]),
            })
            .collect())
    }
}
