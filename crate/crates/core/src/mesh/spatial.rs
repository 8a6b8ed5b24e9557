use super::{Mesh, MeshError, Result};
use crate::scalar::{vec3, Real};

/// Uniform-grid index over a fixed point set for k-nearest queries.
///
/// Results are exactly those of a full sort by `(squared distance, index)`;
/// the grid only prunes which points get looked at.
#[derive(Debug, Clone)]
pub struct PointIndex<T> {
    points: Vec<[T; 3]>,
    origin: [T; 3],
    cell: T,
    dims: [usize; 3],
    // CSR layout: points of cell c are members[starts[c]..starts[c + 1]]
    starts: Vec<usize>,
    members: Vec<usize>,
}

impl<T: Real> PointIndex<T> {
    pub fn new(points: Vec<[T; 3]>) -> Self {
        assert!(!points.is_empty(), "PointIndex needs at least one point");
        let mut lo = points[0];
        let mut hi = points[0];
        for p in &points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let n = T::of(points.len() as f64);
        let mut ext = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        ext.sort_by(|a, b| b.partial_cmp(a).unwrap());
        // Sized for surfaces (about two points per cell on a sheet), but no
        // finer than a volumetric fill would need.
        let sheet = (ext[0] * ext[1] / n).sqrt() * T::of(1.5);
        let volume = (ext[0] * ext[1] * ext[2] / n).cbrt() * T::of(1.5);
        let mut cell = sheet.max(volume);
        if !(cell > T::zero()) || !cell.is_finite() {
            cell = ext[0].max(T::one());
        }
        let mut dims = [1usize; 3];
        for a in 0..3 {
            let span = ((hi[a] - lo[a]) / cell).floor().to_f64().unwrap_or(0.0);
            dims[a] = (span as usize + 1).min(1 << 10);
        }
        let mut index = Self {
            points,
            origin: lo,
            cell,
            dims,
            starts: Vec::new(),
            members: Vec::new(),
        };
        let cells: Vec<usize> = index
            .points
            .iter()
            .map(|&p| index.flat(index.cell_of(p)))
            .collect();
        let total = dims[0] * dims[1] * dims[2];
        let mut starts = vec![0usize; total + 1];
        for &c in &cells {
            starts[c + 1] += 1;
        }
        for c in 0..total {
            starts[c + 1] += starts[c];
        }
        let mut fill = starts.clone();
        let mut members = vec![0usize; cells.len()];
        for (i, &c) in cells.iter().enumerate() {
            members[fill[c]] = i;
            fill[c] += 1;
        }
        index.starts = starts;
        index.members = members;
        index
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[T; 3]] {
        &self.points
    }

    fn cell_of(&self, p: [T; 3]) -> [usize; 3] {
        let mut c = [0usize; 3];
        for a in 0..3 {
            let f = ((p[a] - self.origin[a]) / self.cell).floor();
            let f = f.to_f64().unwrap_or(0.0);
            c[a] = if f <= 0.0 {
                0
            } else {
                (f as usize).min(self.dims[a] - 1)
            };
        }
        c
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        (c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]
    }

    fn visit_shell(&self, center: [usize; 3], r: usize, mut f: impl FnMut(usize)) {
        let range = |a: usize| {
            let lo = center[a].saturating_sub(r);
            let hi = (center[a] + r).min(self.dims[a] - 1);
            lo..=hi
        };
        for z in range(2) {
            for y in range(1) {
                for x in range(0) {
                    let cheb = x
                        .abs_diff(center[0])
                        .max(y.abs_diff(center[1]))
                        .max(z.abs_diff(center[2]));
                    if cheb != r {
                        continue;
                    }
                    let c = self.flat([x, y, z]);
                    for &i in &self.members[self.starts[c]..self.starts[c + 1]] {
                        f(i);
                    }
                }
            }
        }
    }

    /// The `k` points nearest to `query`, ordered by distance then index.
    pub fn knn(&self, query: [T; 3], k: usize) -> Vec<usize> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        let center = self.cell_of(query);
        let max_r = (0..3)
            .map(|a| center[a].max(self.dims[a] - 1 - center[a]))
            .max()
            .unwrap();
        let mut cand: Vec<(T, usize)> = Vec::new();
        for r in 0..=max_r {
            self.visit_shell(center, r, |i| {
                cand.push((vec3::dist_sq(self.points[i], query), i));
            });
            if cand.len() >= k && r < max_r {
                cand.select_nth_unstable_by(k - 1, cmp_candidate);
                let kth = cand[k - 1].0;
                cand.truncate(k);
                // Unvisited cells lie at least r cells away.
                let bound = self.cell * T::of(r as f64);
                if kth < bound * bound {
                    break;
                }
            }
        }
        cand.sort_unstable_by(cmp_candidate);
        cand.truncate(k);
        cand.into_iter().map(|(_, i)| i).collect()
    }

    /// Nearest point to `query` (lowest index on ties).
    pub fn nearest(&self, query: [T; 3]) -> usize {
        self.knn(query, 1)[0]
    }
}

fn cmp_candidate<T: Real>(a: &(T, usize), b: &(T, usize)) -> std::cmp::Ordering {
    a.0.partial_cmp(&b.0)
        .unwrap_or(std::cmp::Ordering::Equal)
        .then(a.1.cmp(&b.1))
}

/// The `k` vertices closest to vertex `query`, the query itself included.
pub fn knn_euclidean<T: Real>(mesh: &Mesh<T>, query: usize, k: usize) -> Result<Vec<usize>> {
    let count = mesh.vertex_count();
    let q = mesh.vertex(query)?;
    if k < 1 || k > count {
        return Err(MeshError::KOutOfRange { k, count });
    }
    Ok(PointIndex::new(mesh.vertices().to_vec()).knn(q, k))
}
