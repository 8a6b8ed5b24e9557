use serde::{Deserialize, Serialize};

use super::ProjectionError;
use crate::scalar::{vec3, Real};

/// Least-squares plane through a point set with an orthonormal in-plane
/// frame. `basis_u x basis_v = normal`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionPlane<T> {
    pub origin: [T; 3],
    pub basis_u: [T; 3],
    pub basis_v: [T; 3],
    pub normal: [T; 3],
}

impl<T: Real> ProjectionPlane<T> {
    /// In-plane coordinates `(u, v)` of a point.
    pub fn coordinates(&self, p: [T; 3]) -> [T; 2] {
        let d = vec3::sub(p, self.origin);
        [vec3::dot(d, self.basis_u), vec3::dot(d, self.basis_v)]
    }

    /// Signed distance along the normal.
    pub fn height(&self, p: [T; 3]) -> T {
        vec3::dot(vec3::sub(p, self.origin), self.normal)
    }

    /// Sum of squared point-to-plane distances.
    pub fn squared_error(&self, points: &[[T; 3]]) -> T {
        points.iter().map(|&p| self.height(p).powi(2)).sum()
    }
}

/// Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi sweeps.
/// Returns eigenvalues and column eigenvectors (`vecs[i]` pairs with
/// `vals[i]`), unsorted.
pub(crate) fn symmetric_eigen<T: Real>(m: [[T; 3]; 3]) -> ([T; 3], [[T; 3]; 3]) {
    let mut a = m;
    let mut v = [[T::zero(); 3]; 3];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = T::one();
    }
    let two = T::of(2.0);
    for _sweep in 0..64 {
        let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
        let diag = a[0][0].abs() + a[1][1].abs() + a[2][2].abs();
        if off == T::zero() || off <= diag * T::epsilon() * T::of(1e-3) {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            if a[p][q] == T::zero() {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (two * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
            let c = T::one() / (t * t + T::one()).sqrt();
            let s = t * c;
            // A <- J^T A J
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let vp = row[p];
                let vq = row[q];
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    let vals = [a[0][0], a[1][1], a[2][2]];
    let vecs = [
        [v[0][0], v[1][0], v[2][0]],
        [v[0][1], v[1][1], v[2][1]],
        [v[0][2], v[1][2], v[2][2]],
    ];
    (vals, vecs)
}

/// Flips `v` so its largest-magnitude component is positive (earliest axis
/// on ties).
fn canonical_sign<T: Real>(v: [T; 3]) -> [T; 3] {
    let mut best = 0;
    for a in 1..3 {
        if v[a].abs() > v[best].abs() {
            best = a;
        }
    }
    if v[best] < T::zero() {
        vec3::scale(v, -T::one())
    } else {
        v
    }
}

fn normalize<T: Real>(v: [T; 3]) -> [T; 3] {
    vec3::scale(v, T::one() / vec3::norm(v))
}

/// Fits the plane minimising summed squared orthogonal distances: origin at
/// the centroid, normal along the least-variance principal axis, `basis_u`
/// along the greatest-variance axis.
pub fn fit_plane<T: Real>(points: &[[T; 3]]) -> Result<ProjectionPlane<T>, ProjectionError> {
    if points.len() < 3 {
        return Err(ProjectionError::Degenerate("fewer than three points"));
    }
    let origin = crate::mesh::centroid(points);
    let mut cov = [[T::zero(); 3]; 3];
    for &p in points {
        let d = vec3::sub(p, origin);
        for i in 0..3 {
            for j in i..3 {
                cov[i][j] += d[i] * d[j];
            }
        }
    }
    for i in 0..3 {
        for j in 0..i {
            cov[i][j] = cov[j][i];
        }
    }
    let (vals, vecs) = symmetric_eigen(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap().then(a.cmp(&b)));
    let (small, mid, large) = (vals[order[0]], vals[order[1]], vals[order[2]]);
    if !(large > T::zero()) {
        return Err(ProjectionError::Degenerate("coincident points"));
    }
    if mid <= large * T::epsilon() * T::of(64.0) {
        return Err(ProjectionError::Degenerate("collinear points"));
    }
    let _ = small;
    let normal = canonical_sign(normalize(vecs[order[0]]));
    let u = vecs[order[2]];
    // re-orthogonalise against the normal before fixing the sign
    let u = canonical_sign(normalize(vec3::sub(u, vec3::scale(normal, vec3::dot(u, normal)))));
    let v = vec3::cross(normal, u);
    Ok(ProjectionPlane {
        origin,
        basis_u: u,
        basis_v: v,
        normal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizontal_plane() {
        let pts: Vec<[f64; 3]> = (0..50)
            .map(|i| [(i % 10) as f64 * 1.5, (i / 10) as f64 * 0.7, 5.0])
            .collect();
        let p = fit_plane(&pts).unwrap();
        assert_eq!(p.normal, [0.0, 0.0, 1.0]);
        assert_eq!(p.origin[2], 5.0);
        assert!((vec3::dot(p.basis_u, [1.0, 0.0, 0.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frame_is_right_handed_and_orthonormal() {
        let pts: Vec<[f64; 3]> = (0..200)
            .map(|i| {
                let t = i as f64 * 0.37;
                [t.cos() * 10.0, t.sin() * 3.0 + 0.2 * t, 0.3 * t.cos()]
            })
            .collect();
        let p = fit_plane(&pts).unwrap();
        for (a, b) in [(p.basis_u, p.basis_v), (p.basis_u, p.normal), (p.basis_v, p.normal)] {
            assert!(vec3::dot(a, b).abs() < 1e-12);
        }
        for a in [p.basis_u, p.basis_v, p.normal] {
            assert!((vec3::norm(a) - 1.0).abs() < 1e-12);
        }
        let c = vec3::cross(p.basis_u, p.basis_v);
        for i in 0..3 {
            assert!((c[i] - p.normal[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_sets() {
        let line: Vec<[f64; 3]> = (0..10).map(|i| [i as f64, 2.0 * i as f64, 0.0]).collect();
        assert!(matches!(fit_plane(&line), Err(ProjectionError::Degenerate(_))));
        let same = vec![[1.0, 1.0, 1.0]; 5];
        assert!(matches!(fit_plane(&same), Err(ProjectionError::Degenerate(_))));
        assert!(fit_plane::<f64>(&[[0.0; 3], [1.0, 0.0, 0.0]]).is_err());
    }

    #[test]
    fn jacobi_reconstructs_matrix() {
        let m = [[4.0, 1.0, -2.0], [1.0, 2.0, 0.5], [-2.0, 0.5, 3.0]];
        let (vals, vecs) = symmetric_eigen(m);
        for i in 0..3 {
            for j in 0..3 {
                let r: f64 = (0..3).map(|k| vecs[k][i] * vals[k] * vecs[k][j]).sum();
                assert!((r - m[i][j]).abs() < 1e-12, "{i}{j}");
            }
        }
    }
}
