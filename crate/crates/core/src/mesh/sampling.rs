use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Mesh, MeshError, Result};
use crate::scalar::Real;

/// `floor(fraction * n)` distinct vertex ids drawn uniformly without
/// replacement, returned in ascending order. Deterministic per seed.
pub fn subsample<T: Real>(mesh: &Mesh<T>, fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(MeshError::FractionOutOfRange(fraction));
    }
    let n = mesh.vertex_count();
    let amount = ((n as f64) * fraction).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids = rand::seq::index::sample(&mut rng, n, amount.min(n)).into_vec();
    ids.sort_unstable();
    Ok(ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strip(n: usize) -> Mesh<f64> {
        let vertices: Vec<[f64; 3]> = (0..n)
            .map(|i| [(i / 2) as f64, (i % 2) as f64, 0.0])
            .collect();
        let faces = (0..n - 2).map(|i| [i, i + 1, i + 2]).collect();
        Mesh::new(vertices, faces).unwrap()
    }

    #[test]
    fn full_fraction_returns_everything() {
        let m = strip(50);
        assert_eq!(subsample(&m, 1.0, 3).unwrap(), (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn one_eighth_of_eighty_thousand() {
        let m = strip(80_000);
        let ids = subsample(&m, 1.0 / 8.0, 1).unwrap();
        assert_eq!(ids.len(), 10_000);
        assert!(ids.windows(2).all(|w| w[0] < w[1]));
        assert!(*ids.last().unwrap() < 80_000);
    }

    #[test]
    fn deterministic_per_seed() {
        let m = strip(1000);
        let a = subsample(&m, 0.125, 42).unwrap();
        assert_eq!(a, subsample(&m, 0.125, 42).unwrap());
        assert_ne!(a, subsample(&m, 0.125, 43).unwrap());
    }

    #[test]
    fn fraction_range() {
        let m = strip(10);
        for f in [0.0, -0.5, 1.5, f64::NAN] {
            assert!(matches!(subsample(&m, f, 0), Err(MeshError::FractionOutOfRange(_))));
        }
    }
}
