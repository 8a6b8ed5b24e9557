//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

use flowsurrogate::mesh::{Mesh, MeshGraph};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Jittered, bumpy `nx x ny` grid with random diagonals and a shuffled
/// vertex order.
pub fn random_grid_mesh(nx: usize, ny: usize, seed: u64) -> Mesh<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..nx * ny).collect();
    order.shuffle(&mut rng);
    let mut verts = vec![[0.0; 3]; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let x = i as f64 + rng.gen_range(-0.3..0.3);
            let y = j as f64 + rng.gen_range(-0.3..0.3);
            let z = 0.3 * (x * 0.7).sin() + rng.gen_range(-0.2..0.2);
            verts[order[j * nx + i]] = [x * 3.0, y * 3.0, z * 3.0];
        }
    }
    let id = |i: usize, j: usize| order[j * nx + i];
    let mut faces = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if rng.gen_bool(0.5) {
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            } else {
                faces.push([a, b, d]);
                faces.push([b, c, d]);
            }
        }
    }
    Mesh::new(verts, faces).unwrap()
}

/// All-pairs shortest paths by Floyd–Warshall. Row `s` holds the length of
/// each recovered path summed edge by edge from `s`, the order a
/// single-source search accumulates in.
pub fn floyd_warshall(graph: &MeshGraph<f64>) -> Vec<Vec<f64>> {
    let n = graph.vertex_count();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    let mut next = vec![vec![usize::MAX; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
        next[i][i] = i;
    }
    for (a, b, w) in graph.edges() {
        d[a][b] = w;
        d[b][a] = w;
        next[a][b] = b;
        next[b][a] = a;
    }
    for k in 0..n {
        for i in 0..n {
            if d[i][k].is_infinite() {
                continue;
            }
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                    next[i][j] = next[i][k];
                }
            }
        }
    }
    let weight = |a: usize, b: usize| {
        graph.neighbors(a).iter().find(|&&(v, _)| v == b).map(|&(_, w)| w).unwrap()
    };
    (0..n)
        .map(|s| {
            (0..n)
                .map(|t| {
                    if next[s][t] == usize::MAX {
                        return f64::INFINITY;
                    }
                    let (mut u, mut sum) = (s, 0.0);
                    while u != t {
                        let v = next[u][t];
                        sum += weight(u, v);
                        u = v;
                    }
                    sum
                })
                .collect()
        })
        .collect()
}

/// SSE-optimal threshold of a single-feature depth-1 split, trying every
/// midpoint between consecutive distinct values. Ties keep the lower
/// threshold.
pub fn best_stump(x: &[f64], y: &[f64], min_leaf: usize) -> Option<(f64, f64)> {
    let mut xs: Vec<f64> = x.to_vec();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut best: Option<(f64, f64)> = None;
    for w in xs.windows(2) {
        let thr = (w[0] + w[1]) / 2.0;
        let (l, r): (Vec<f64>, Vec<f64>) = {
            let mut l = Vec::new();
            let mut r = Vec::new();
            for (&xi, &yi) in x.iter().zip(y) {
                if xi <= thr { l.push(yi) } else { r.push(yi) }
            }
            (l, r)
        };
        if l.len() < min_leaf || r.len() < min_leaf {
            continue;
        }
        let sse = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|a| (a - m) * (a - m)).sum::<f64>()
        };
        let s = sse(&l) + sse(&r);
        if best.is_none_or(|(_, b)| s < b) {
            best = Some((thr, s));
        }
    }
    best
}
