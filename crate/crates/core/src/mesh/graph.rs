use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{Mesh, MeshError, Result};
use crate::scalar::{vec3, Real};

/// Undirected edge graph of a mesh, weighted by Euclidean edge length.
#[derive(Debug, Clone)]
pub struct MeshGraph<T> {
    adjacency: Vec<Vec<(usize, T)>>,
    edge_count: usize,
}

impl<T: Real> MeshGraph<T> {
    /// One edge per unique vertex pair appearing in any face. Neighbour
    /// lists are sorted by vertex id.
    pub fn build(mesh: &Mesh<T>) -> Self {
        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(mesh.face_count() * 3);
        for f in mesh.faces() {
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                edges.push((a.min(b), a.max(b)));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let vs = mesh.vertices();
        let mut adjacency = vec![Vec::new(); mesh.vertex_count()];
        for &(a, b) in &edges {
            let w = vec3::dist(vs[a], vs[b]);
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
        }
        for list in &mut adjacency {
            list.sort_unstable_by_key(|&(v, _)| v);
        }
        Self {
            adjacency,
            edge_count: edges.len(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, T)] {
        &self.adjacency[v]
    }

    /// Unique edges as `(a, b, length)` with `a < b`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(a, list)| {
            list.iter()
                .filter(move |&&(b, _)| b > a)
                .map(move |&(b, w)| (a, b, w))
        })
    }
}

/// Distances of unreachable vertices.
pub const UNREACHABLE: f64 = f64::INFINITY;

#[derive(Clone, Copy)]
struct Entry<T> {
    dist: T,
    vertex: usize,
}

impl<T: Real> PartialEq for Entry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Real> Eq for Entry<T> {}

impl<T: Real> Ord for Entry<T> {
    // min-heap on distance, then vertex id
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl<T: Real> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest path lengths over the edge graph (Dijkstra).
///
/// Vertices outside the source's component get `T::infinity()`
/// (see [`UNREACHABLE`]).
pub fn geodesic_distances<T: Real>(graph: &MeshGraph<T>, source: usize) -> Result<Vec<T>> {
    let n = graph.vertex_count();
    if source >= n {
        return Err(MeshError::InvalidVertex { id: source, count: n });
    }
    let mut dist = vec![T::infinity(); n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = T::zero();
    heap.push(Entry { dist: T::zero(), vertex: source });
    while let Some(Entry { dist: d, vertex: u }) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &(v, w) in graph.neighbors(u) {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Entry { dist: nd, vertex: v });
            }
        }
    }
    Ok(dist)
}
