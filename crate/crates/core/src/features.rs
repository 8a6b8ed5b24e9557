//! Per-point gate features for the fill-time regressor.
//!
//! For every point the three geodesically nearest gates contribute their
//! distances, their opening times and two direction cosines, giving eight
//! columns.

use std::io::Write;

use thiserror::Error;

use crate::mesh::{geodesic_distances, Gate, Mesh, MeshError, MeshGraph};
use crate::scalar::{vec3, Real};

pub const FEATURE_COUNT: usize = 8;
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] =
    ["d1", "d2", "d3", "t1", "t2", "t3", "cos_a1", "cos_a2"];

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("at least one gate is required")]
    NoGates,
    #[error("distance table has {rows} rows but {gates} gates were given")]
    TableMismatch { rows: usize, gates: usize },
    #[error("point {point} cannot reach one of its nearest gates")]
    Unreachable { point: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Geodesic distances indexed `[gate][vertex]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateDistanceTable<T> {
    rows: Vec<Vec<T>>,
}

impl<T: Real> GateDistanceTable<T> {
    /// One Dijkstra run per gate node.
    pub fn compute(graph: &MeshGraph<T>, gates: &[Gate]) -> Result<Self, FeatureError> {
        let rows = gates
            .iter()
            .map(|g| geodesic_distances(graph, g.node_id))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { rows })
    }

    /// Wraps precomputed rows (for example from a per-node cache).
    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        Self { rows }
    }

    pub fn gate_count(&self) -> usize {
        self.rows.len()
    }

    pub fn distance(&self, gate: usize, vertex: usize) -> T {
        self.rows[gate][vertex]
    }

    pub fn row(&self, gate: usize) -> &[T] {
        &self.rows[gate]
    }
}

/// The three nearest gates to `point` by geodesic distance, ascending, ties
/// to the lower gate index. With fewer than three gates the nearest one is
/// repeated.
pub fn nearest_gates<T: Real>(
    table: &GateDistanceTable<T>,
    point: usize,
) -> Result<[usize; 3], FeatureError> {
    let n = table.gate_count();
    if n == 0 {
        return Err(FeatureError::NoGates);
    }
    let mut best: [Option<(T, usize)>; 3] = [None; 3];
    for g in 0..n {
        let cand = (table.distance(g, point), g);
        // insertion into a sorted top-3; strict comparison keeps lower
        // indices ahead on ties
        let mut slot = 3;
        for (i, b) in best.iter().enumerate() {
            match b {
                None => {
                    slot = i;
                    break;
                }
                Some((d, _)) if cand.0 < *d => {
                    slot = i;
                    break;
                }
                _ => {}
            }
        }
        if slot < 3 {
            for i in (slot + 1..3).rev() {
                best[i] = best[i - 1];
            }
            best[slot] = Some(cand);
        }
    }
    let first = best[0].unwrap().1;
    Ok([
        first,
        best[1].map_or(first, |b| b.1),
        best[2].map_or(first, |b| b.1),
    ])
}

/// Unit chord from a point towards a gate node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orientation<T> {
    pub direction: [T; 3],
    /// Set when the point is the gate node; `direction` is then zero.
    pub coincident: bool,
}

pub fn gate_orientation<T: Real>(
    mesh: &Mesh<T>,
    point: usize,
    gate: &Gate,
) -> Result<Orientation<T>, FeatureError> {
    let p = mesh.vertex(point)?;
    let g = mesh.vertex(gate.node_id)?;
    let chord = vec3::sub(g, p);
    let norm = vec3::norm(chord);
    if norm > T::zero() {
        Ok(Orientation {
            direction: [chord[0] / norm, chord[1] / norm, chord[2] / norm],
            coincident: false,
        })
    } else {
        Ok(Orientation {
            direction: [T::zero(); 3],
            coincident: true,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateFeatureVector<T> {
    /// Geodesic distances to the three nearest gates, ascending (mm).
    pub distances: [T; 3],
    /// Opening times of those gates (s).
    pub opening_times: [T; 3],
    pub cos_a1: T,
    pub cos_a2: T,
}

impl<T: Real> GateFeatureVector<T> {
    pub fn to_array(&self) -> [T; FEATURE_COUNT] {
        let [d1, d2, d3] = self.distances;
        let [t1, t2, t3] = self.opening_times;
        [d1, d2, d3, t1, t2, t3, self.cos_a1, self.cos_a2]
    }
}

fn cosine<T: Real>(a: &Orientation<T>, b: &Orientation<T>) -> T {
    if a.coincident || b.coincident {
        return T::one();
    }
    vec3::dot(a.direction, b.direction).max(-T::one()).min(T::one())
}

/// One feature row per requested point.
pub fn extract_features<T: Real>(
    mesh: &Mesh<T>,
    gates: &[Gate],
    table: &GateDistanceTable<T>,
    points: &[usize],
) -> Result<Vec<GateFeatureVector<T>>, FeatureError> {
    if gates.is_empty() {
        return Err(FeatureError::NoGates);
    }
    if table.gate_count() != gates.len() {
        return Err(FeatureError::TableMismatch {
            rows: table.gate_count(),
            gates: gates.len(),
        });
    }
    points
        .iter()
        .map(|&p| {
            mesh.vertex(p)?;
            let near = nearest_gates(table, p)?;
            let distances = near.map(|g| table.distance(g, p));
            if distances.iter().any(|d| !d.is_finite()) {
                return Err(FeatureError::Unreachable { point: p });
            }
            let opening_times = near.map(|g| T::of(gates[g].opening_time));
            let o = [
                gate_orientation(mesh, p, &gates[near[0]])?,
                gate_orientation(mesh, p, &gates[near[1]])?,
                gate_orientation(mesh, p, &gates[near[2]])?,
            ];
            Ok(GateFeatureVector {
                distances,
                opening_times,
                cos_a1: cosine(&o[0], &o[1]),
                cos_a2: cosine(&o[0], &o[2]),
            })
        })
        .collect()
}

/// Row-major feature matrix, optionally with constant extra columns (the
/// technological parameters) appended to every row.
pub fn feature_matrix<T: Real>(rows: &[GateFeatureVector<T>], extra: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(rows.len() * (FEATURE_COUNT + extra.len()));
    for r in rows {
        out.extend_from_slice(&r.to_array());
        out.extend_from_slice(extra);
    }
    out
}

/// Comma-separated export with a `target` column.
pub fn write_feature_table<T: Real>(
    rows: &[GateFeatureVector<T>],
    targets: &[T],
    mut out: impl Write,
) -> std::io::Result<()> {
    assert_eq!(rows.len(), targets.len(), "one target per row");
    writeln!(out, "{},target", FEATURE_NAMES.join(","))?;
    for (r, t) in rows.iter().zip(targets) {
        let cells: Vec<String> = r.to_array().iter().map(|v| v.to_string()).collect();
        writeln!(out, "{},{}", cells.join(","), t)?;
    }
    Ok(())
}
