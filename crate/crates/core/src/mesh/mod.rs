//! Triangle surface meshes, their edge graphs, and the spatial queries the
//! pipeline runs over vertices.

mod graph;
mod io;
mod sampling;
mod spatial;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{vec3, Real};

pub use graph::{geodesic_distances, MeshGraph, UNREACHABLE};
pub use io::{
    load_gates, load_mesh, load_obj, load_pat, parse_gates, parse_mesh, parse_obj, parse_pat,
    write_gates, write_obj, write_pat, GateRecord, GatesDocument, LoadedMesh, MeshFormat,
};
pub use sampling::subsample;
pub use spatial::{knn_euclidean, PointIndex};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: face has {count} vertices, only triangles are supported")]
    NonTriangularFace { line: usize, count: usize },
    #[error("line {line}: vertex index {index} out of range (mesh has {count} vertices)")]
    IndexOutOfRange { line: usize, index: i64, count: usize },
    #[error("line {line}: unknown card type {card:?}")]
    UnknownCard { line: usize, card: String },
    #[error("line {line}: element references missing node {id}")]
    MissingNode { line: usize, id: u64 },
    #[error("line {line}: duplicate node id {id}")]
    DuplicateNode { line: usize, id: u64 },
    #[error("face {face} references vertex {index} but mesh has {count} vertices")]
    FaceIndex { face: usize, index: usize, count: usize },
    #[error("face {face} repeats a vertex index")]
    RepeatedIndex { face: usize },
    #[error("face {face} has a zero-length edge")]
    ZeroLengthEdge { face: usize },
    #[error("vertex {vertex} has a non-finite coordinate")]
    NonFinite { vertex: usize },
    #[error("mesh has no vertices")]
    Empty,
    #[error("vertex id {id} out of range (mesh has {count} vertices)")]
    InvalidVertex { id: usize, count: usize },
    #[error("k = {k} out of range 1..={count}")]
    KOutOfRange { k: usize, count: usize },
    #[error("fraction {0} out of range (0, 1]")]
    FractionOutOfRange(f64),
    #[error("gate {gate} references node {node_id} which is not in the mesh")]
    InvalidGateNode { gate: usize, node_id: u64 },
    #[error("gate {gate} has invalid opening time {value}")]
    InvalidOpeningTime { gate: usize, value: f64 },
    #[error("technological parameter {name} has invalid value {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("malformed gates document: {0}")]
    GatesDocument(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = MeshError> = std::result::Result<T, E>;

/// Triangle surface in millimetres.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<T> {
    vertices: Vec<[T; 3]>,
    faces: Vec<[usize; 3]>,
}

impl<T: Real> Mesh<T> {
    /// Builds a mesh, rejecting anything that violates the index, degeneracy
    /// or finiteness invariants.
    pub fn new(vertices: Vec<[T; 3]>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(MeshError::Empty);
        }
        if let Some(vertex) = vertices
            .iter()
            .position(|v| !v.iter().all(|c| c.is_finite()))
        {
            return Err(MeshError::NonFinite { vertex });
        }
        let count = vertices.len();
        for (face, tri) in faces.iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i >= count) {
                return Err(MeshError::FaceIndex { face, index, count });
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::RepeatedIndex { face });
            }
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                if !(vec3::dist(vertices[a], vertices[b]) > T::zero()) {
                    return Err(MeshError::ZeroLengthEdge { face });
                }
            }
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &[[T; 3]] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn vertex(&self, id: usize) -> Result<[T; 3]> {
        self.vertices.get(id).copied().ok_or(MeshError::InvalidVertex {
            id,
            count: self.vertices.len(),
        })
    }

    pub fn bounding_box(&self) -> ([T; 3], [T; 3]) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            for a in 0..3 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        (lo, hi)
    }

    /// Length of the bounding-box diagonal.
    pub fn diagonal(&self) -> T {
        let (lo, hi) = self.bounding_box();
        vec3::dist(lo, hi)
    }

    pub fn centroid(&self) -> [T; 3] {
        centroid(&self.vertices)
    }

    /// Applies `f` to every vertex, keeping connectivity.
    pub fn map_vertices(&self, f: impl Fn([T; 3]) -> [T; 3]) -> Result<Self> {
        Self::new(self.vertices.iter().map(|&v| f(v)).collect(), self.faces.clone())
    }

    /// Number of connected components of the face graph, counting isolated
    /// vertices as their own component.
    pub fn component_count(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.vertices.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for f in &self.faces {
            for e in 0..2 {
                let a = find(&mut parent, f[e]);
                let b = find(&mut parent, f[e + 1]);
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        (0..parent.len()).filter(|&i| find(&mut parent, i) == i).count()
    }
}

pub(crate) fn centroid<T: Real>(points: &[[T; 3]]) -> [T; 3] {
    let mut c = [T::zero(); 3];
    for p in points {
        for a in 0..3 {
            c[a] += p[a];
        }
    }
    let n = T::of(points.len() as f64);
    [c[0] / n, c[1] / n, c[2] / n]
}

/// Injection gate: the node where melt enters and when it opens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub node_id: usize,
    /// Seconds after injection start.
    pub opening_time: f64,
}

impl Gate {
    pub fn new(node_id: usize, opening_time: f64) -> Self {
        Self { node_id, opening_time }
    }
}

/// Checks gate node ids against the mesh and opening times for sanity.
pub fn validate_gates<T: Real>(mesh: &Mesh<T>, gates: &[Gate]) -> Result<()> {
    for (i, g) in gates.iter().enumerate() {
        if g.node_id >= mesh.vertex_count() {
            return Err(MeshError::InvalidGateNode {
                gate: i,
                node_id: g.node_id as u64,
            });
        }
        if !(g.opening_time.is_finite() && g.opening_time >= 0.0) {
            return Err(MeshError::InvalidOpeningTime {
                gate: i,
                value: g.opening_time,
            });
        }
    }
    Ok(())
}

/// Process settings carried with a sample as metadata.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TechnologicalParameters {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub melt_temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cooling_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filling_pressure: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient_temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mold_temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fill_end_time: Option<f64>,
}

impl TechnologicalParameters {
    pub fn validate(&self) -> Result<()> {
        let temps = [
            ("melt_temperature", self.melt_temperature),
            ("ambient_temperature", self.ambient_temperature),
            ("mold_temperature", self.mold_temperature),
        ];
        for (name, v) in temps {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(MeshError::InvalidParameter { name, value: v });
                }
            }
        }
        let nonneg = [
            ("cooling_time", self.cooling_time),
            ("duration", self.duration),
            ("filling_pressure", self.filling_pressure),
            ("fill_end_time", self.fill_end_time),
        ];
        for (name, v) in nonneg {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(MeshError::InvalidParameter { name, value: v });
                }
            }
        }
        Ok(())
    }

    /// Values in declaration order for the optional extra regressor columns;
    /// missing entries become zero.
    pub fn as_row(&self) -> [f64; 7] {
        [
            self.melt_temperature.unwrap_or(0.0),
            self.cooling_time.unwrap_or(0.0),
            self.duration.unwrap_or(0.0),
            self.filling_pressure.unwrap_or(0.0),
            self.ambient_temperature.unwrap_or(0.0),
            self.mold_temperature.unwrap_or(0.0),
            self.fill_end_time.unwrap_or(0.0),
        ]
    }
}
