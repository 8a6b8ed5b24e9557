//! Mesh and gate file formats.
//!
//! OBJ subset: `v x y z` and `f i j k` records (1-based indices) plus `#`
//! comments. Simplified PATRAN neutral subset: `N <id> <x> <y> <z>` node
//! cards and `E <id> <n1> <n2> <n3>` triangle cards, whitespace delimited,
//! positive integer ids. Node ids are remapped densely in order of
//! appearance. Gates files are JSON documents.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Gate, Mesh, MeshError, Result, TechnologicalParameters};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Obj,
    Pat,
}

/// A parsed mesh plus the node-id mapping gates are resolved through.
///
/// For OBJ input the node id of a vertex is its 0-based index. For `.pat`
/// input it is the id on the node card.
#[derive(Debug, Clone)]
pub struct LoadedMesh<T> {
    pub mesh: Mesh<T>,
    pub format: MeshFormat,
    node_ids: Vec<u64>,
    lookup: HashMap<u64, usize>,
}

impl<T: Real> LoadedMesh<T> {
    pub fn from_mesh(mesh: Mesh<T>) -> Self {
        let n = mesh.vertex_count() as u64;
        Self {
            mesh,
            format: MeshFormat::Obj,
            node_ids: (0..n).collect(),
            lookup: HashMap::new(),
        }
    }

    /// External node id of each vertex, in vertex order.
    pub fn node_ids(&self) -> &[u64] {
        &self.node_ids
    }

    pub fn vertex_of(&self, node_id: u64) -> Option<usize> {
        match self.format {
            MeshFormat::Obj => {
                let i = usize::try_from(node_id).ok()?;
                (i < self.mesh.vertex_count()).then_some(i)
            }
            MeshFormat::Pat => self.lookup.get(&node_id).copied(),
        }
    }

    /// Maps a gates document onto vertex indices, naming the first gate whose
    /// node is absent.
    pub fn resolve_gates(&self, doc: &GatesDocument) -> Result<Vec<Gate>> {
        let gates = doc
            .gates
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let v = self
                    .vertex_of(g.node_id)
                    .ok_or(MeshError::InvalidGateNode { gate: i, node_id: g.node_id })?;
                Ok(Gate::new(v, g.opening_time))
            })
            .collect::<Result<Vec<_>>>()?;
        super::validate_gates(&self.mesh, &gates)?;
        Ok(gates)
    }
}

fn parse_num<T: Real>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| MeshError::Parse {
        line,
        message: format!("missing {what}"),
    })?;
    let v: f64 = tok.parse().map_err(|_| MeshError::Parse {
        line,
        message: format!("invalid {what} {tok:?}"),
    })?;
    Ok(T::of(v))
}

fn parse_id(tok: Option<&str>, line: usize, what: &str) -> Result<u64> {
    let tok = tok.ok_or_else(|| MeshError::Parse {
        line,
        message: format!("missing {what}"),
    })?;
    match tok.parse::<u64>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(MeshError::Parse {
            line,
            message: format!("invalid {what} {tok:?}"),
        }),
    }
}

fn ensure_end<'a>(mut toks: impl Iterator<Item = &'a str>, line: usize) -> Result<()> {
    match toks.next() {
        None => Ok(()),
        Some(t) => Err(MeshError::Parse {
            line,
            message: format!("unexpected trailing token {t:?}"),
        }),
    }
}

pub fn parse_obj<T: Real>(text: &str) -> Result<Mesh<T>> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    // Face indices are validated after all vertices are known, but errors
    // still report the face's own line.
    let mut face_lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        match toks.next() {
            Some("v") => {
                let x = parse_num(toks.next(), line, "x coordinate")?;
                let y = parse_num(toks.next(), line, "y coordinate")?;
                let z = parse_num(toks.next(), line, "z coordinate")?;
                ensure_end(toks, line)?;
                vertices.push([x, y, z]);
            }
            Some("f") => {
                let idx: Vec<&str> = toks.collect();
                if idx.len() != 3 {
                    return Err(MeshError::NonTriangularFace { line, count: idx.len() });
                }
                let mut tri = [0i64; 3];
                for (slot, tok) in tri.iter_mut().zip(&idx) {
                    *slot = tok.parse().map_err(|_| MeshError::Parse {
                        line,
                        message: format!("invalid face index {tok:?}"),
                    })?;
                }
                faces.push(tri);
                face_lines.push(line);
            }
            Some(other) => {
                return Err(MeshError::Parse {
                    line,
                    message: format!("unsupported record {other:?}"),
                })
            }
            None => unreachable!(),
        }
    }
    let count = vertices.len();
    let mut out = Vec::with_capacity(faces.len());
    for (tri, &line) in faces.iter().zip(&face_lines) {
        let mut f = [0usize; 3];
        for (slot, &index) in f.iter_mut().zip(tri) {
            if index < 1 || index as u64 > count as u64 {
                return Err(MeshError::IndexOutOfRange { line, index, count });
            }
            *slot = (index - 1) as usize;
        }
        out.push(f);
    }
    Mesh::new(vertices, out)
}

pub fn parse_pat<T: Real>(text: &str) -> Result<LoadedMesh<T>> {
    let mut node_ids = Vec::new();
    let mut lookup = HashMap::new();
    let mut vertices = Vec::new();
    let mut elements: Vec<(usize, [u64; 3])> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        match toks.next() {
            Some("N") => {
                let id = parse_id(toks.next(), line, "node id")?;
                let x = parse_num(toks.next(), line, "x coordinate")?;
                let y = parse_num(toks.next(), line, "y coordinate")?;
                let z = parse_num(toks.next(), line, "z coordinate")?;
                ensure_end(toks, line)?;
                if lookup.insert(id, vertices.len()).is_some() {
                    return Err(MeshError::DuplicateNode { line, id });
                }
                node_ids.push(id);
                vertices.push([x, y, z]);
            }
            Some("E") => {
                parse_id(toks.next(), line, "element id")?;
                let a = parse_id(toks.next(), line, "node id")?;
                let b = parse_id(toks.next(), line, "node id")?;
                let c = parse_id(toks.next(), line, "node id")?;
                ensure_end(toks, line)?;
                elements.push((line, [a, b, c]));
            }
            Some(card) => {
                return Err(MeshError::UnknownCard {
                    line,
                    card: card.to_string(),
                })
            }
            None => unreachable!(),
        }
    }
    let mut faces = Vec::with_capacity(elements.len());
    for (line, ids) in elements {
        let mut f = [0usize; 3];
        for (slot, id) in f.iter_mut().zip(ids) {
            *slot = *lookup.get(&id).ok_or(MeshError::MissingNode { line, id })?;
        }
        faces.push(f);
    }
    Ok(LoadedMesh {
        mesh: Mesh::new(vertices, faces)?,
        format: MeshFormat::Pat,
        node_ids,
        lookup,
    })
}

/// Parses either supported format, sniffing the first record.
pub fn parse_mesh<T: Real>(text: &str) -> Result<LoadedMesh<T>> {
    let first = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .find(|l| !l.is_empty());
    match first.and_then(|l| l.split_whitespace().next()) {
        Some("N") | Some("E") => parse_pat(text),
        _ => parse_obj(text).map(LoadedMesh::from_mesh),
    }
}

pub fn load_obj<T: Real>(path: impl AsRef<Path>) -> Result<Mesh<T>> {
    parse_obj(&std::fs::read_to_string(path)?)
}

pub fn load_pat<T: Real>(path: impl AsRef<Path>) -> Result<LoadedMesh<T>> {
    parse_pat(&std::fs::read_to_string(path)?)
}

/// Loads by extension (`.pat` vs anything else as OBJ).
pub fn load_mesh<T: Real>(path: impl AsRef<Path>) -> Result<LoadedMesh<T>> {
    let path = path.as_ref();
    let is_pat = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("pat"))
        .unwrap_or(false);
    if is_pat {
        load_pat(path)
    } else {
        load_obj(path).map(LoadedMesh::from_mesh)
    }
}

/// Writes the OBJ subset. Coordinates use shortest round-trip formatting,
/// so reloading reproduces them bit for bit.
pub fn write_obj<T: Real>(mesh: &Mesh<T>, mut out: impl Write) -> std::io::Result<()> {
    let mut buf = String::with_capacity(mesh.vertex_count() * 48);
    for v in mesh.vertices() {
        let _ = writeln!(buf, "v {} {} {}", v[0], v[1], v[2]);
    }
    for f in mesh.faces() {
        let _ = writeln!(buf, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out.write_all(buf.as_bytes())
}

/// Writes the `.pat` subset with node ids `1..=n` and element ids `1..=m`.
pub fn write_pat<T: Real>(mesh: &Mesh<T>, mut out: impl Write) -> std::io::Result<()> {
    let mut buf = String::with_capacity(mesh.vertex_count() * 48);
    for (i, v) in mesh.vertices().iter().enumerate() {
        let _ = writeln!(buf, "N {} {} {} {}", i + 1, v[0], v[1], v[2]);
    }
    for (i, f) in mesh.faces().iter().enumerate() {
        let _ = writeln!(buf, "E {} {} {} {}", i + 1, f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out.write_all(buf.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub node_id: u64,
    pub opening_time: f64,
}

/// Gates file: gate list plus optional process parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GatesDocument {
    pub gates: Vec<GateRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameters: Option<TechnologicalParameters>,
}

impl GatesDocument {
    pub fn from_gates(gates: &[Gate], parameters: Option<TechnologicalParameters>) -> Self {
        Self {
            gates: gates
                .iter()
                .map(|g| GateRecord {
                    node_id: g.node_id as u64,
                    opening_time: g.opening_time,
                })
                .collect(),
            parameters,
        }
    }
}

pub fn parse_gates(text: &str) -> Result<GatesDocument> {
    let doc: GatesDocument = serde_json::from_str(text)?;
    for (i, g) in doc.gates.iter().enumerate() {
        if !(g.opening_time.is_finite() && g.opening_time >= 0.0) {
            return Err(MeshError::InvalidOpeningTime { gate: i, value: g.opening_time });
        }
    }
    if let Some(p) = &doc.parameters {
        p.validate()?;
    }
    Ok(doc)
}

pub fn load_gates(path: impl AsRef<Path>) -> Result<GatesDocument> {
    parse_gates(&std::fs::read_to_string(path)?)
}

pub fn write_gates(doc: &GatesDocument, out: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(out, doc)?;
    Ok(())
}
