//! Dataset directories: `manifest.json` plus, per sample, an OBJ mesh, a
//! gates document and a `vertex_id,fill_time,deflection` table.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sample::{Provenance, SimulationSample};
use super::synth::SynthConfig;
use super::HarnessError;
use crate::mesh::{load_gates, load_mesh, write_gates, write_obj, GatesDocument, LoadedMesh};

pub const DATASET_MANIFEST: &str = "manifest.json";
const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub name: String,
    pub mesh: String,
    pub gates: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fields: Option<String>,
    pub vertex_count: usize,
    pub face_count: usize,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthConfig>,
    pub samples: Vec<DatasetEntry>,
}

/// Writes the per-vertex table. Values use the shortest representation
/// that parses back to the same `f64`.
pub fn write_fields_csv(out: impl Write, fill_time: &[f64], deflection: Option<&[f64]>) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| HarnessError::Io(e.into());
    w.write_record(["vertex_id", "fill_time", "deflection"]).map_err(io)?;
    for (i, &t) in fill_time.iter().enumerate() {
        let d = deflection.map(|d| d[i].to_string()).unwrap_or_default();
        w.write_record([i.to_string(), t.to_string(), d]).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a per-vertex table; rows must list vertex ids `0..n` in order. An
/// empty deflection column yields `None`.
pub fn read_fields_csv(input: impl Read, path: &str) -> Result<(Vec<f64>, Option<Vec<f64>>), HarnessError> {
    let mut r = csv::Reader::from_reader(input);
    let err = |line: usize, message: String| HarnessError::Fields { path: path.to_string(), line, message };
    let headers = r.headers().map_err(|e| err(1, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["vertex_id", "fill_time", "deflection"] {
        return Err(err(1, "expected header vertex_id,fill_time,deflection".into()));
    }
    let mut fill = Vec::new();
    let mut defl = Vec::new();
    let mut missing_deflection = false;
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| err(line, e.to_string()))?;
        let id: usize = rec[0].parse().map_err(|_| err(line, format!("bad vertex id {:?}", &rec[0])))?;
        if id != i {
            return Err(err(line, format!("expected vertex id {i}, found {id}")));
        }
        let t: f64 = rec[1].parse().map_err(|_| err(line, format!("bad fill time {:?}", &rec[1])))?;
        fill.push(t);
        if rec[2].is_empty() {
            missing_deflection = true;
        } else {
            defl.push(rec[2].parse::<f64>().map_err(|_| err(line, format!("bad deflection {:?}", &rec[2])))?);
        }
    }
    if missing_deflection && !defl.is_empty() {
        return Err(err(0, "deflection column is only partly filled".into()));
    }
    Ok((fill, (!missing_deflection).then_some(defl)))
}

/// Writes every sample plus a manifest into `dir`.
pub fn export_dataset(
    samples: &[SimulationSample<f64>],
    dir: &Path,
    synth: Option<&SynthConfig>,
) -> Result<DatasetManifest, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(samples.len());
    for s in samples {
        let mesh = format!("{}.obj", s.name);
        let gates = format!("{}.gates.json", s.name);
        write_obj(&s.mesh, BufWriter::new(File::create(dir.join(&mesh))?))?;
        let doc = GatesDocument::from_gates(&s.gates, Some(s.parameters.clone()));
        write_gates(&doc, BufWriter::new(File::create(dir.join(&gates))?))?;
        let fields = match &s.fill_time {
            Some(fill) => {
                let name = format!("{}.fields.csv", s.name);
                let file = BufWriter::new(File::create(dir.join(&name))?);
                write_fields_csv(file, fill, s.deflection.as_deref())?;
                Some(name)
            }
            None => None,
        };
        entries.push(DatasetEntry {
            name: s.name.clone(),
            mesh,
            gates,
            fields,
            vertex_count: s.mesh.vertex_count(),
            face_count: s.mesh.face_count(),
            provenance: s.provenance,
        });
    }
    let manifest = DatasetManifest { format_version: DATASET_FORMAT_VERSION, synth: synth.cloned(), samples: entries };
    std::fs::write(dir.join(DATASET_MANIFEST), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Loads a sample from its files. Without a fields file the sample is
/// prediction-only.
pub fn import_sample(
    mesh_path: &Path,
    gates_path: &Path,
    fields_path: Option<&Path>,
) -> Result<SimulationSample<f64>, HarnessError> {
    let loaded: LoadedMesh<f64> = load_mesh(mesh_path)?;
    let doc = load_gates(gates_path)?;
    let gates = loaded.resolve_gates(&doc)?;
    let parameters = doc.parameters.clone().unwrap_or_default();
    parameters.validate()?;
    let (fill_time, deflection) = match fields_path {
        Some(p) => {
            let (f, d) = read_fields_csv(File::open(p)?, &p.display().to_string())?;
            let n = loaded.mesh.vertex_count();
            if f.len() != n {
                return Err(HarnessError::Length { pred: f.len(), truth: n });
            }
            (Some(f), d)
        }
        None => (None, None),
    };
    let name = mesh_path
        .file_name()
        .and_then(|s| s.to_str())
        .map(|s| s.split('.').next().unwrap_or(s).to_string())
        .unwrap_or_default();
    Ok(SimulationSample {
        name,
        mesh: loaded.mesh,
        gates,
        parameters,
        fill_time,
        deflection,
        provenance: Provenance::Imported,
    })
}

/// Loads every sample listed in `dir/manifest.json`, keeping recorded
/// provenance.
pub fn load_dataset(dir: &Path) -> Result<Vec<SimulationSample<f64>>, HarnessError> {
    let manifest: DatasetManifest = serde_json::from_slice(&std::fs::read(dir.join(DATASET_MANIFEST))?)?;
    if manifest.format_version != DATASET_FORMAT_VERSION {
        return Err(HarnessError::Config(format!("unsupported dataset version {}", manifest.format_version)));
    }
    manifest
        .samples
        .iter()
        .map(|e| {
            let fields = e.fields.as_ref().map(|f| dir.join(f));
            let mut s = import_sample(&dir.join(&e.mesh), &dir.join(&e.gates), fields.as_deref())?;
            s.name = e.name.clone();
            s.provenance = e.provenance;
            Ok(s)
        })
        .collect()
}
