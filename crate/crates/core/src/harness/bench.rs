use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::mesh::{parse_gates, parse_mesh, LoadedMesh};
use crate::pipeline::{gate_table, prepare, run_prepared, Models, PipelineConfig, StageTimings};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineDescriptor {
    pub os: String,
    pub arch: String,
    pub logical_cpus: usize,
    pub cpu_model: Option<String>,
}

impl MachineDescriptor {
    pub fn current() -> Self {
        let cpu_model = std::fs::read_to_string("/proc/cpuinfo").ok().and_then(|text| {
            text.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|s| s.trim().to_string())
        });
        Self {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            logical_cpus: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            cpu_model,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub vertices: usize,
    pub faces: usize,
    pub gates: usize,
    pub timings: StageTimings,
    pub machine: MachineDescriptor,
}

/// Times one prediction from file contents. Pre-processing covers parsing,
/// the edge graph, Dijkstra, the subsample and its neighbourhoods; fill
/// time covers features, the regressor and smoothing; deflection covers
/// projection, the network, upscaling and reprojection.
pub fn benchmark(
    mesh_text: &str,
    gates_text: &str,
    models: &Models,
    config: &PipelineConfig,
) -> Result<BenchmarkRecord, HarnessError> {
    let start = Instant::now();
    let loaded: LoadedMesh<f64> = parse_mesh(mesh_text)?;
    let doc = parse_gates(gates_text)?;
    let gates = loaded.resolve_gates(&doc)?;
    let params = doc.parameters.clone().unwrap_or_default();
    let (vertices, faces) = (loaded.mesh.vertex_count(), loaded.mesh.face_count());
    let prep = prepare(loaded.mesh, config, config.seed)?;
    let table = gate_table(&prep, &gates)?;
    let preprocessing = start.elapsed().as_secs_f64();
    let (_, _, fill_time, deflection) = run_prepared(&prep, &gates, &table, &params, models, config, true)?;
    let total = start.elapsed().as_secs_f64();
    Ok(BenchmarkRecord {
        vertices,
        faces,
        gates: gates.len(),
        timings: StageTimings { preprocessing, fill_time, deflection, total },
        machine: MachineDescriptor::current(),
    })
}
