//! The prediction chain shared by the command line, the HTTP service and
//! cross-validation: geodesic gate features, boosted fill time, smoothing,
//! projection, the deflection network and reprojection.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnn::{self, CnnError, Network, Tensor, TrainConfig, TrainingSample};
use crate::features::{extract_features, feature_matrix, FeatureError, GateDistanceTable};
use crate::gbm::{self, GbmConfig, GbmError, GbmModel, Neighborhoods};
use crate::harness::{derive_seed, SimulationSample};
use crate::mesh::{subsample, validate_gates, Gate, Mesh, MeshError, MeshGraph, TechnologicalParameters};
use crate::projection::{
    downsample_masked, fit_plane, project, reproject, upscale_bilinear, Correspondence, Map2,
    ProjectionError, RasterMap, NET_OUTPUT_HEIGHT, NET_OUTPUT_WIDTH,
};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Gbm(#[from] GbmError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Cnn(#[from] CnnError),
    #[error("sample {0} has no reference fields")]
    MissingTruth(String),
    #[error("no training samples")]
    NoSamples,
    #[error("{0} model is not loaded")]
    MissingModel(&'static str),
    #[error("model file {path}: {message}")]
    ModelFile { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Share of vertices that receive a direct fill-time prediction.
    pub sample_fraction: f64,
    /// Neighbourhood size used to spread sampled predictions.
    pub smoothing_k: usize,
    /// Seeds the vertex subsample.
    pub seed: u64,
    /// Append the seven technological parameters as regressor columns.
    pub append_parameters: bool,
    pub gbm: GbmConfig,
    pub cnn: TrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sample_fraction: 0.125,
            smoothing_k: 100,
            seed: 0,
            append_parameters: false,
            gbm: GbmConfig::default(),
            cnn: TrainConfig::default(),
        }
    }
}

/// Everything about a mesh that does not depend on gates or models.
#[derive(Debug, Clone)]
pub struct PreparedMesh<T> {
    pub mesh: Mesh<T>,
    pub graph: MeshGraph<T>,
    pub sampled: Vec<usize>,
    pub neighborhoods: Neighborhoods,
}

/// Builds the edge graph, draws the vertex subsample (at least one vertex)
/// and its neighbourhoods. `k` is capped at the vertex count.
pub fn prepare<T: Real>(mesh: Mesh<T>, config: &PipelineConfig, seed: u64) -> Result<PreparedMesh<T>, PipelineError> {
    let n = mesh.vertex_count();
    let fraction = config.sample_fraction.max(1.0 / n as f64).min(1.0);
    let sampled = subsample(&mesh, fraction, seed)?;
    let graph = MeshGraph::build(&mesh);
    let neighborhoods = Neighborhoods::build(&mesh, &sampled, config.smoothing_k.min(n))?;
    Ok(PreparedMesh { mesh, graph, sampled, neighborhoods })
}

/// One Dijkstra run per gate.
pub fn gate_table<T: Real>(prep: &PreparedMesh<T>, gates: &[Gate]) -> Result<GateDistanceTable<T>, PipelineError> {
    validate_gates(&prep.mesh, gates)?;
    Ok(GateDistanceTable::compute(&prep.graph, gates)?)
}

fn extra_columns<T: Real>(params: &TechnologicalParameters, config: &PipelineConfig) -> Vec<T> {
    if config.append_parameters {
        params.as_row().iter().map(|&v| T::of(v)).collect()
    } else {
        Vec::new()
    }
}

/// Feature matrix at the sampled vertices.
pub fn sampled_features<T: Real>(
    prep: &PreparedMesh<T>,
    gates: &[Gate],
    table: &GateDistanceTable<T>,
    params: &TechnologicalParameters,
    config: &PipelineConfig,
) -> Result<Vec<T>, PipelineError> {
    let rows = extract_features(&prep.mesh, gates, table, &prep.sampled)?;
    Ok(feature_matrix(&rows, &extra_columns(params, config)))
}

/// Dense per-vertex fill time: predict at the sampled vertices, then smooth.
pub fn predict_fill_time<T: Real>(
    prep: &PreparedMesh<T>,
    gates: &[Gate],
    table: &GateDistanceTable<T>,
    params: &TechnologicalParameters,
    model: &GbmModel<T>,
    config: &PipelineConfig,
) -> Result<Vec<T>, PipelineError> {
    let x = sampled_features(prep, gates, table, params, config)?;
    let preds = model.predict_matrix(&x)?;
    Ok(prep.neighborhoods.apply(&preds)?)
}

/// A fill-time field projected to the network's input raster.
#[derive(Debug, Clone)]
pub struct Projected<T> {
    pub raster: RasterMap<T>,
    pub correspondence: Correspondence,
}

pub fn project_field<T: Real>(mesh: &Mesh<T>, field: &[T]) -> Result<Projected<T>, PipelineError> {
    let plane = fit_plane(mesh.vertices())?;
    let (raster, correspondence) = project(mesh, field, &plane)?;
    Ok(Projected { raster, correspondence })
}

/// The 12x24 training target: the deflection field rasterised in the same
/// frame as the fill-time raster, then averaged down.
pub fn deflection_target<T: Real>(mesh: &Mesh<T>, deflection: &[T]) -> Result<Map2<T>, PipelineError> {
    let plane = fit_plane(mesh.vertices())?;
    let (raster, _) = project(mesh, deflection, &plane)?;
    Ok(downsample_masked(&raster.values, &raster.mask, NET_OUTPUT_HEIGHT, NET_OUTPUT_WIDTH))
}

/// Network input tensor in the network's scalar type.
pub fn input_tensor<T: Real, N: Real>(raster: &RasterMap<T>) -> Tensor<N> {
    let mut data = Vec::with_capacity(raster.values.data().len() * 2);
    for (&v, &m) in raster.values.data().iter().zip(&raster.mask) {
        data.push(N::of(v.to_f64_lossless()));
        data.push(if m != 0 { N::one() } else { N::zero() });
    }
    Tensor::from_vec([raster.height(), raster.width(), 2], data).expect("raster dimensions")
}

/// Mirror-averaged network output, upscaled and read back at every vertex.
pub fn predict_deflection_field<T: Real, N: Real>(
    projected: &Projected<T>,
    net: &Network<N>,
) -> Result<Vec<T>, PipelineError> {
    let out = cnn::predict_tensor(net, &input_tensor::<T, N>(&projected.raster))?;
    let out = out.map(|v| T::of(v.to_f64_lossless()));
    let full = upscale_bilinear(&out)?;
    Ok(reproject(&full, &projected.correspondence)?)
}

/// Wall-clock seconds per stage. `total` is measured around all three.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub preprocessing: f64,
    pub fill_time: f64,
    pub deflection: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub fill_time: Vec<T>,
    pub deflection: Option<Vec<T>>,
    pub timings: StageTimings,
}

/// Trained models; either may be absent.
#[derive(Debug, Clone, Default)]
pub struct Models {
    pub fill_time: Option<GbmModel<f64>>,
    pub deflection: Option<Network<f32>>,
}

pub const FILL_TIME_MODEL_FILE: &str = "filltime.json";
pub const DEFLECTION_STEM: &str = "deflection";

impl Models {
    /// Reads whatever models exist in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, PipelineError> {
        let fill_path = dir.join(FILL_TIME_MODEL_FILE);
        let fill_time = if fill_path.exists() {
            let text = std::fs::read_to_string(&fill_path).map_err(|e| PipelineError::ModelFile {
                path: fill_path.display().to_string(),
                message: e.to_string(),
            })?;
            Some(GbmModel::from_json(&text)?)
        } else {
            None
        };
        let deflection = if dir.join(format!("{DEFLECTION_STEM}.json")).exists() {
            Some(cnn::load_weights_files(dir, DEFLECTION_STEM)?)
        } else {
            None
        };
        Ok(Self { fill_time, deflection })
    }

    /// Short content fingerprints used as model version identifiers.
    pub fn versions(&self) -> ModelVersions {
        let fill_time = self.fill_time.as_ref().map(|m| fingerprint(m.to_json().as_bytes()));
        let deflection = self.deflection.as_ref().map(|n| {
            let (_, blob) = cnn::save_weights(n);
            fingerprint(&blob)
        });
        ModelVersions { fill_time, deflection }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelVersions {
    pub fill_time: Option<String>,
    pub deflection: Option<String>,
}

// FNV-1a, printed as hex
fn fingerprint(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Runs the chain on a prepared mesh with a precomputed gate table.
pub fn run_prepared(
    prep: &PreparedMesh<f64>,
    gates: &[Gate],
    table: &GateDistanceTable<f64>,
    params: &TechnologicalParameters,
    models: &Models,
    config: &PipelineConfig,
    want_deflection: bool,
) -> Result<(Vec<f64>, Option<Vec<f64>>, f64, f64), PipelineError> {
    let gbm = models.fill_time.as_ref().ok_or(PipelineError::MissingModel("fill-time"))?;
    let net = if want_deflection {
        Some(models.deflection.as_ref().ok_or(PipelineError::MissingModel("deflection"))?)
    } else {
        None
    };
    let t0 = Instant::now();
    let fill = predict_fill_time(prep, gates, table, params, gbm, config)?;
    let fill_secs = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let deflection = match net {
        Some(net) => Some(predict_deflection_field(&project_field(&prep.mesh, &fill)?, net)?),
        None => None,
    };
    Ok((fill, deflection, fill_secs, t1.elapsed().as_secs_f64()))
}

/// Full prediction from a bare mesh, timing the three stages.
pub fn run(
    mesh: Mesh<f64>,
    gates: &[Gate],
    params: &TechnologicalParameters,
    models: &Models,
    config: &PipelineConfig,
    want_deflection: bool,
) -> Result<Prediction<f64>, PipelineError> {
    let start = Instant::now();
    let prep = prepare(mesh, config, config.seed)?;
    let table = gate_table(&prep, gates)?;
    let preprocessing = start.elapsed().as_secs_f64();
    let (fill_time, deflection, f, d) = run_prepared(&prep, gates, &table, params, models, config, want_deflection)?;
    let total = start.elapsed().as_secs_f64();
    Ok(Prediction {
        fill_time,
        deflection,
        timings: StageTimings { preprocessing, fill_time: f, deflection: d, total },
    })
}

/// A sample ready for training: prepared mesh, gate table and references.
pub struct TrainingItem<'a> {
    pub sample: &'a SimulationSample<f64>,
    pub prep: PreparedMesh<f64>,
    pub table: GateDistanceTable<f64>,
}

/// Prepares a sample, seeding its subsample from `(config.seed, index)`.
pub fn training_item<'a>(
    sample: &'a SimulationSample<f64>,
    index: usize,
    config: &PipelineConfig,
) -> Result<TrainingItem<'a>, PipelineError> {
    let prep = prepare(sample.mesh.clone(), config, derive_seed(config.seed, index as u64))?;
    let table = gate_table(&prep, &sample.gates)?;
    Ok(TrainingItem { sample, prep, table })
}

fn truth(sample: &SimulationSample<f64>) -> Result<(&[f64], &[f64]), PipelineError> {
    match (&sample.fill_time, &sample.deflection) {
        (Some(f), Some(d)) => Ok((f, d)),
        _ => Err(PipelineError::MissingTruth(sample.name.clone())),
    }
}

/// Fits the fill-time regressor on the sampled vertices of every item.
pub fn train_fill_time(items: &[&TrainingItem], config: &PipelineConfig) -> Result<GbmModel<f64>, PipelineError> {
    if items.is_empty() {
        return Err(PipelineError::NoSamples);
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut width = 0;
    for it in items {
        let (fill, _) = truth(it.sample)?;
        let rows = sampled_features(&it.prep, &it.sample.gates, &it.table, &it.sample.parameters, config)?;
        width = rows.len() / it.prep.sampled.len();
        x.extend(rows);
        y.extend(it.prep.sampled.iter().map(|&v| fill[v]));
    }
    Ok(gbm::fit(&x, width, &y, &config.gbm)?)
}

/// Network rows for one sample: its predicted and reference fill-time
/// rasters sharing the reference deflection target.
pub fn deflection_training_sample(
    item: &TrainingItem,
    predicted_fill: &[f64],
) -> Result<TrainingSample<f32>, PipelineError> {
    let (fill, deflection) = truth(item.sample)?;
    let mesh = &item.prep.mesh;
    let pred = project_field(mesh, predicted_fill)?;
    let gt = project_field(mesh, fill)?;
    let target = deflection_target(mesh, deflection)?.map(|v| v as f32);
    Ok(TrainingSample { inputs: vec![input_tensor(&pred.raster), input_tensor(&gt.raster)], target })
}

/// Trains the deflection network on rasters of the fill-time model's
/// in-sample predictions and of the reference fields.
pub fn train_deflection(
    items: &[&TrainingItem],
    gbm: &GbmModel<f64>,
    config: &PipelineConfig,
) -> Result<(Network<f32>, cnn::TrainReport), PipelineError> {
    if items.is_empty() {
        return Err(PipelineError::NoSamples);
    }
    let mut rows = Vec::with_capacity(items.len());
    for it in items {
        let pred = predict_fill_time(&it.prep, &it.sample.gates, &it.table, &it.sample.parameters, gbm, config)?;
        rows.push(deflection_training_sample(it, &pred)?);
    }
    let mut net = cnn::build_network::<f32>(config.cnn.seed);
    let report = cnn::train(&mut net, &rows, &config.cnn)?;
    Ok((net, report))
}
