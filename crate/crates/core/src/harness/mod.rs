//! Synthetic data, dataset files, metrics, cross-validation and stage
//! timing.

mod bench;
mod cv;
mod dataset;
mod metrics;
mod sample;
mod synth;

use thiserror::Error;

pub use bench::{benchmark, BenchmarkRecord, MachineDescriptor};
pub use cv::{crossvalidate, fold_assignment, CvOutcome, CvReport, FoldReport, PointRecord, SampleMetrics, Summary};
pub use dataset::{
    export_dataset, import_sample, load_dataset, read_fields_csv, write_fields_csv, DatasetEntry,
    DatasetManifest, DATASET_MANIFEST,
};
pub use metrics::{mae, mse, rmse};
pub use sample::{derive_seed, Provenance, SimulationSample};
pub use synth::{deflection_oracle, fill_time_oracle, synth_generate, synth_sample, SynthConfig};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("sample {index}: no valid geometry after all retries")]
    Degenerate { index: usize },
    #[error("{pred} predictions for {truth} reference values")]
    Length { pred: usize, truth: usize },
    #[error("metrics need at least one value")]
    Empty,
    #[error("{folds} folds need at least as many samples, got {samples}")]
    FoldCount { folds: usize, samples: usize },
    #[error("sample {0} has no reference fields")]
    MissingTruth(String),
    #[error("{path}:{line}: {message}")]
    Fields { path: String, line: usize, message: String },
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
    #[error(transparent)]
    Projection(#[from] crate::projection::ProjectionError),
    #[error(transparent)]
    Pipeline(#[from] crate::pipeline::PipelineError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
