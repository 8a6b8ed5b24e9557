//! The deflection network: a small U-Net over 384x768 two-channel rasters
//! producing a 12x24 map, with exact gradients and Adam training.

mod conv;
mod net;
mod tensor;
mod train;
mod weights;

use thiserror::Error;

pub use conv::ConvSpec;
pub use net::{
    build_network, deflection_architecture, mse_loss, LayerSpec, LayerSummary, Network, Trace,
    INPUT_SHAPE, OUTPUT_SHAPE, TOTAL_PARAMETERS,
};
pub use tensor::{raster_tensor, Tensor};
pub use train::{
    evaluate, expand_rows, predict_deflection, predict_tensor, train, RowRef, TrainConfig,
    TrainReport, TrainingSample,
};
pub use weights::{
    load_any_weights, load_weights, load_weights_files, save_weights, save_weights_files,
    ManifestLayer, WeightsManifest, WEIGHTS_FORMAT_VERSION,
};

#[derive(Debug, Error)]
pub enum CnnError {
    #[error("{layer}: expected shape {expected:?}, got {got:?}")]
    Shape {
        layer: String,
        expected: [usize; 3],
        got: [usize; 3],
    },
    #[error("{len} values cannot fill shape {shape:?}")]
    Length { shape: [usize; 3], len: usize },
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty training set")]
    EmptyDataset,
    #[error("loss became non-finite in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("weights manifest: {0}")]
    Manifest(String),
    #[error("weight blob has {actual} bytes, expected {expected}")]
    BlobSize { expected: usize, actual: usize },
    #[error("parameter count {actual}, expected {expected}")]
    ParameterCount { expected: usize, actual: usize },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
