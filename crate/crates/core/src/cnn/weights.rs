use std::path::Path;

use serde::{Deserialize, Serialize};

use super::net::{deflection_architecture, LayerSpec, Network, INPUT_SHAPE, TOTAL_PARAMETERS};
use super::CnnError;
use crate::scalar::Real;

pub const WEIGHTS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestLayer {
    pub name: String,
    #[serde(flatten)]
    pub spec: LayerSpec,
    /// Byte offset of the layer's weights in the blob, then its biases.
    pub offset: usize,
    pub weights: usize,
    pub biases: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsManifest {
    pub format_version: u32,
    pub dtype: String,
    pub input_shape: [usize; 3],
    pub total_parameters: usize,
    pub fill_scale: f64,
    pub deflection_scale: f64,
    pub layers: Vec<ManifestLayer>,
}

/// Manifest document and little-endian `f32` blob.
pub fn save_weights<T: Real>(net: &Network<T>) -> (WeightsManifest, Vec<u8>) {
    let layers = net
        .layers()
        .into_iter()
        .map(|(name, spec)| {
            let (offset, weights, biases) = net.layer_params(&name).unwrap_or((0, 0, 0));
            ManifestLayer { name, spec, offset: offset * 4, weights, biases }
        })
        .collect();
    let manifest = WeightsManifest {
        format_version: WEIGHTS_FORMAT_VERSION,
        dtype: "f32le".into(),
        input_shape: net.input_shape(),
        total_parameters: net.param_count(),
        fill_scale: net.fill_scale().to_f64_lossless(),
        deflection_scale: net.deflection_scale().to_f64_lossless(),
        layers,
    };
    let mut blob = Vec::with_capacity(net.param_count() * 4);
    for &p in net.params() {
        blob.extend_from_slice(&(p.to_f64_lossless() as f32).to_le_bytes());
    }
    (manifest, blob)
}

/// Rebuilds any network described by a manifest.
pub fn load_any_weights<T: Real>(manifest: &WeightsManifest, blob: &[u8]) -> Result<Network<T>, CnnError> {
    if manifest.format_version != WEIGHTS_FORMAT_VERSION {
        return Err(CnnError::Manifest(format!("unsupported format version {}", manifest.format_version)));
    }
    if manifest.dtype != "f32le" {
        return Err(CnnError::Manifest(format!("unsupported dtype {}", manifest.dtype)));
    }
    let layers = manifest.layers.iter().map(|l| (l.name.clone(), l.spec.clone())).collect();
    let mut net = Network::<T>::new(manifest.input_shape, layers)?;
    if net.param_count() != manifest.total_parameters {
        return Err(CnnError::ParameterCount { expected: net.param_count(), actual: manifest.total_parameters });
    }
    for l in &manifest.layers {
        let (offset, w, b) = net.layer_params(&l.name).unwrap_or((0, 0, 0));
        if (offset * 4, w, b) != (l.offset, l.weights, l.biases) {
            return Err(CnnError::Manifest(format!("layer {} offsets disagree with its spec", l.name)));
        }
    }
    let expected = net.param_count() * 4;
    if blob.len() != expected {
        return Err(CnnError::BlobSize { expected, actual: blob.len() });
    }
    for (p, chunk) in net.params_mut().iter_mut().zip(blob.chunks_exact(4)) {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        *p = T::of(v as f64);
    }
    net.set_scales(T::of(manifest.fill_scale), T::of(manifest.deflection_scale))?;
    Ok(net)
}

/// Loads the deflection network, rejecting anything but the fixed
/// architecture with its 284,363 parameters.
pub fn load_weights<T: Real>(manifest: &WeightsManifest, blob: &[u8]) -> Result<Network<T>, CnnError> {
    if manifest.total_parameters != TOTAL_PARAMETERS {
        return Err(CnnError::ParameterCount { expected: TOTAL_PARAMETERS, actual: manifest.total_parameters });
    }
    let expected: Vec<(String, LayerSpec)> = deflection_architecture();
    let got: Vec<(String, LayerSpec)> = manifest.layers.iter().map(|l| (l.name.clone(), l.spec.clone())).collect();
    if got != expected || manifest.input_shape != INPUT_SHAPE {
        return Err(CnnError::Manifest("layer list differs from the deflection architecture".into()));
    }
    load_any_weights(manifest, blob)
}

/// Writes `<stem>.json` and `<stem>.bin` into `dir`.
pub fn save_weights_files<T: Real>(net: &Network<T>, dir: &Path, stem: &str) -> Result<(), CnnError> {
    std::fs::create_dir_all(dir)?;
    let (manifest, blob) = save_weights(net);
    std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_vec_pretty(&manifest)?)?;
    std::fs::write(dir.join(format!("{stem}.bin")), blob)?;
    Ok(())
}

pub fn load_weights_files<T: Real>(dir: &Path, stem: &str) -> Result<Network<T>, CnnError> {
    let manifest: WeightsManifest = serde_json::from_slice(&std::fs::read(dir.join(format!("{stem}.json")))?)?;
    let blob = std::fs::read(dir.join(format!("{stem}.bin")))?;
    load_weights(&manifest, &blob)
}
