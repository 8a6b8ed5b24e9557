use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::{mse_loss, Network};
use super::{raster_tensor, CnnError, Tensor};
use crate::projection::{Flip, Map2, RasterMap};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Expand every input into its four mirror images.
    pub augment: bool,
    /// Start from a constant prediction equal to the mean training target.
    pub center_output: bool,
    /// Dataset maxima used by the scaling layers; computed when absent.
    pub fill_scale: Option<f64>,
    pub deflection_scale: Option<f64>,
    /// When set, the row set is re-evaluated before training and after
    /// every epoch, and training stops once that loss is at most this
    /// fraction of the initial one.
    pub target_ratio: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 8,
            epochs: 10,
            seed: 0,
            augment: true,
            center_output: true,
            fill_scale: None,
            deflection_scale: None,
            target_ratio: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), CnnError> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.batch_size >= 1;
        if ok {
            Ok(())
        } else {
            Err(CnnError::Config("invalid optimizer settings".into()))
        }
    }
}

/// One sample: the fill-time rasters it contributes (typically predicted
/// and ground truth) and the shared 12x24 target map.
#[derive(Debug, Clone)]
pub struct TrainingSample<T> {
    pub inputs: Vec<Tensor<T>>,
    pub target: Map2<T>,
}

impl<T: Real> TrainingSample<T> {
    pub fn from_rasters(rasters: &[&RasterMap<T>], target: Map2<T>) -> Self {
        Self { inputs: rasters.iter().map(|r| raster_tensor(r)).collect(), target }
    }
}

/// Row `(sample, input variant, flip)` of the expanded training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowRef {
    pub sample: usize,
    pub variant: usize,
    pub flip: Flip,
}

pub fn expand_rows<T>(data: &[TrainingSample<T>], augment: bool) -> Vec<RowRef> {
    let flips: &[Flip] = if augment { &Flip::ALL } else { &[Flip::Identity] };
    let mut rows = Vec::new();
    for (s, sample) in data.iter().enumerate() {
        for v in 0..sample.inputs.len() {
            for &flip in flips {
                rows.push(RowRef { sample: s, variant: v, flip });
            }
        }
    }
    rows
}

fn row_tensors<T: Real>(data: &[TrainingSample<T>], r: RowRef) -> (Tensor<T>, Tensor<T>) {
    let s = &data[r.sample];
    let x = s.inputs[r.variant].flipped(r.flip);
    let y = Tensor::from_map(&r.flip.apply_map(&s.target));
    (x, y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub rows_per_epoch: usize,
    /// Mean per-row loss over each epoch, measured before each batch update.
    pub epoch_losses: Vec<f64>,
    /// Loss of the whole row set before the first update; only with
    /// `target_ratio`.
    pub initial_loss: Option<f64>,
    /// Loss of the whole row set after each epoch; only with `target_ratio`.
    pub eval_losses: Vec<f64>,
}

impl TrainReport {
    /// `epoch,loss` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss\n");
        for (i, l) in self.epoch_losses.iter().enumerate() {
            s.push_str(&format!("{},{}\n", i + 1, l));
        }
        s
    }
}

struct Adam<T> {
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Real> Adam<T> {
    fn new(n: usize) -> Self {
        Self { m: vec![T::zero(); n], v: vec![T::zero(); n], t: 0 }
    }

    fn step(&mut self, params: &mut [T], grads: &[T], cfg: &TrainConfig) {
        self.t += 1;
        let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        let lr = T::of(cfg.learning_rate);
        let eps = T::of(cfg.epsilon);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (T::one() - b1) * g;
            self.v[i] = b2 * self.v[i] + (T::one() - b2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + eps);
        }
    }
}

fn dataset_scales<T: Real>(data: &[TrainingSample<T>]) -> (f64, f64) {
    let mut fill = 0.0f64;
    let mut defl = 0.0f64;
    for s in data {
        for x in &s.inputs {
            let c = x.channels();
            for px in x.data().chunks_exact(c) {
                fill = fill.max(px[0].to_f64_lossless().abs());
            }
        }
        for &v in s.target.data() {
            defl = defl.max(v.to_f64_lossless().abs());
        }
    }
    let guard = |v: f64| if v > 0.0 && v.is_finite() { v } else { 1.0 };
    (guard(fill), guard(defl))
}

/// Mini-batch Adam on the mirror-expanded row set. Deterministic for a
/// given seed.
pub fn train<T: Real>(
    net: &mut Network<T>,
    data: &[TrainingSample<T>],
    cfg: &TrainConfig,
) -> Result<TrainReport, CnnError> {
    cfg.validate()?;
    if data.is_empty() || data.iter().all(|s| s.inputs.is_empty()) {
        return Err(CnnError::EmptyDataset);
    }
    for s in data {
        let [oh, ow, _] = net.output_shape();
        if (s.target.height(), s.target.width()) != (oh, ow) {
            return Err(CnnError::Shape {
                layer: "target".into(),
                expected: net.output_shape(),
                got: [s.target.height(), s.target.width(), 1],
            });
        }
        for x in &s.inputs {
            if x.shape() != net.input_shape() {
                return Err(CnnError::Shape { layer: "inputs_img".into(), expected: net.input_shape(), got: x.shape() });
            }
        }
    }
    let (fill, defl) = dataset_scales(data);
    net.set_scales(T::of(cfg.fill_scale.unwrap_or(fill)), T::of(cfg.deflection_scale.unwrap_or(defl)))?;
    if cfg.center_output {
        center_output(net, data);
    }
    let mut rows = expand_rows(data, cfg.augment);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(net.param_count());
    let mut grads = vec![T::zero(); net.param_count()];
    let mut report =
        TrainReport { rows_per_epoch: rows.len(), epoch_losses: Vec::new(), initial_loss: None, eval_losses: Vec::new() };
    if cfg.target_ratio.is_some() {
        report.initial_loss = Some(evaluate(net, data, cfg.augment)?);
    }
    for epoch in 0..cfg.epochs {
        rows.shuffle(&mut rng);
        let mut total = 0.0f64;
        for batch in rows.chunks(cfg.batch_size) {
            grads.fill(T::zero());
            for &r in batch {
                let (x, y) = row_tensors(data, r);
                let trace = net.forward_trace(&x)?;
                let (loss, d) = mse_loss(trace.output(), &y)?;
                let loss = loss.to_f64_lossless();
                if !loss.is_finite() {
                    return Err(CnnError::NonFiniteLoss { epoch: epoch + 1 });
                }
                total += loss;
                net.backward(&x, &trace, d, &mut grads, false)?;
            }
            let inv = T::one() / T::of(batch.len() as f64);
            for g in &mut grads {
                *g *= inv;
            }
            adam.step(net.params_mut(), &grads, cfg);
        }
        let mean = total / rows.len() as f64;
        report.epoch_losses.push(mean);
        if let (Some(ratio), Some(initial)) = (cfg.target_ratio, report.initial_loss) {
            let now = evaluate(net, data, cfg.augment)?;
            report.eval_losses.push(now);
            if now <= ratio * initial {
                break;
            }
        }
    }
    Ok(report)
}

// zero the final convolution so the network starts at the mean target
fn center_output<T: Real>(net: &mut Network<T>, data: &[TrainingSample<T>]) {
    let last = net
        .layers()
        .iter()
        .rev()
        .find(|(_, s)| matches!(s, super::LayerSpec::Conv { .. } | super::LayerSpec::ConvTranspose { .. }))
        .map(|(n, _)| n.clone());
    let Some((offset, nw, nb)) = last.and_then(|n| net.layer_params(&n)) else { return };
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for s in data {
        let weight = s.inputs.len();
        for &v in s.target.data() {
            sum += v.to_f64_lossless() * weight as f64;
        }
        count += s.target.data().len() * weight;
    }
    let mean = if count > 0 { sum / count as f64 } else { 0.0 };
    let scale = net.deflection_scale().to_f64_lossless();
    let p = net.params_mut();
    p[offset..offset + nw].fill(T::zero());
    p[offset + nw..offset + nw + nb].fill(T::of(mean / scale));
}

/// Mean per-row loss over the (optionally mirror-expanded) dataset.
pub fn evaluate<T: Real>(net: &Network<T>, data: &[TrainingSample<T>], augment: bool) -> Result<f64, CnnError> {
    let rows = expand_rows(data, augment);
    if rows.is_empty() {
        return Err(CnnError::EmptyDataset);
    }
    let mut total = 0.0;
    for r in &rows {
        let (x, y) = row_tensors(data, *r);
        let (loss, _) = mse_loss(&net.forward(&x)?, &y)?;
        total += loss.to_f64_lossless();
    }
    Ok(total / rows.len() as f64)
}

/// Averages the network's predictions over the four mirror images of the
/// raster, each mapped back to the original orientation.
pub fn predict_deflection<T: Real>(net: &Network<T>, raster: &RasterMap<T>) -> Result<Map2<T>, CnnError> {
    predict_tensor(net, &raster_tensor(raster))
}

pub fn predict_tensor<T: Real>(net: &Network<T>, x: &Tensor<T>) -> Result<Map2<T>, CnnError> {
    let [oh, ow, _] = net.output_shape();
    let mut acc = vec![T::zero(); oh * ow];
    for flip in Flip::ALL {
        let out = net.forward(&x.flipped(flip))?.channel(0);
        let back = flip.apply_map(&out);
        for (a, &v) in acc.iter_mut().zip(back.data()) {
            *a += v;
        }
    }
    let quarter = T::of(0.25);
    Ok(Map2::from_vec(oh, ow, acc.into_iter().map(|v| v * quarter).collect()))
}
