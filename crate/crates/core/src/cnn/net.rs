use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::conv::{self, ConvSpec};
use super::{CnnError, Tensor};
use crate::scalar::Real;

pub const INPUT_SHAPE: [usize; 3] = [384, 768, 2];
pub const OUTPUT_SHAPE: [usize; 3] = [12, 24, 1];
pub const TOTAL_PARAMETERS: usize = 284_363;

/// One node of a network description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Divides channel 0 by the network's fill-time scale.
    InputScale,
    Conv { kernel: usize, stride: usize, filters: usize, relu: bool },
    ConvTranspose { kernel: usize, stride: usize, filters: usize, relu: bool },
    /// Appends the channels of the named earlier layer.
    Concat { skip: String },
    /// Multiplies by the network's deflection scale.
    OutputScale,
}

#[derive(Debug, Clone)]
enum Op {
    InputScale,
    Conv { spec: ConvSpec, relu: bool, offset: usize },
    Concat { skip: usize },
    OutputScale,
}

#[derive(Debug, Clone)]
struct Node {
    name: String,
    spec: LayerSpec,
    op: Op,
    in_shape: [usize; 3],
    out_shape: [usize; 3],
}

/// One row of [`Network::summary`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSummary {
    pub name: String,
    pub class: String,
    pub output_shape: [usize; 3],
    pub params: usize,
    pub inputs: Vec<String>,
}

/// Feed-forward network with optional concatenation skips. Parameters of
/// all convolutions live in one flat vector, weight block then bias block
/// per layer.
#[derive(Debug, Clone)]
pub struct Network<T> {
    input_shape: [usize; 3],
    nodes: Vec<Node>,
    params: Vec<T>,
    fill_scale: T,
    deflection_scale: T,
}

/// Activations recorded by [`Network::forward_trace`].
#[derive(Debug, Clone)]
pub struct Trace<T> {
    pub outputs: Vec<Tensor<T>>,
}

impl<T: Real> Trace<T> {
    pub fn output(&self) -> &Tensor<T> {
        self.outputs.last().expect("network has layers")
    }
}

/// The U-Net-style layer list: layer names and their specs in order.
pub fn deflection_architecture() -> Vec<(String, LayerSpec)> {
    let conv = |kernel, stride, filters| LayerSpec::Conv { kernel, stride, filters, relu: true };
    let mut out = vec![("lambda".to_string(), LayerSpec::InputScale)];
    let encoder = [
        (5, 1, 8),
        (5, 2, 8),
        (5, 1, 16),
        (5, 2, 16),
        (3, 1, 32),
        (3, 2, 32),
        (3, 1, 64),
        (3, 2, 64),
        (3, 1, 64),
        (3, 2, 64),
        (3, 1, 64),
        (3, 2, 64),
    ];
    for (i, &(k, s, f)) in encoder.iter().enumerate() {
        let name = if i == 0 { "conv2d".to_string() } else { format!("conv2d_{i}") };
        out.push((name, conv(k, s, f)));
    }
    out.push((
        "conv2d_transpose".into(),
        LayerSpec::ConvTranspose { kernel: 3, stride: 2, filters: 32, relu: true },
    ));
    out.push(("concatenate".into(), LayerSpec::Concat { skip: "conv2d_9".into() }));
    out.push(("conv2d_12".into(), conv(3, 1, 32)));
    out.push(("conv2d_13".into(), conv(3, 1, 32)));
    out.push(("conv2d_14".into(), LayerSpec::Conv { kernel: 3, stride: 1, filters: 1, relu: false }));
    out.push(("conv2d_15".into(), LayerSpec::Conv { kernel: 3, stride: 1, filters: 1, relu: false }));
    out.push(("lambda_1".into(), LayerSpec::OutputScale));
    out
}

/// Full-size deflection network with fan-in scaled uniform weights.
pub fn build_network<T: Real>(seed: u64) -> Network<T> {
    let mut net = Network::new(INPUT_SHAPE, deflection_architecture()).expect("fixed architecture is valid");
    net.initialize(seed);
    net
}

impl<T: Real> Network<T> {
    /// Resolves shapes and parameter offsets. Parameters start at zero;
    /// scales start at one.
    pub fn new(input_shape: [usize; 3], layers: Vec<(String, LayerSpec)>) -> Result<Self, CnnError> {
        let mut nodes: Vec<Node> = Vec::with_capacity(layers.len());
        let mut offset = 0;
        let mut shape = input_shape;
        for (name, spec) in layers {
            if nodes.iter().any(|n| n.name == name) || name == "inputs_img" {
                return Err(CnnError::Architecture(format!("duplicate layer name {name}")));
            }
            let [h, w, c] = shape;
            let (op, out_shape) = match &spec {
                LayerSpec::InputScale | LayerSpec::OutputScale => {
                    let op = if matches!(spec, LayerSpec::InputScale) { Op::InputScale } else { Op::OutputScale };
                    (op, shape)
                }
                &LayerSpec::Conv { kernel, stride, filters, relu }
                | &LayerSpec::ConvTranspose { kernel, stride, filters, relu } => {
                    if kernel == 0 || stride == 0 || filters == 0 {
                        return Err(CnnError::Architecture(format!("{name}: zero-sized convolution")));
                    }
                    let cs = ConvSpec {
                        kernel,
                        stride,
                        in_channels: c,
                        out_channels: filters,
                        transpose: matches!(spec, LayerSpec::ConvTranspose { .. }),
                    };
                    let (oh, ow) = cs.output_hw(h, w);
                    let op = Op::Conv { spec: cs, relu, offset };
                    offset += cs.param_count();
                    (op, [oh, ow, filters])
                }
                LayerSpec::Concat { skip } => {
                    let idx = nodes
                        .iter()
                        .position(|n| &n.name == skip)
                        .ok_or_else(|| CnnError::Architecture(format!("{name}: unknown skip {skip}")))?;
                    let s = nodes[idx].out_shape;
                    if s[0] != h || s[1] != w {
                        return Err(CnnError::Architecture(format!(
                            "{name}: cannot join {:?} with {skip} {:?}",
                            shape, s
                        )));
                    }
                    (Op::Concat { skip: idx }, [h, w, c + s[2]])
                }
            };
            nodes.push(Node { name, spec, op, in_shape: shape, out_shape });
            shape = out_shape;
        }
        if nodes.is_empty() {
            return Err(CnnError::Architecture("no layers".into()));
        }
        Ok(Self {
            input_shape,
            nodes,
            params: vec![T::zero(); offset],
            fill_scale: T::one(),
            deflection_scale: T::one(),
        })
    }

    /// Uniform weights in `±sqrt(6 / fan_in)`, zero biases.
    pub fn initialize(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for node in &self.nodes {
            if let Op::Conv { spec, offset, .. } = node.op {
                let limit = (6.0 / spec.fan_in() as f64).sqrt();
                let (w, b) = self.params[offset..offset + spec.param_count()].split_at_mut(spec.weight_count());
                for v in w {
                    *v = T::of(rng.gen_range(-limit..limit));
                }
                b.fill(T::zero());
            }
        }
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn output_shape(&self) -> [usize; 3] {
        self.nodes.last().map(|n| n.out_shape).unwrap_or(self.input_shape)
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn fill_scale(&self) -> T {
        self.fill_scale
    }

    pub fn deflection_scale(&self) -> T {
        self.deflection_scale
    }

    pub fn set_scales(&mut self, fill: T, deflection: T) -> Result<(), CnnError> {
        if !(fill > T::zero() && fill.is_finite() && deflection > T::zero() && deflection.is_finite()) {
            return Err(CnnError::Config("scales must be positive and finite".into()));
        }
        self.fill_scale = fill;
        self.deflection_scale = deflection;
        Ok(())
    }

    pub fn layers(&self) -> Vec<(String, LayerSpec)> {
        self.nodes.iter().map(|n| (n.name.clone(), n.spec.clone())).collect()
    }

    /// Parameter range `(offset, weights, biases)` of a named convolution.
    pub fn layer_params(&self, name: &str) -> Option<(usize, usize, usize)> {
        self.nodes.iter().find(|n| n.name == name).and_then(|n| match n.op {
            Op::Conv { spec, offset, .. } => Some((offset, spec.weight_count(), spec.out_channels)),
            _ => None,
        })
    }

    /// Keras-style layer table, starting with the input row.
    pub fn summary(&self) -> Vec<LayerSummary> {
        let mut rows = vec![LayerSummary {
            name: "inputs_img".into(),
            class: "InputLayer".into(),
            output_shape: self.input_shape,
            params: 0,
            inputs: vec![],
        }];
        let mut prev = "inputs_img".to_string();
        for n in &self.nodes {
            let (class, params, inputs) = match &n.op {
                Op::InputScale | Op::OutputScale => ("Lambda", 0, vec![prev.clone()]),
                Op::Conv { spec, .. } => (
                    if spec.transpose { "Conv2DTranspose" } else { "Conv2D" },
                    spec.param_count(),
                    vec![prev.clone()],
                ),
                Op::Concat { skip } => ("Concatenate", 0, vec![prev.clone(), self.nodes[*skip].name.clone()]),
            };
            rows.push(LayerSummary {
                name: n.name.clone(),
                class: class.into(),
                output_shape: n.out_shape,
                params,
                inputs,
            });
            prev = n.name.clone();
        }
        rows
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<(), CnnError> {
        if x.shape() != self.input_shape {
            return Err(CnnError::Shape { layer: "inputs_img".into(), expected: self.input_shape, got: x.shape() });
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>, CnnError> {
        let mut trace = self.forward_trace(x)?;
        Ok(trace.outputs.pop().expect("network has layers"))
    }

    /// Forward pass keeping every layer output.
    pub fn forward_trace(&self, x: &Tensor<T>) -> Result<Trace<T>, CnnError> {
        self.check_input(x)?;
        let mut outputs: Vec<Tensor<T>> = Vec::with_capacity(self.nodes.len());
        for (i, n) in self.nodes.iter().enumerate() {
            let input = if i == 0 { x } else { &outputs[i - 1] };
            let [h, w, c] = n.in_shape;
            let data = match &n.op {
                Op::InputScale => {
                    let mut d = input.data().to_vec();
                    for px in d.chunks_exact_mut(c) {
                        px[0] /= self.fill_scale;
                    }
                    d
                }
                Op::OutputScale => input.data().iter().map(|&v| v * self.deflection_scale).collect(),
                Op::Conv { spec, relu, offset } => {
                    let (wt, b) = self.params[*offset..*offset + spec.param_count()].split_at(spec.weight_count());
                    conv::forward(spec, *relu, wt, b, input.data(), h, w)
                }
                Op::Concat { skip } => {
                    let other = &outputs[*skip];
                    let oc = other.channels();
                    let mut d = Vec::with_capacity(h * w * (c + oc));
                    for (a, b) in input.data().chunks_exact(c).zip(other.data().chunks_exact(oc)) {
                        d.extend_from_slice(a);
                        d.extend_from_slice(b);
                    }
                    d
                }
            };
            outputs.push(Tensor::from_vec(n.out_shape, data)?);
        }
        Ok(Trace { outputs })
    }

    /// Back-propagates `d_out` (gradient at the network output) through a
    /// recorded trace, accumulating into `grads` (same layout as the
    /// parameters). Returns the gradient at the input if requested.
    pub fn backward(
        &self,
        x: &Tensor<T>,
        trace: &Trace<T>,
        d_out: Tensor<T>,
        grads: &mut [T],
        want_input_grad: bool,
    ) -> Result<Option<Tensor<T>>, CnnError> {
        self.check_input(x)?;
        if grads.len() != self.params.len() {
            return Err(CnnError::Config(format!(
                "gradient buffer has {} entries for {} parameters",
                grads.len(),
                self.params.len()
            )));
        }
        if d_out.shape() != self.output_shape() {
            return Err(CnnError::Shape { layer: "output".into(), expected: self.output_shape(), got: d_out.shape() });
        }
        let n = self.nodes.len();
        // pending[i]: gradient at the output of node i
        let mut pending: Vec<Option<Vec<T>>> = vec![None; n];
        pending[n - 1] = Some(d_out.into_vec());
        let mut d_input = None;
        for i in (0..n).rev() {
            let Some(mut dy) = pending[i].take() else { continue };
            let node = &self.nodes[i];
            let input = if i == 0 { x.data() } else { trace.outputs[i - 1].data() };
            let [h, w, c] = node.in_shape;
            let need = i > 0 || want_input_grad;
            let dx: Option<Vec<T>> = match &node.op {
                Op::InputScale => {
                    for px in dy.chunks_exact_mut(c) {
                        px[0] /= self.fill_scale;
                    }
                    Some(dy)
                }
                Op::OutputScale => {
                    for v in &mut dy {
                        *v *= self.deflection_scale;
                    }
                    Some(dy)
                }
                Op::Conv { spec, relu, offset } => {
                    let wc = spec.weight_count();
                    let wt = &self.params[*offset..*offset + wc];
                    let (dw, db) = grads[*offset..*offset + spec.param_count()].split_at_mut(wc);
                    conv::backward(spec, *relu, wt, input, h, w, trace.outputs[i].data(), &mut dy, dw, db, need)
                }
                Op::Concat { skip } => {
                    let oc = node.out_shape[2] - c;
                    let mut da = Vec::with_capacity(h * w * c);
                    let mut ds = Vec::with_capacity(h * w * oc);
                    for px in dy.chunks_exact(c + oc) {
                        da.extend_from_slice(&px[..c]);
                        ds.extend_from_slice(&px[c..]);
                    }
                    accumulate(&mut pending[*skip], ds);
                    Some(da)
                }
            };
            if let Some(dx) = dx {
                if i == 0 {
                    if want_input_grad {
                        d_input = Some(Tensor::from_vec(self.input_shape, dx)?);
                    }
                } else {
                    accumulate(&mut pending[i - 1], dx);
                }
            }
        }
        Ok(d_input)
    }
}

fn accumulate<T: Real>(slot: &mut Option<Vec<T>>, g: Vec<T>) {
    match slot {
        Some(acc) => {
            for (a, b) in acc.iter_mut().zip(g) {
                *a += b;
            }
        }
        None => *slot = Some(g),
    }
}

/// Mean squared error over all output cells and its gradient.
pub fn mse_loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>), CnnError> {
    if pred.shape() != target.shape() {
        return Err(CnnError::Shape { layer: "target".into(), expected: pred.shape(), got: target.shape() });
    }
    let n = T::of(pred.data().len() as f64);
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(pred.data().len());
    for (&p, &t) in pred.data().iter().zip(target.data()) {
        let e = p - t;
        loss += e * e;
        grad.push((e + e) / n);
    }
    Ok((loss / n, Tensor::from_vec(pred.shape(), grad)?))
}
