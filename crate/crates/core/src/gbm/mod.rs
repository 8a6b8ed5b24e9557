//! Squared-error gradient boosting over regression trees, and the
//! neighbourhood smoothing that turns sampled predictions into a dense
//! per-vertex field.

mod smooth;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

pub use smooth::{smooth_predictions, Neighborhoods};
pub use tree::{Node, RegressionTree};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum GbmError {
    #[error("training set is empty")]
    Empty,
    #[error("non-finite value at row {row}")]
    NonFinite { row: usize },
    #[error("feature matrix has {len} values, not a multiple of width {width}")]
    Shape { len: usize, width: usize },
    #[error("{targets} targets for {rows} rows")]
    TargetCount { rows: usize, targets: usize },
    #[error("row has {got} features, model expects {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("invalid config: {0}")]
    Config(&'static str),
    #[error("malformed model document: {0}")]
    Malformed(String),
    #[error("model schema version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("sample set is empty")]
    NoSamples,
    #[error("{preds} predictions for {samples} sampled vertices")]
    SampleMismatch { samples: usize, preds: usize },
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbmConfig {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub n_estimators: usize,
    pub min_samples_leaf: usize,
    /// Recorded for provenance; fitting involves no sampling.
    pub seed: u64,
}

impl Default for GbmConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.08,
            max_depth: 8,
            n_estimators: 200,
            min_samples_leaf: 1,
            seed: 0,
        }
    }
}

impl GbmConfig {
    pub fn validate(&self) -> Result<(), GbmError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(GbmError::Config("learning_rate must be > 0"));
        }
        if self.max_depth < 1 {
            return Err(GbmError::Config("max_depth must be >= 1"));
        }
        if self.n_estimators < 1 {
            return Err(GbmError::Config("n_estimators must be >= 1"));
        }
        if self.min_samples_leaf < 1 {
            return Err(GbmError::Config("min_samples_leaf must be >= 1"));
        }
        Ok(())
    }
}

/// Fitted ensemble: `base_score + learning_rate * sum(tree outputs)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel<T> {
    pub schema_version: u32,
    pub config: GbmConfig,
    pub n_features: usize,
    pub base_score: T,
    pub trees: Vec<RegressionTree<T>>,
}

// summed in value order so the result does not depend on row order
fn mean<T: Real>(v: &[T]) -> T {
    let mut v = v.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = T::of(v.len() as f64);
    let first = v.iter().copied().sum::<T>() / n;
    // one refinement pass; exact for constant input
    let corr = v.iter().map(|&y| y - first).sum::<T>() / n;
    first + corr
}

fn check_inputs<T: Real>(x: &[T], width: usize, y: &[T]) -> Result<usize, GbmError> {
    if width == 0 || !x.len().is_multiple_of(width) {
        return Err(GbmError::Shape { len: x.len(), width });
    }
    let rows = x.len() / width;
    if rows == 0 {
        return Err(GbmError::Empty);
    }
    if y.len() != rows {
        return Err(GbmError::TargetCount { rows, targets: y.len() });
    }
    for r in 0..rows {
        if !y[r].is_finite() || !x[r * width..(r + 1) * width].iter().all(|v| v.is_finite()) {
            return Err(GbmError::NonFinite { row: r });
        }
    }
    Ok(rows)
}

fn mse<T: Real>(pred: &[T], y: &[T]) -> T {
    let n = T::of(y.len() as f64);
    pred.iter()
        .zip(y)
        .map(|(&p, &t)| (p - t) * (p - t))
        .sum::<T>()
        / n
}

/// Fits the ensemble; `x` is row-major with `width` columns.
pub fn fit<T: Real>(x: &[T], width: usize, y: &[T], config: &GbmConfig) -> Result<GbmModel<T>, GbmError> {
    fit_with_history(x, width, y, config).map(|(m, _)| m)
}

/// Like [`fit`], also returning the training MSE before the first round and
/// after every round (`n_estimators + 1` entries).
pub fn fit_with_history<T: Real>(
    x: &[T],
    width: usize,
    y: &[T],
    config: &GbmConfig,
) -> Result<(GbmModel<T>, Vec<T>), GbmError> {
    config.validate()?;
    let rows = check_inputs(x, width, y)?;
    let (lo, hi) = y
        .iter()
        .fold((y[0], y[0]), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let base = if lo == hi { lo } else { mean(y) };
    let lr = T::of(config.learning_rate);
    let sorted = tree::presort(x, width, rows);
    let mut tree_sum = vec![T::zero(); rows];
    let mut pred = vec![base; rows];
    let mut residual: Vec<T> = y.iter().map(|&t| t - base).collect();
    let mut history = vec![mse(&pred, y)];
    let mut trees = Vec::with_capacity(config.n_estimators);
    for _ in 0..config.n_estimators {
        let tree = tree::TreeBuilder {
            x,
            width,
            residual: &residual,
            max_depth: config.max_depth,
            min_leaf: config.min_samples_leaf,
        }
        .build(sorted.clone());
        for r in 0..rows {
            tree_sum[r] += tree.predict(&x[r * width..(r + 1) * width]);
            pred[r] = base + lr * tree_sum[r];
            residual[r] = y[r] - pred[r];
        }
        history.push(mse(&pred, y));
        trees.push(tree);
    }
    Ok((
        GbmModel {
            schema_version: MODEL_SCHEMA_VERSION,
            config: config.clone(),
            n_features: width,
            base_score: base,
            trees,
        },
        history,
    ))
}

impl<T: Real> GbmModel<T> {
    pub fn predict(&self, row: &[T]) -> Result<T, GbmError> {
        if row.len() != self.n_features {
            return Err(GbmError::WidthMismatch {
                expected: self.n_features,
                got: row.len(),
            });
        }
        let sum: T = self.trees.iter().map(|t| t.predict(row)).sum();
        Ok(self.base_score + T::of(self.config.learning_rate) * sum)
    }

    /// Predicts every row of a row-major matrix.
    pub fn predict_matrix(&self, x: &[T]) -> Result<Vec<T>, GbmError> {
        if !x.len().is_multiple_of(self.n_features) {
            return Err(GbmError::Shape {
                len: x.len(),
                width: self.n_features,
            });
        }
        x.chunks(self.n_features).map(|r| self.predict(r)).collect()
    }

    pub fn node_count(&self) -> usize {
        self.trees.iter().map(|t| t.nodes().len()).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, GbmError> {
        #[derive(Deserialize)]
        struct Header {
            schema_version: u32,
        }
        let header: Header =
            serde_json::from_str(text).map_err(|e| GbmError::Malformed(e.to_string()))?;
        if header.schema_version != MODEL_SCHEMA_VERSION {
            return Err(GbmError::Version {
                found: header.schema_version,
                expected: MODEL_SCHEMA_VERSION,
            });
        }
        let model: Self =
            serde_json::from_str(text).map_err(|e| GbmError::Malformed(e.to_string()))?;
        model.config.validate()?;
        if !model.base_score.is_finite() {
            return Err(GbmError::Malformed("non-finite base_score".into()));
        }
        if let Some(i) = model
            .trees
            .iter()
            .position(|t| !t.is_well_formed(model.n_features))
        {
            return Err(GbmError::Malformed(format!("tree {i} is not a valid binary tree")));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_data() -> (Vec<f64>, Vec<f64>) {
        let x = vec![-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
        let y = x.iter().map(|&v| if v < 0.0 { 0.0 } else { 10.0 }).collect();
        (x, y)
    }

    #[test]
    fn constant_target() {
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.7).sin()).collect();
        let y = vec![0.1; 20];
        let m = fit(&x, 2, &y, &GbmConfig::default()).unwrap();
        assert_eq!(m.base_score, 0.1);
        for t in &m.trees {
            assert_eq!(t.nodes(), &[Node::Leaf { value: 0.0 }]);
        }
        assert_eq!(m.predict(&[3.0, -8.0]).unwrap(), 0.1);
    }

    #[test]
    fn one_round_step() {
        let (x, y) = step_data();
        let cfg = GbmConfig {
            n_estimators: 1,
            ..Default::default()
        };
        let m = fit(&x, 1, &y, &cfg).unwrap();
        assert_eq!(m.base_score, 5.0);
        match &m.trees[0].nodes()[0] {
            Node::Split { threshold, left, right, .. } => {
                assert_eq!(*threshold, -0.5);
                assert_eq!(m.trees[0].nodes()[*left], Node::Leaf { value: -5.0 });
                assert_eq!(m.trees[0].nodes()[*right], Node::Leaf { value: 5.0 });
            }
            n => panic!("expected split, got {n:?}"),
        }
        assert!((m.predict(&[-3.0]).unwrap() - 4.6).abs() < 1e-12);
        assert!((m.predict(&[2.0]).unwrap() - 5.4).abs() < 1e-12);
    }

    #[test]
    fn step_converges_geometrically() {
        let (x, y) = step_data();
        let m = fit(&x, 1, &y, &GbmConfig::default()).unwrap();
        // independent loop: residual shrinks by (1 - lr) per round
        let mut r = 5.0f64;
        for _ in 0..200 {
            r -= 0.08 * r;
        }
        assert!(r < 1e-6);
        assert!((m.predict(&[-1.0]).unwrap() - 0.0).abs() < 1e-6);
        assert!((m.predict(&[0.0]).unwrap() - 10.0).abs() < 1e-6);
    }

    #[test]
    fn input_errors() {
        let cfg = GbmConfig::default();
        assert!(matches!(fit::<f64>(&[], 8, &[], &cfg), Err(GbmError::Empty)));
        assert!(matches!(
            fit(&[1.0, f64::NAN], 1, &[0.0, 1.0], &cfg),
            Err(GbmError::NonFinite { row: 1 })
        ));
        assert!(matches!(
            fit(&[1.0, 2.0], 1, &[0.0], &cfg),
            Err(GbmError::TargetCount { .. })
        ));
        let bad = GbmConfig {
            learning_rate: 0.0,
            ..Default::default()
        };
        assert!(matches!(fit(&[1.0], 1, &[0.0], &bad), Err(GbmError::Config(_))));
        let m = fit(&[1.0, 2.0], 1, &[0.0, 1.0], &cfg).unwrap();
        assert!(matches!(
            m.predict(&[1.0, 2.0]),
            Err(GbmError::WidthMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn depth_is_bounded() {
        let x: Vec<f64> = (0..300).map(|i| ((i * 7919) % 300) as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| (v * 0.1).sin()).collect();
        let cfg = GbmConfig {
            max_depth: 3,
            n_estimators: 5,
            ..Default::default()
        };
        let m = fit(&x, 1, &y, &cfg).unwrap();
        assert!(m.trees.iter().all(|t| t.depth() <= 3));
        assert!(m.trees[0].depth() == 3);
    }

    #[test]
    fn min_samples_leaf_respected() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let mut y = vec![0.0; 10];
        y[9] = 100.0;
        let cfg = GbmConfig {
            min_samples_leaf: 3,
            n_estimators: 1,
            max_depth: 1,
            ..Default::default()
        };
        let m = fit(&x, 1, &y, &cfg).unwrap();
        match m.trees[0].nodes()[0] {
            Node::Split { threshold, .. } => assert_eq!(threshold, 6.5),
            _ => panic!(),
        }
    }

    #[test]
    fn serialisation_roundtrip_and_errors() {
        let m = fit(&[1.0], 1, &[2.5], &GbmConfig { n_estimators: 1, ..Default::default() }).unwrap();
        let back = GbmModel::<f64>::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        let text = m.to_json();
        assert!(matches!(
            GbmModel::<f64>::from_json(&text[..text.len() / 2]),
            Err(GbmError::Malformed(_))
        ));
        let v2 = text.replace("\"schema_version\":1", "\"schema_version\":2");
        assert!(matches!(
            GbmModel::<f64>::from_json(&v2),
            Err(GbmError::Version { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn rejects_dangling_child() {
        let (x, y) = step_data();
        let m = fit(&x, 1, &y, &GbmConfig { n_estimators: 1, ..Default::default() }).unwrap();
        let text = m.to_json().replace("\"right\":2", "\"right\":9");
        assert!(matches!(GbmModel::<f64>::from_json(&text), Err(GbmError::Malformed(_))));
    }
}
