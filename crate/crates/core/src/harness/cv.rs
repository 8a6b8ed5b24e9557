use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{mae, mse};
use super::sample::SimulationSample;
use super::HarnessError;
use crate::pipeline::{
    predict_deflection_field, predict_fill_time, project_field, train_deflection, train_fill_time, training_item,
    PipelineConfig, TrainingItem,
};

/// Shuffles `0..n` with `seed` and cuts it into `folds` contiguous test
/// blocks; the first `n % folds` blocks get one extra sample. Each block is
/// returned sorted.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>, HarnessError> {
    if folds < 2 || n < folds {
        return Err(HarnessError::FoldCount { folds, samples: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / folds, n % folds);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        let mut block = order[start..start + len].to_vec();
        block.sort_unstable();
        out.push(block);
        start += len;
    }
    Ok(out)
}

/// RMSE and MAE in both aggregations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Mean over samples of the per-sample metric.
    pub per_sample_rmse: f64,
    pub per_sample_mae: f64,
    /// Metric over every point of every sample merged into one array.
    pub pooled_rmse: f64,
    pub pooled_mae: f64,
    pub pooled_mse: f64,
    pub points: usize,
}

impl Summary {
    fn from_samples(parts: &[(&[f64], &[f64])]) -> Result<Self, HarnessError> {
        let mut s = Summary::default();
        let (mut sq, mut ab) = (0.0, 0.0);
        for (p, t) in parts {
            s.per_sample_rmse += mse(p, t)?.sqrt();
            s.per_sample_mae += mae(p, t)?;
            for (&a, &b) in p.iter().zip(t.iter()) {
                sq += (a - b) * (a - b);
                ab += (a - b).abs();
            }
            s.points += p.len();
        }
        let k = parts.len() as f64;
        s.per_sample_rmse /= k;
        s.per_sample_mae /= k;
        s.pooled_mse = sq / s.points as f64;
        s.pooled_rmse = s.pooled_mse.sqrt();
        s.pooled_mae = ab / s.points as f64;
        Ok(s)
    }

    fn mean(items: &[Summary]) -> Summary {
        let k = items.len() as f64;
        let avg = |f: fn(&Summary) -> f64| items.iter().map(f).sum::<f64>() / k;
        Summary {
            per_sample_rmse: avg(|s| s.per_sample_rmse),
            per_sample_mae: avg(|s| s.per_sample_mae),
            pooled_rmse: avg(|s| s.pooled_rmse),
            pooled_mae: avg(|s| s.pooled_mae),
            pooled_mse: avg(|s| s.pooled_mse),
            points: items.iter().map(|s| s.points).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub test_samples: Vec<String>,
    pub train_samples: usize,
    pub fill_time: Summary,
    pub deflection: Summary,
    /// Predicting the mean training deflection at every vertex.
    pub baseline_deflection: Summary,
    pub baseline_value: f64,
    pub cnn_epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub name: String,
    pub fold: usize,
    pub points: usize,
    pub fill_time_rmse: f64,
    pub fill_time_mae: f64,
    pub deflection_rmse: f64,
    pub deflection_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: usize,
    pub seed: u64,
    pub samples: usize,
    pub fill_time_range: f64,
    pub per_fold: Vec<FoldReport>,
    /// Fold-wise means of every metric.
    pub mean_fill_time: Summary,
    pub mean_deflection: Summary,
    pub mean_baseline_deflection: Summary,
    pub per_sample: Vec<SampleMetrics>,
}

/// Per-vertex predictions of one test sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRecord {
    pub name: String,
    pub fold: usize,
    pub fill_time_pred: Vec<f64>,
    pub fill_time_true: Vec<f64>,
    pub deflection_pred: Vec<f64>,
    pub deflection_true: Vec<f64>,
}

pub struct CvOutcome {
    pub report: CvReport,
    pub points: Vec<PointRecord>,
}

/// K-fold evaluation of the whole chain. Both models of a fold are trained
/// on the same training samples; test deflection is predicted from
/// predicted fill time.
pub fn crossvalidate(
    dataset: &[SimulationSample<f64>],
    folds: usize,
    config: &PipelineConfig,
    seed: u64,
) -> Result<CvOutcome, HarnessError> {
    let blocks = fold_assignment(dataset.len(), folds, seed)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in dataset {
        let (Some(f), Some(_)) = (&s.fill_time, &s.deflection) else {
            return Err(HarnessError::MissingTruth(s.name.clone()));
        };
        for &v in f {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let items: Vec<TrainingItem> = dataset
        .iter()
        .enumerate()
        .map(|(i, s)| training_item(s, i, config))
        .collect::<Result<_, _>>()?;
    let mut per_fold = Vec::with_capacity(folds);
    let mut per_sample = Vec::new();
    let mut points = Vec::new();
    for (fold, test) in blocks.iter().enumerate() {
        let train: Vec<&TrainingItem> = (0..dataset.len()).filter(|i| !test.contains(i)).map(|i| &items[i]).collect();
        let gbm = train_fill_time(&train, config)?;
        let (net, report) = train_deflection(&train, &gbm, config)?;
        let (mut sum, mut count) = (0.0, 0usize);
        for it in &train {
            let d = it.sample.deflection.as_ref().expect("checked above");
            sum += d.iter().sum::<f64>();
            count += d.len();
        }
        let baseline_value = sum / count as f64;
        let mut records = Vec::with_capacity(test.len());
        for &i in test {
            let it = &items[i];
            let s = it.sample;
            let fill = predict_fill_time(&it.prep, &s.gates, &it.table, &s.parameters, &gbm, config)?;
            let defl = predict_deflection_field(&project_field(&it.prep.mesh, &fill)?, &net)?;
            records.push(PointRecord {
                name: s.name.clone(),
                fold,
                fill_time_pred: fill,
                fill_time_true: s.fill_time.clone().expect("checked above"),
                deflection_pred: defl,
                deflection_true: s.deflection.clone().expect("checked above"),
            });
        }
        let baselines: Vec<Vec<f64>> = records.iter().map(|r| vec![baseline_value; r.deflection_true.len()]).collect();
        let fill_parts: Vec<(&[f64], &[f64])> =
            records.iter().map(|r| (&r.fill_time_pred[..], &r.fill_time_true[..])).collect();
        let defl_parts: Vec<(&[f64], &[f64])> =
            records.iter().map(|r| (&r.deflection_pred[..], &r.deflection_true[..])).collect();
        let base_parts: Vec<(&[f64], &[f64])> =
            records.iter().zip(&baselines).map(|(r, b)| (&b[..], &r.deflection_true[..])).collect();
        for r in &records {
            per_sample.push(SampleMetrics {
                name: r.name.clone(),
                fold,
                points: r.fill_time_true.len(),
                fill_time_rmse: mse(&r.fill_time_pred, &r.fill_time_true)?.sqrt(),
                fill_time_mae: mae(&r.fill_time_pred, &r.fill_time_true)?,
                deflection_rmse: mse(&r.deflection_pred, &r.deflection_true)?.sqrt(),
                deflection_mae: mae(&r.deflection_pred, &r.deflection_true)?,
            });
        }
        per_fold.push(FoldReport {
            fold,
            test_samples: records.iter().map(|r| r.name.clone()).collect(),
            train_samples: train.len(),
            fill_time: Summary::from_samples(&fill_parts)?,
            deflection: Summary::from_samples(&defl_parts)?,
            baseline_deflection: Summary::from_samples(&base_parts)?,
            baseline_value,
            cnn_epoch_losses: report.epoch_losses,
        });
        points.extend(records);
    }
    let collect = |f: fn(&FoldReport) -> Summary| per_fold.iter().map(f).collect::<Vec<_>>();
    let report = CvReport {
        folds,
        seed,
        samples: dataset.len(),
        fill_time_range: hi - lo,
        mean_fill_time: Summary::mean(&collect(|f| f.fill_time)),
        mean_deflection: Summary::mean(&collect(|f| f.deflection)),
        mean_baseline_deflection: Summary::mean(&collect(|f| f.baseline_deflection)),
        per_fold,
        per_sample,
    };
    Ok(CvOutcome { report, points })
}
