use super::HarnessError;
use crate::scalar::Real;

fn check<T>(pred: &[T], truth: &[T]) -> Result<(), HarnessError> {
    if pred.len() != truth.len() {
        return Err(HarnessError::Length { pred: pred.len(), truth: truth.len() });
    }
    if pred.is_empty() {
        return Err(HarnessError::Empty);
    }
    Ok(())
}

/// Mean squared error, accumulated in `f64`.
pub fn mse<T: Real>(pred: &[T], truth: &[T]) -> Result<f64, HarnessError> {
    check(pred, truth)?;
    let sum: f64 = pred
        .iter()
        .zip(truth)
        .map(|(&p, &t)| {
            let e = p.to_f64_lossless() - t.to_f64_lossless();
            e * e
        })
        .sum();
    Ok(sum / pred.len() as f64)
}

pub fn rmse<T: Real>(pred: &[T], truth: &[T]) -> Result<f64, HarnessError> {
    mse(pred, truth).map(f64::sqrt)
}

pub fn mae<T: Real>(pred: &[T], truth: &[T]) -> Result<f64, HarnessError> {
    check(pred, truth)?;
    let sum: f64 = pred
        .iter()
        .zip(truth)
        .map(|(&p, &t)| (p.to_f64_lossless() - t.to_f64_lossless()).abs())
        .sum();
    Ok(sum / pred.len() as f64)
}
