use super::Real;
use crate::error::{Error, Result};

/// Softmax cross-entropy of one example.
///
/// Returns `-log softmax(logits)[target]` and its gradient
/// `softmax(logits) - onehot(target)`. The max logit is subtracted before
/// exponentiating.
pub fn softmax_cross_entropy<T: Real>(logits: &[T], target: usize) -> Result<(T, Vec<T>)> {
    if logits.len() < 2 || target >= logits.len() {
        return Err(Error::shape(
            "softmax_cross_entropy",
            "at least 2 classes and target < classes",
            format!("{} classes, target {target}", logits.len()),
        ));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            op: "softmax_cross_entropy",
        });
    }
    let max = logits.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v.as_f64() - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() - (logits[target].as_f64() - max);
    let grad = exps
        .iter()
        .enumerate()
        .map(|(c, e)| T::from_f64_lossy(e / sum - if c == target { 1.0 } else { 0.0 }))
        .collect();
    Ok((T::from_f64_lossy(loss), grad))
}
