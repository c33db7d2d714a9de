use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Numerically stable softmax, computed in `f64`.
pub fn softmax(logits: &[f32]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let exps: Vec<f64> = logits.iter().map(|&z| (z as f64 - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-log softmax(logits)[label]` and its gradient `softmax - onehot(label)`.
///
/// # Panics
///
/// Panics if `label` is out of range.
pub fn softmax_xent(logits: &[f32], label: usize) -> (f32, Vec<f32>) {
    assert!(
        label < logits.len(),
        "label {label} out of range for {} classes",
        logits.len()
    );
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let log_sum = logits.iter().map(|&z| (z as f64 - max).exp()).sum::<f64>().ln() + max;
    let loss = log_sum - logits[label] as f64;
    let mut grad: Vec<f32> = logits.iter().map(|&z| (z as f64 - log_sum).exp() as f32).collect();
    grad[label] -= 1.0;
    (loss as f32, grad)
}

/// Sum of squared differences and its gradient `2 (pred - target)`.
pub fn l2_mask_loss(pred: &Tensor, target: &Tensor) -> Result<(f32, Tensor)> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch {
            expected: pred.shape().to_vec(),
            actual: target.shape().to_vec(),
        });
    }
    let mut grad = Tensor::zeros(pred.shape());
    let mut loss = 0.0f64;
    for ((g, &p), &t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = p - t;
        loss += d as f64 * d as f64;
        *g = 2.0 * d;
    }
    Ok((loss as f32, grad))
}
