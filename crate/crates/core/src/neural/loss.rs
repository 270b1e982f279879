use super::Scalar;
use crate::error::{Error, Result};

/// Max-shifted softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().cloned().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: T = exps.iter().cloned().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of `softmax(logits)` against `class`, with its gradient
/// `softmax(logits) - onehot(class)`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &[T], class: usize) -> Result<(T, Vec<T>)> {
    if class >= logits.len() {
        return Err(Error::invalid(format!("class {class} out of range for {} logits", logits.len())));
    }
    let max = logits.iter().cloned().fold(T::neg_infinity(), T::max);
    let sum: T = logits.iter().map(|&l| (l - max).exp()).sum();
    let log_sum = sum.ln();
    let loss = -(logits[class] - max - log_sum);
    let mut grad = softmax(logits);
    grad[class] -= T::one();
    Ok((loss, grad))
}

/// Index of the largest value; the first one wins ties.
pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}
