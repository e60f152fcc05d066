use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::{Error, Result};

/// Added under the square root so the RMSE gradient stays finite at zero error.
pub const RMSE_EPS: f64 = 1e-12;

/// Row-wise softmax of an `[N, K]` tensor (max-subtracted).
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let [_, k] = logits.dims2()?;
    let mut out = logits.data().to_vec();
    for row in out.chunks_exact_mut(k) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        row.iter_mut().for_each(|v| *v = (*v - max).exp());
        let sum: T = row.iter().copied().sum();
        row.iter_mut().for_each(|v| *v = *v / sum);
    }
    Tensor::new(logits.shape().to_vec(), out)
}

/// Mean cross-entropy of softmax(logits) against one-hot rows, with gradient
/// `(softmax - onehot) / N` w.r.t. the logits.
pub fn softmax_xent<T: Scalar>(logits: &Tensor<T>, onehot: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    let [n, k] = logits.dims2()?;
    if k < 2 {
        return Err(Error::Shape(format!("cross-entropy needs at least 2 classes, got {k}")));
    }
    if onehot.shape() != logits.shape() {
        return Err(Error::Shape(format!(
            "one-hot {:?} does not match logits {:?}",
            onehot.shape(),
            logits.shape()
        )));
    }
    for (i, row) in onehot.data().chunks_exact(k).enumerate() {
        let ones = row.iter().filter(|&&v| v == T::one()).count();
        let zeros = row.iter().filter(|&&v| v == T::zero()).count();
        if ones != 1 || zeros != k - 1 {
            return Err(Error::Shape(format!("row {i} is not a one-hot vector")));
        }
    }
    let probs = softmax(logits)?;
    let inv_n = T::one() / T::from_usize(n).unwrap();
    let mut loss = T::zero();
    for (lrow, orow) in logits.data().chunks_exact(k).zip(onehot.data().chunks_exact(k)) {
        let max = lrow.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = max + lrow.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
        let true_logit = lrow.iter().zip(orow).find(|(_, &o)| o == T::one()).map(|(&l, _)| l).unwrap();
        loss += lse - true_logit;
    }
    let grad: Vec<T> = probs.data().iter().zip(onehot.data()).map(|(&p, &o)| (p - o) * inv_n).collect();
    Ok((loss * inv_n, Tensor::new(logits.shape().to_vec(), grad)?))
}

/// `sqrt(mean((pred - target)^2) + RMSE_EPS)` and its gradient w.r.t. `pred`.
pub fn rmse_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    if pred.len() != target.len() {
        return Err(Error::Shape(format!(
            "prediction has {} values, target {}",
            pred.len(),
            target.len()
        )));
    }
    let n = T::from_usize(pred.len()).unwrap();
    let mse = pred.data().iter().zip(target.data()).map(|(&p, &t)| (p - t) * (p - t)).sum::<T>() / n;
    let loss = (mse + T::from_f64_lossy(RMSE_EPS)).sqrt();
    let grad = pred.data().iter().zip(target.data()).map(|(&p, &t)| (p - t) / (n * loss)).collect();
    Ok((loss, Tensor::new(pred.shape().to_vec(), grad)?))
}
