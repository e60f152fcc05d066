use crate::dataset::{LabeledSample, FRAMES_PER_INPUT};
use crate::tensor::{rmse_loss, softmax_xent, Scalar, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct JointLoss<T> {
    pub total: T,
    pub rmse: T,
    /// Zero when there is only one class.
    pub xent: T,
    pub grad_value: Tensor<T>,
    pub grad_logits: Tensor<T>,
}

/// `rmse(value, target) + lambda * xent(logits, onehot)` with gradients for both heads.
///
/// With a single class the cross-entropy is identically zero and is skipped.
pub fn joint_loss<T: Scalar>(
    pred_value: &Tensor<T>,
    target_value: &Tensor<T>,
    logits: &Tensor<T>,
    onehot: &Tensor<T>,
    lambda_cls: f64,
) -> Result<JointLoss<T>> {
    let [n, k] = logits.dims2()?;
    if pred_value.len() != n || target_value.len() != n || onehot.shape() != logits.shape() {
        return Err(Error::Shape(format!(
            "loss inputs disagree: value {:?}, target {:?}, logits {:?}, one-hot {:?}",
            pred_value.shape(),
            target_value.shape(),
            logits.shape(),
            onehot.shape()
        )));
    }
    if !(lambda_cls >= 0.0) {
        return Err(Error::Config(format!("lambda_cls must be non-negative, got {lambda_cls}")));
    }
    let (rmse, grad_value) = rmse_loss(pred_value, target_value)?;
    let grad_value = grad_value.reshape(vec![n, 1])?;
    if k < 2 {
        return Ok(JointLoss { total: rmse, rmse, xent: T::zero(), grad_value, grad_logits: Tensor::zeros(vec![n, k]) });
    }
    let (xent, mut grad_logits) = softmax_xent(logits, onehot)?;
    let lambda = T::from_f64_lossy(lambda_cls);
    grad_logits.data_mut().iter_mut().for_each(|g| *g *= lambda);
    let total = if lambda_cls == 0.0 { rmse } else { rmse + lambda * xent };
    Ok(JointLoss { total, rmse, xent, grad_value, grad_logits })
}

/// Stacked inputs `[N, 3, H, W]`, normalized targets `[N, 1]` and one-hot rows `[N, K]`.
#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub inputs: Tensor<T>,
    pub targets: Tensor<T>,
    pub onehot: Tensor<T>,
}

pub fn make_batch<T: Scalar>(samples: &[&LabeledSample], target_scale: f64) -> Result<Batch<T>> {
    let first = samples.first().ok_or_else(|| Error::Shape("empty batch".into()))?;
    let (h, w, k) = (first.input.height(), first.input.width(), first.material_onehot.len());
    let mut inputs = Vec::with_capacity(samples.len() * FRAMES_PER_INPUT * h * w);
    let mut targets = Vec::with_capacity(samples.len());
    let mut onehot = Vec::with_capacity(samples.len() * k);
    for s in samples {
        if s.input.height() != h || s.input.width() != w || s.material_onehot.len() != k {
            return Err(Error::Shape("batch samples differ in shape".into()));
        }
        inputs.extend(s.input.data().iter().map(|&v| T::from_f32(v).unwrap()));
        targets.push(T::from_f64_lossy(s.target_value as f64 / target_scale));
        onehot.extend(s.material_onehot.iter().map(|&v| T::from_f32(v).unwrap()));
    }
    let n = samples.len();
    Ok(Batch {
        inputs: Tensor::new(vec![n, FRAMES_PER_INPUT, h, w], inputs)?,
        targets: Tensor::new(vec![n, 1], targets)?,
        onehot: Tensor::new(vec![n, k], onehot)?,
    })
}
