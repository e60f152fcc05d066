use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::conv::{Conv2d, ConvSpec};
use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::{Error, Result};

/// `max(x, 0)`; the subgradient at exactly 0 is 0.
#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Option<Vec<bool>>,
}

impl Relu {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward<T: Scalar>(&self, x: &Tensor<T>) -> Tensor<T> {
        let data = x.data().iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect();
        Tensor::new(x.shape().to_vec(), data).expect("same shape")
    }

    pub fn forward_train<T: Scalar>(&mut self, x: &Tensor<T>) -> Tensor<T> {
        self.mask = Some(x.data().iter().map(|&v| v > T::zero()).collect());
        self.forward(x)
    }

    pub fn backward<T: Scalar>(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let mask = self.mask.take().ok_or(Error::NoForwardContext("relu"))?;
        if mask.len() != grad_out.len() {
            return Err(Error::Shape("relu gradient size differs from forward input".into()));
        }
        let data = grad_out
            .data()
            .iter()
            .zip(&mask)
            .map(|(&g, &m)| if m { g } else { T::zero() })
            .collect();
        Tensor::new(grad_out.shape().to_vec(), data)
    }
}

/// Non-overlapping `size x size` max-pooling (trailing rows/columns dropped).
/// Ties route the gradient to the first maximal element in row-major order.
#[derive(Debug, Clone)]
pub struct MaxPool2d {
    pub size: usize,
    argmax: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPool2d {
    pub fn new(size: usize) -> Self {
        Self { size, argmax: None }
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        (self.size > 0 && h >= self.size && w >= self.size).then(|| (h / self.size, w / self.size))
    }

    fn run<T: Scalar>(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
        let [n, c, h, w] = x.dims4()?;
        let (ho, wo) = self.output_hw(h, w).ok_or_else(|| {
            Error::Shape(format!("{0}x{0} pooling does not fit a {h}x{w} input", self.size))
        })?;
        let k = self.size;
        let mut out = Vec::with_capacity(n * c * ho * wo);
        let mut idx = Vec::with_capacity(n * c * ho * wo);
        let xd = x.data();
        for plane in 0..n * c {
            let base = plane * h * w;
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut best = base + oy * k * w + ox * k;
                    for i in 0..k {
                        for j in 0..k {
                            let at = base + (oy * k + i) * w + ox * k + j;
                            if xd[at] > xd[best] {
                                best = at;
                            }
                        }
                    }
                    out.push(xd[best]);
                    idx.push(best);
                }
            }
        }
        Ok((Tensor::new(vec![n, c, ho, wo], out)?, idx))
    }

    pub fn forward<T: Scalar>(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.run(x)?.0)
    }

    pub fn forward_train<T: Scalar>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (y, idx) = self.run(x)?;
        self.argmax = Some((x.shape().to_vec(), idx));
        Ok(y)
    }

    pub fn backward<T: Scalar>(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let (in_shape, idx) = self.argmax.take().ok_or(Error::NoForwardContext("maxpool2d"))?;
        if idx.len() != grad_out.len() {
            return Err(Error::Shape("maxpool gradient size differs from forward output".into()));
        }
        let mut grad = vec![T::zero(); in_shape.iter().product()];
        for (&at, &g) in idx.iter().zip(grad_out.data()) {
            grad[at] += g;
        }
        Tensor::new(in_shape, grad)
    }
}

/// Fully connected layer `y = x Wᵀ + b`, weights `[out, in]`.
#[derive(Debug, Clone)]
pub struct Dense<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let [out, _] = weight.dims2()?;
        if bias.shape() != [out] {
            return Err(Error::Shape(format!(
                "dense bias {:?} does not match {out} outputs",
                bias.shape()
            )));
        }
        Ok(Self { weight, bias, input: None })
    }

    pub fn he_init(in_features: usize, out_features: usize, rng: &mut impl Rng) -> Result<Self> {
        let normal = Normal::new(0.0, (2.0 / in_features as f64).sqrt()).expect("finite std");
        let values: Vec<f64> = (0..in_features * out_features).map(|_| normal.sample(rng)).collect();
        Self::new(
            Tensor::from_f64(vec![out_features, in_features], &values)?,
            Tensor::zeros(vec![out_features]),
        )
    }

    pub fn in_features(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_features(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let [n, f] = x.dims2()?;
        if f != self.in_features() {
            return Err(Error::Shape(format!(
                "dense layer expects {} features, got {f}",
                self.in_features()
            )));
        }
        let out = self.out_features();
        let mut y = Vec::with_capacity(n * out);
        for _ in 0..n {
            y.extend_from_slice(self.bias.data());
        }
        T::gemm(n, f, out, x.data(), false, self.weight.data(), true, T::one(), &mut y);
        Tensor::new(vec![n, out], y)
    }

    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.forward(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.input.take().ok_or(Error::NoForwardContext("dense"))?;
        let [n, f] = x.dims2()?;
        let out = self.out_features();
        if grad_out.shape() != [n, out] {
            return Err(Error::Shape(format!(
                "dense grad {:?} does not match output [{n}, {out}]",
                grad_out.shape()
            )));
        }
        T::gemm(out, n, f, grad_out.data(), true, x.data(), false, T::one(), self.weight.grad_mut());
        let gb = self.bias.grad_mut();
        for row in grad_out.data().chunks_exact(out) {
            for (b, &g) in gb.iter_mut().zip(row) {
                *b += g;
            }
        }
        let mut gx = vec![T::zero(); n * f];
        T::gemm(n, out, f, grad_out.data(), false, self.weight.data(), false, T::zero(), &mut gx);
        Tensor::new(vec![n, f], gx)
    }

    pub fn params(&self) -> [&Tensor<T>; 2] {
        [&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut Tensor<T>; 2] {
        [&mut self.weight, &mut self.bias]
    }
}

/// `relu(conv2(relu(conv1(x))) + x)` with an identity skip.
#[derive(Debug, Clone)]
pub struct ResidualBlock<T> {
    pub conv1: Conv2d<T>,
    pub conv2: Conv2d<T>,
    inner: Relu,
    outer: Relu,
}

impl<T: Scalar> ResidualBlock<T> {
    pub fn new(conv1: Conv2d<T>, conv2: Conv2d<T>) -> Result<Self> {
        let (a, b) = (conv1.spec, conv2.spec);
        if a.in_channels != b.out_channels || a.out_channels != b.in_channels {
            return Err(Error::Shape(format!(
                "residual block channels {}->{}->{} do not close the identity skip",
                a.in_channels, a.out_channels, b.out_channels
            )));
        }
        for s in [a, b] {
            if s.stride != 1 || s.kernel_h != 2 * s.padding + 1 || s.kernel_w != 2 * s.padding + 1 {
                return Err(Error::Shape(
                    "residual convs must be stride 1 with 'same' padding".into(),
                ));
            }
        }
        Ok(Self { conv1, conv2, inner: Relu::new(), outer: Relu::new() })
    }

    pub fn he_init(channels: usize, kernel: usize, rng: &mut impl Rng) -> Result<Self> {
        let spec = ConvSpec::square(channels, channels, kernel, 1, kernel / 2);
        Self::new(Conv2d::he_init(spec, rng)?, Conv2d::he_init(spec, rng)?)
    }

    fn check(&self, x: &Tensor<T>) -> Result<()> {
        let [_, c, _, _] = x.dims4()?;
        if c != self.conv1.spec.in_channels {
            return Err(Error::Shape(format!(
                "residual block expects {} channels, got {c}",
                self.conv1.spec.in_channels
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check(x)?;
        let h = self.inner.forward(&self.conv1.forward(x)?);
        let mut z = self.conv2.forward(&h)?;
        z.data_mut().iter_mut().zip(x.data()).for_each(|(a, &b)| *a += b);
        Ok(self.outer.forward(&z))
    }

    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check(x)?;
        let h = self.conv1.forward_train(x)?;
        let h = self.inner.forward_train(&h);
        let mut z = self.conv2.forward_train(&h)?;
        z.data_mut().iter_mut().zip(x.data()).for_each(|(a, &b)| *a += b);
        Ok(self.outer.forward_train(&z))
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let gz = self.outer.backward(grad_out)?;
        let gh = self.conv2.backward(&gz)?;
        let gh = self.inner.backward(&gh)?;
        let mut gx = self.conv1.backward(&gh)?;
        gx.data_mut().iter_mut().zip(gz.data()).for_each(|(a, &b)| *a += b);
        Ok(gx)
    }

    pub fn params(&self) -> [&Tensor<T>; 4] {
        let [w1, b1] = self.conv1.params();
        let [w2, b2] = self.conv2.params();
        [w1, b1, w2, b2]
    }

    pub fn params_mut(&mut self) -> [&mut Tensor<T>; 4] {
        let [w1, b1] = self.conv1.params_mut();
        let [w2, b2] = self.conv2.params_mut();
        [w1, b1, w2, b2]
    }
}
