use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvSpec {
    pub fn square(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Self { in_channels, out_channels, kernel_h: kernel, kernel_w: kernel, stride, padding }
    }

    /// `floor((H + 2p - kh) / s) + 1` per axis, or `None` when the kernel does not fit.
    pub fn output_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        if self.stride == 0 {
            return None;
        }
        let (ph, pw) = (h + 2 * self.padding, w + 2 * self.padding);
        if ph < self.kernel_h || pw < self.kernel_w {
            return None;
        }
        Some(((ph - self.kernel_h) / self.stride + 1, (pw - self.kernel_w) / self.stride + 1))
    }

    pub fn patch_len(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }
}

/// 2-D cross-correlation, weights `[out, in, kh, kw]`, computed as im2col + GEMM.
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    pub spec: ConvSpec,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(spec: ConvSpec, weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let w_shape = [spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w];
        if weight.shape() != w_shape {
            return Err(Error::Shape(format!(
                "conv weight {:?} does not match spec {w_shape:?}",
                weight.shape()
            )));
        }
        if bias.shape() != [spec.out_channels] {
            return Err(Error::Shape(format!(
                "conv bias {:?} does not match {} output channels",
                bias.shape(),
                spec.out_channels
            )));
        }
        if spec.stride == 0 {
            return Err(Error::Shape("conv stride must be positive".into()));
        }
        Ok(Self { spec, weight, bias, input: None })
    }

    /// He-normal weights (`std = sqrt(2 / fan_in)`), zero bias.
    pub fn he_init(spec: ConvSpec, rng: &mut impl Rng) -> Result<Self> {
        let std = (2.0 / spec.patch_len() as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("finite std");
        let n = spec.out_channels * spec.patch_len();
        let values: Vec<f64> = (0..n).map(|_| normal.sample(rng)).collect();
        let weight = Tensor::from_f64(
            vec![spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w],
            &values,
        )?;
        Self::new(spec, weight, Tensor::zeros(vec![spec.out_channels]))
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<([usize; 4], (usize, usize))> {
        let [n, c, h, w] = x.dims4()?;
        if c != self.spec.in_channels {
            return Err(Error::Shape(format!(
                "conv expects {} input channels, got {c} (input {:?})",
                self.spec.in_channels,
                x.shape()
            )));
        }
        let out = self.spec.output_hw(h, w).ok_or_else(|| {
            Error::Shape(format!(
                "{}x{} kernel does not fit a {h}x{w} input with padding {}",
                self.spec.kernel_h, self.spec.kernel_w, self.spec.padding
            ))
        })?;
        Ok(([n, c, h, w], out))
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let ([n, _, h, w], (ho, wo)) = self.check_input(x)?;
        let (co, plen, npos) = (self.spec.out_channels, self.spec.patch_len(), ho * wo);
        let mut out = vec![T::zero(); n * co * npos];
        let mut cols = vec![T::zero(); plen * npos];
        let sample_len = self.spec.in_channels * h * w;
        for (b, out_b) in out.chunks_exact_mut(co * npos).enumerate() {
            im2col(&self.spec, &x.data()[b * sample_len..(b + 1) * sample_len], h, w, ho, wo, &mut cols);
            T::gemm(co, plen, npos, self.weight.data(), false, &cols, false, T::zero(), out_b);
            for (o, row) in out_b.chunks_exact_mut(npos).enumerate() {
                let bias = self.bias.data()[o];
                row.iter_mut().for_each(|v| *v += bias);
            }
        }
        Tensor::new(vec![n, co, ho, wo], out)
    }

    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.forward(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    /// Accumulates weight/bias gradients and returns the input gradient.
    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.input.take().ok_or(Error::NoForwardContext("conv2d"))?;
        let ([n, c, h, w], (ho, wo)) = self.check_input(&x)?;
        let (co, plen, npos) = (self.spec.out_channels, self.spec.patch_len(), ho * wo);
        if grad_out.shape() != [n, co, ho, wo] {
            return Err(Error::Shape(format!(
                "conv grad {:?} does not match output [{n}, {co}, {ho}, {wo}]",
                grad_out.shape()
            )));
        }
        let sample_len = c * h * w;
        let mut grad_in = vec![T::zero(); x.len()];
        let mut cols = vec![T::zero(); plen * npos];
        let mut dcols = vec![T::zero(); plen * npos];
        let weight = self.weight.data().to_vec();
        for b in 0..n {
            let gy = &grad_out.data()[b * co * npos..(b + 1) * co * npos];
            im2col(&self.spec, &x.data()[b * sample_len..(b + 1) * sample_len], h, w, ho, wo, &mut cols);
            T::gemm(co, npos, plen, gy, false, &cols, true, T::one(), self.weight.grad_mut());
            let gb = self.bias.grad_mut();
            for (o, row) in gy.chunks_exact(npos).enumerate() {
                gb[o] += row.iter().copied().sum::<T>();
            }
            T::gemm(plen, co, npos, &weight, true, gy, false, T::zero(), &mut dcols);
            col2im(&self.spec, &dcols, h, w, ho, wo, &mut grad_in[b * sample_len..(b + 1) * sample_len]);
        }
        Tensor::new(x.shape().to_vec(), grad_in)
    }

    pub fn params(&self) -> [&Tensor<T>; 2] {
        [&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut Tensor<T>; 2] {
        [&mut self.weight, &mut self.bias]
    }
}

/// `cols[(ci*kh + i)*kw + j][oy*wo + ox] = x[ci][oy*s + i - p][ox*s + j - p]` (zero outside).
fn im2col<T: Scalar>(spec: &ConvSpec, x: &[T], h: usize, w: usize, ho: usize, wo: usize, cols: &mut [T]) {
    let (s, p) = (spec.stride as isize, spec.padding as isize);
    let npos = ho * wo;
    for ci in 0..spec.in_channels {
        let plane = &x[ci * h * w..(ci + 1) * h * w];
        for i in 0..spec.kernel_h {
            for j in 0..spec.kernel_w {
                let row = ((ci * spec.kernel_h + i) * spec.kernel_w + j) * npos;
                let dst = &mut cols[row..row + npos];
                for oy in 0..ho {
                    let y = oy as isize * s + i as isize - p;
                    let line = &mut dst[oy * wo..(oy + 1) * wo];
                    if y < 0 || y >= h as isize {
                        line.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src = &plane[y as usize * w..(y as usize + 1) * w];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let xx = ox as isize * s + j as isize - p;
                        *v = if xx < 0 || xx >= w as isize { T::zero() } else { src[xx as usize] };
                    }
                }
            }
        }
    }
}

/// Scatter-add inverse of [`im2col`].
fn col2im<T: Scalar>(spec: &ConvSpec, cols: &[T], h: usize, w: usize, ho: usize, wo: usize, x: &mut [T]) {
    let (s, p) = (spec.stride as isize, spec.padding as isize);
    let npos = ho * wo;
    for ci in 0..spec.in_channels {
        let plane = &mut x[ci * h * w..(ci + 1) * h * w];
        for i in 0..spec.kernel_h {
            for j in 0..spec.kernel_w {
                let row = ((ci * spec.kernel_h + i) * spec.kernel_w + j) * npos;
                let src = &cols[row..row + npos];
                for oy in 0..ho {
                    let y = oy as isize * s + i as isize - p;
                    if y < 0 || y >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[y as usize * w..(y as usize + 1) * w];
                    for (ox, v) in src[oy * wo..(oy + 1) * wo].iter().enumerate() {
                        let xx = ox as isize * s + j as isize - p;
                        if xx >= 0 && xx < w as isize {
                            dst[xx as usize] += *v;
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Quadruple-loop reference convolution.
    fn naive_conv(x: &[f64], dims: [usize; 4], spec: &ConvSpec, wt: &[f64], bias: &[f64]) -> Vec<f64> {
        let [n, c, h, w] = dims;
        let (ho, wo) = spec.output_hw(h, w).unwrap();
        let mut out = vec![0.0; n * spec.out_channels * ho * wo];
        for b in 0..n {
            for o in 0..spec.out_channels {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut acc = bias[o];
                        for ci in 0..c {
                            for i in 0..spec.kernel_h {
                                for j in 0..spec.kernel_w {
                                    let y = (oy * spec.stride + i) as isize - spec.padding as isize;
                                    let xx = (ox * spec.stride + j) as isize - spec.padding as isize;
                                    if y < 0 || xx < 0 || y >= h as isize || xx >= w as isize {
                                        continue;
                                    }
                                    let xv = x[((b * c + ci) * h + y as usize) * w + xx as usize];
                                    let wv = wt[((o * c + ci) * spec.kernel_h + i) * spec.kernel_w + j];
                                    acc += xv * wv;
                                }
                            }
                        }
                        out[((b * spec.out_channels + o) * ho + oy) * wo + ox] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel() {
        let spec = ConvSpec::square(1, 1, 1, 1, 0);
        let conv = Conv2d::new(
            spec,
            Tensor::<f64>::new(vec![1, 1, 1, 1], vec![1.0]).unwrap(),
            Tensor::zeros(vec![1]),
        )
        .unwrap();
        let x = Tensor::from_f64(vec![1, 1, 2, 3], &[1.0, -2.0, 3.0, 4.5, 0.0, 7.0]).unwrap();
        assert_eq!(conv.forward(&x).unwrap().data(), x.data());
    }

    #[test]
    fn ones_kernel_on_constant_image() {
        let spec = ConvSpec::square(1, 1, 3, 1, 0);
        let conv = Conv2d::new(
            spec,
            Tensor::<f64>::new(vec![1, 1, 3, 3], vec![1.0; 9]).unwrap(),
            Tensor::zeros(vec![1]),
        )
        .unwrap();
        let x = Tensor::<f64>::new(vec![1, 1, 5, 6], vec![2.5; 30]).unwrap();
        let y = conv.forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 3, 4]);
        assert!(y.data().iter().all(|&v| v == 22.5));
    }

    #[test]
    fn matches_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let normal = Normal::new(0.0, 1.0).unwrap();
        for (stride, pad) in [(1, 0), (1, 1), (2, 1), (2, 0)] {
            let spec = ConvSpec::square(3, 4, 3, stride, pad);
            let conv = Conv2d::<f64>::he_init(spec, &mut rng).unwrap();
            let mut conv = conv;
            let b: Vec<f64> = (0..4).map(|_| normal.sample(&mut rng)).collect();
            conv.bias = Tensor::from_f64(vec![4], &b).unwrap();
            let xv: Vec<f64> = (0..2 * 3 * 5 * 5).map(|_| normal.sample(&mut rng)).collect();
            let x = Tensor::from_f64(vec![2, 3, 5, 5], &xv).unwrap();
            let fast = conv.forward(&x).unwrap();
            let slow = naive_conv(&xv, [2, 3, 5, 5], &spec, conv.weight.data(), &b);
            let max_diff = fast.data().iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(max_diff < 1e-10, "stride {stride} pad {pad}: {max_diff}");
        }
    }

    #[test]
    fn rejects_channel_mismatch_and_missing_context() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut conv = Conv2d::<f64>::he_init(ConvSpec::square(2, 2, 3, 1, 1), &mut rng).unwrap();
        let x = Tensor::<f64>::zeros(vec![1, 3, 4, 4]);
        let err = conv.forward(&x).unwrap_err();
        assert!(err.to_string().contains("2 input channels, got 3"));
        let g = Tensor::<f64>::zeros(vec![1, 2, 4, 4]);
        assert!(matches!(conv.backward(&g), Err(Error::NoForwardContext(_))));
    }
}
