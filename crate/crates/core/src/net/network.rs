use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::tensor::{Conv2d, ConvSpec, Dense, MaxPool2d, Relu, ResidualBlock, Scalar, Tensor};
use crate::{Error, Result};

pub const STEM_LAYERS: usize = 2;
pub const RESIDUAL_BLOCKS: usize = 5;
pub const HEAD_LAYERS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayerSpec {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvLayerSpec {
    pub const fn same3(out_channels: usize, stride: usize) -> Self {
        Self { out_channels, kernel: 3, stride, padding: 1 }
    }
}

/// Layer dimensions of the monitor network.
///
/// The layer counts are fixed (2 stem convs, 5 residual blocks, a max pool,
/// 2 head convs, 2 dense layers); the widths, strides and input size are free.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_channels: usize,
    pub input_height: usize,
    pub input_width: usize,
    pub stem: Vec<ConvLayerSpec>,
    pub residual_blocks: usize,
    pub residual_kernel: usize,
    pub pool: usize,
    pub head: Vec<ConvLayerSpec>,
    pub hidden_units: usize,
    pub n_classes: usize,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            input_channels: 3,
            input_height: 25,
            input_width: 255,
            stem: vec![ConvLayerSpec::same3(16, 2), ConvLayerSpec::same3(32, 2)],
            residual_blocks: RESIDUAL_BLOCKS,
            residual_kernel: 3,
            pool: 2,
            head: vec![ConvLayerSpec::same3(32, 1), ConvLayerSpec::same3(16, 1)],
            hidden_units: 128,
            n_classes: 3,
        }
    }
}

/// Activation shape after one named layer, `[C, H, W]` or `[F, 1, 1]` past the flatten.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerShape {
    pub layer: String,
    pub shape: [usize; 3],
}

impl NetworkSpec {
    pub fn with_classes(mut self, n_classes: usize) -> Self {
        self.n_classes = n_classes;
        self
    }

    pub fn outputs(&self) -> usize {
        1 + self.n_classes
    }

    fn conv_specs(&self) -> Vec<(String, ConvSpec)> {
        let mut specs = Vec::new();
        let mut c = self.input_channels;
        for (i, l) in self.stem.iter().enumerate() {
            specs.push((format!("stem.{i}"), ConvSpec::square(c, l.out_channels, l.kernel, l.stride, l.padding)));
            c = l.out_channels;
        }
        for (i, l) in self.head.iter().enumerate() {
            specs.push((format!("head.{i}"), ConvSpec::square(c, l.out_channels, l.kernel, l.stride, l.padding)));
            c = l.out_channels;
        }
        specs
    }

    /// Walks the layer chain and returns every intermediate shape, or an error
    /// naming the first layer that cannot be applied.
    pub fn trace(&self) -> Result<Vec<LayerShape>> {
        let fail = |layer: &str, why: String| Error::Shape(format!("layer `{layer}`: {why}"));
        if self.stem.len() != STEM_LAYERS {
            return Err(fail("stem", format!("expected {STEM_LAYERS} conv layers, got {}", self.stem.len())));
        }
        if self.residual_blocks != RESIDUAL_BLOCKS {
            return Err(fail("res", format!("expected {RESIDUAL_BLOCKS} blocks, got {}", self.residual_blocks)));
        }
        if self.head.len() != HEAD_LAYERS {
            return Err(fail("head", format!("expected {HEAD_LAYERS} conv layers, got {}", self.head.len())));
        }
        if self.input_channels == 0 || self.input_height == 0 || self.input_width == 0 {
            return Err(fail("input", "empty input shape".into()));
        }
        if self.n_classes == 0 {
            return Err(fail("fc.1", "at least one material class is required".into()));
        }
        if self.hidden_units == 0 {
            return Err(fail("fc.0", "no hidden units".into()));
        }
        if self.residual_kernel % 2 == 0 {
            return Err(fail("res.0", format!("kernel {} has no centered padding", self.residual_kernel)));
        }

        let mut out = Vec::new();
        let (mut c, mut h, mut w) = (self.input_channels, self.input_height, self.input_width);
        let specs = self.conv_specs();
        let apply_conv = |out: &mut Vec<LayerShape>, name: &str, spec: &ConvSpec, c: &mut usize, h: &mut usize, w: &mut usize| {
            if spec.out_channels == 0 || spec.kernel_h == 0 || spec.stride == 0 {
                return Err(fail(name, "zero-sized channel, kernel or stride".into()));
            }
            let (ho, wo) = spec.output_hw(*h, *w).ok_or_else(|| {
                fail(name, format!("{}x{} kernel does not fit {}x{} input", spec.kernel_h, spec.kernel_w, h, w))
            })?;
            (*c, *h, *w) = (spec.out_channels, ho, wo);
            out.push(LayerShape { layer: name.to_string(), shape: [*c, *h, *w] });
            Ok(())
        };
        for (name, spec) in &specs[..STEM_LAYERS] {
            apply_conv(&mut out, name, spec, &mut c, &mut h, &mut w)?;
        }
        for i in 0..self.residual_blocks {
            let k = self.residual_kernel;
            if k > h + 2 * (k / 2) || k > w + 2 * (k / 2) {
                return Err(fail(&format!("res.{i}"), format!("{k}x{k} kernel does not fit {h}x{w} input")));
            }
            out.push(LayerShape { layer: format!("res.{i}"), shape: [c, h, w] });
        }
        let pool = MaxPool2d::new(self.pool);
        let (ph, pw) = pool
            .output_hw(h, w)
            .ok_or_else(|| fail("pool", format!("{0}x{0} pool does not fit {h}x{w} input", self.pool)))?;
        (h, w) = (ph, pw);
        out.push(LayerShape { layer: "pool".into(), shape: [c, h, w] });
        for (name, spec) in &specs[STEM_LAYERS..] {
            apply_conv(&mut out, name, spec, &mut c, &mut h, &mut w)?;
        }
        out.push(LayerShape { layer: "flatten".into(), shape: [c * h * w, 1, 1] });
        out.push(LayerShape { layer: "fc.0".into(), shape: [self.hidden_units, 1, 1] });
        out.push(LayerShape { layer: "fc.1".into(), shape: [self.outputs(), 1, 1] });
        Ok(out)
    }

    pub fn flatten_len(&self) -> Result<usize> {
        let trace = self.trace()?;
        Ok(trace.iter().find(|l| l.layer == "flatten").expect("traced").shape[0])
    }

    /// Number of trainable scalars implied by the layer dimensions.
    pub fn parameter_count(&self) -> Result<usize> {
        let flat = self.flatten_len()?;
        let conv = |s: &ConvSpec| s.out_channels * (s.patch_len() + 1);
        let stem_c = self.stem.last().expect("traced").out_channels;
        let res_spec = ConvSpec::square(stem_c, stem_c, self.residual_kernel, 1, self.residual_kernel / 2);
        Ok(self.conv_specs().iter().map(|(_, s)| conv(s)).sum::<usize>()
            + 2 * self.residual_blocks * conv(&res_spec)
            + (flat + 1) * self.hidden_units
            + (self.hidden_units + 1) * self.outputs())
    }
}

/// Raw network outputs for a batch: regression `[N, 1]` and class logits `[N, K]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetOutput<T> {
    pub value: Tensor<T>,
    pub logits: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct Network<T> {
    spec: NetworkSpec,
    stem: Vec<(Conv2d<T>, Relu)>,
    blocks: Vec<ResidualBlock<T>>,
    pool: MaxPool2d,
    head: Vec<(Conv2d<T>, Relu)>,
    fc0: Dense<T>,
    fc0_relu: Relu,
    fc1: Dense<T>,
    input_shape: Option<Vec<usize>>,
    conv_out_shape: Option<Vec<usize>>,
}

/// Builds a He-initialized network; the same seed always yields the same weights.
pub fn build_network<T: Scalar>(spec: &NetworkSpec, seed: u64) -> Result<Network<T>> {
    let flat = spec.flatten_len()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let convs = spec.conv_specs();
    let mut stem = Vec::new();
    for (_, s) in &convs[..STEM_LAYERS] {
        stem.push((Conv2d::he_init(*s, &mut rng)?, Relu::new()));
    }
    let width = spec.stem[STEM_LAYERS - 1].out_channels;
    let blocks = (0..spec.residual_blocks)
        .map(|_| ResidualBlock::he_init(width, spec.residual_kernel, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let mut head = Vec::new();
    for (_, s) in &convs[STEM_LAYERS..] {
        head.push((Conv2d::he_init(*s, &mut rng)?, Relu::new()));
    }
    let fc0 = Dense::he_init(flat, spec.hidden_units, &mut rng)?;
    let fc1 = Dense::he_init(spec.hidden_units, spec.outputs(), &mut rng)?;
    Ok(Network {
        spec: spec.clone(),
        stem,
        blocks,
        pool: MaxPool2d::new(spec.pool),
        head,
        fc0,
        fc0_relu: Relu::new(),
        fc1,
        input_shape: None,
        conv_out_shape: None,
    })
}

impl<T: Scalar> Network<T> {
    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn n_classes(&self) -> usize {
        self.spec.n_classes
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<usize> {
        let [n, c, h, w] = x.dims4()?;
        let s = &self.spec;
        if [c, h, w] != [s.input_channels, s.input_height, s.input_width] {
            return Err(Error::Shape(format!(
                "network expects [N, {}, {}, {}], got {:?}",
                s.input_channels,
                s.input_height,
                s.input_width,
                x.shape()
            )));
        }
        Ok(n)
    }

    fn split(&self, out: Tensor<T>) -> Result<NetOutput<T>> {
        let [n, width] = out.dims2()?;
        let k = width - 1;
        let mut value = Vec::with_capacity(n);
        let mut logits = Vec::with_capacity(n * k);
        for row in out.data().chunks_exact(width) {
            value.push(row[0]);
            logits.extend_from_slice(&row[1..]);
        }
        Ok(NetOutput { value: Tensor::new(vec![n, 1], value)?, logits: Tensor::new(vec![n, k], logits)? })
    }

    /// Pure inference pass over `[N, C, H, W]`.
    pub fn forward(&self, x: &Tensor<T>) -> Result<NetOutput<T>> {
        let n = self.check_input(x)?;
        let mut h = x.clone();
        for (conv, relu) in &self.stem {
            h = relu.forward(&conv.forward(&h)?);
        }
        for block in &self.blocks {
            h = block.forward(&h)?;
        }
        h = self.pool.forward(&h)?;
        for (conv, relu) in &self.head {
            h = relu.forward(&conv.forward(&h)?);
        }
        let len = h.len() / n;
        let h = self.fc0_relu.forward(&self.fc0.forward(&h.reshape(vec![n, len])?)?);
        self.split(self.fc1.forward(&h)?)
    }

    /// Forward pass that records what [`Network::backward`] needs.
    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<NetOutput<T>> {
        let n = self.check_input(x)?;
        self.input_shape = Some(x.shape().to_vec());
        let mut h = x.clone();
        for (conv, relu) in &mut self.stem {
            h = relu.forward_train(&conv.forward_train(&h)?);
        }
        for block in &mut self.blocks {
            h = block.forward_train(&h)?;
        }
        h = self.pool.forward_train(&h)?;
        for (conv, relu) in &mut self.head {
            h = relu.forward_train(&conv.forward_train(&h)?);
        }
        self.conv_out_shape = Some(h.shape().to_vec());
        let len = h.len() / n;
        let h = self.fc0.forward_train(&h.reshape(vec![n, len])?)?;
        let h = self.fc0_relu.forward_train(&h);
        let out = self.fc1.forward_train(&h)?;
        self.split(out)
    }

    /// Accumulates parameter gradients given the loss gradients w.r.t. both outputs.
    pub fn backward(&mut self, grad_value: &Tensor<T>, grad_logits: &Tensor<T>) -> Result<()> {
        let conv_shape = self.conv_out_shape.take().ok_or(Error::NoForwardContext("network"))?;
        self.input_shape.take();
        let [n, k] = grad_logits.dims2()?;
        if grad_value.len() != n || k != self.spec.n_classes {
            return Err(Error::Shape(format!(
                "output gradients {:?} / {:?} do not match [N, 1] / [N, {}]",
                grad_value.shape(),
                grad_logits.shape(),
                self.spec.n_classes
            )));
        }
        let mut g = Vec::with_capacity(n * (k + 1));
        for (v, row) in grad_value.data().iter().zip(grad_logits.data().chunks_exact(k)) {
            g.push(*v);
            g.extend_from_slice(row);
        }
        let g = self.fc1.backward(&Tensor::new(vec![n, k + 1], g)?)?;
        let g = self.fc0_relu.backward(&g)?;
        let mut g = self.fc0.backward(&g)?.reshape(conv_shape)?;
        for (conv, relu) in self.head.iter_mut().rev() {
            g = conv.backward(&relu.backward(&g)?)?;
        }
        g = self.pool.backward(&g)?;
        for block in self.blocks.iter_mut().rev() {
            g = block.backward(&g)?;
        }
        for (conv, relu) in self.stem.iter_mut().rev() {
            g = conv.backward(&relu.backward(&g)?)?;
        }
        Ok(())
    }

    /// Parameters in a fixed order with stable names.
    pub fn named_params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        let wb = ["weight", "bias"];
        for (i, (conv, _)) in self.stem.iter().enumerate() {
            out.extend(conv.params().into_iter().zip(wb).map(|(p, n)| (format!("stem.{i}.{n}"), p)));
        }
        let names = ["conv1.weight", "conv1.bias", "conv2.weight", "conv2.bias"];
        for (i, block) in self.blocks.iter().enumerate() {
            out.extend(block.params().into_iter().zip(names).map(|(p, n)| (format!("res.{i}.{n}"), p)));
        }
        for (i, (conv, _)) in self.head.iter().enumerate() {
            out.extend(conv.params().into_iter().zip(wb).map(|(p, n)| (format!("head.{i}.{n}"), p)));
        }
        for (i, fc) in [&self.fc0, &self.fc1].into_iter().enumerate() {
            out.extend(fc.params().into_iter().zip(wb).map(|(p, n)| (format!("fc.{i}.{n}"), p)));
        }
        out
    }

    /// Same order and names as [`Network::named_params`].
    pub fn named_params_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = Vec::new();
        let wb = ["weight", "bias"];
        for (i, (conv, _)) in self.stem.iter_mut().enumerate() {
            out.extend(conv.params_mut().into_iter().zip(wb).map(|(p, n)| (format!("stem.{i}.{n}"), p)));
        }
        let names = ["conv1.weight", "conv1.bias", "conv2.weight", "conv2.bias"];
        for (i, block) in self.blocks.iter_mut().enumerate() {
            out.extend(block.params_mut().into_iter().zip(names).map(|(p, n)| (format!("res.{i}.{n}"), p)));
        }
        for (i, (conv, _)) in self.head.iter_mut().enumerate() {
            out.extend(conv.params_mut().into_iter().zip(wb).map(|(p, n)| (format!("head.{i}.{n}"), p)));
        }
        for (i, fc) in [&mut self.fc0, &mut self.fc1].into_iter().enumerate() {
            out.extend(fc.params_mut().into_iter().zip(wb).map(|(p, n)| (format!("fc.{i}.{n}"), p)));
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.named_params().iter().map(|(_, p)| p.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for (_, p) in self.named_params_mut() {
            p.zero_grad();
        }
    }

    /// Overwrites parameter values in `named_params` order.
    pub fn load_params(&mut self, values: &[(String, Vec<usize>, Vec<T>)]) -> Result<()> {
        let mut params = self.named_params_mut();
        if params.len() != values.len() {
            return Err(Error::Incompatible(format!(
                "network has {} parameter tensors, source has {}",
                params.len(),
                values.len()
            )));
        }
        for ((name, p), (src_name, shape, data)) in params.iter_mut().zip(values) {
            if name != src_name || p.shape() != shape.as_slice() {
                return Err(Error::Incompatible(format!(
                    "parameter `{name}` {:?} vs stored `{src_name}` {shape:?}",
                    p.shape()
                )));
            }
            p.data_mut().copy_from_slice(data);
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> Result<Network<U>> {
        let mut out = build_network::<U>(&self.spec, 0)?;
        let values: Vec<_> = self
            .named_params()
            .into_iter()
            .map(|(n, p)| {
                let c = p.cast::<U>();
                (n, c.shape().to_vec(), c.into_data())
            })
            .collect();
        out.load_params(&values)?;
        Ok(out)
    }
}
