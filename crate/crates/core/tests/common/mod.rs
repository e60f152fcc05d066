#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use speckle_monitor::net::{build_network, joint_loss, Network, NetworkSpec, ConvLayerSpec};
use speckle_monitor::tensor::{
    rmse_loss, softmax_xent, Conv2d, ConvSpec, Dense, MaxPool2d, Relu, ResidualBlock, Tensor,
};

pub const FD_STEP: f64 = 1e-6;
/// Coordinates probed per tensor; every coordinate when the tensor is smaller.
pub const FD_SAMPLES: usize = 40;

/// A layer under gradient test, seen through the scalar `sum(r * y)`.
pub trait Probe {
    fn forward(&self, x: &Tensor<f64>) -> Tensor<f64>;
    fn forward_train(&mut self, x: &Tensor<f64>) -> Tensor<f64>;
    fn backward(&mut self, g: &Tensor<f64>) -> Tensor<f64>;
    fn params(&mut self) -> Vec<&mut Tensor<f64>>;
}

impl Probe for Conv2d<f64> {
    fn forward(&self, x: &Tensor<f64>) -> Tensor<f64> {
        Conv2d::forward(self, x).unwrap()
    }
    fn forward_train(&mut self, x: &Tensor<f64>) -> Tensor<f64> {
        Conv2d::forward_train(self, x).unwrap()
    }
    fn backward(&mut self, g: &Tensor<f64>) -> Tensor<f64> {
        Conv2d::backward(self, g).unwrap()
    }
    fn params(&mut self) -> Vec<&mut Tensor<f64>> {
        self.params_mut().into_iter().collect()
    }
}

impl Probe for Dense<f64> {
    fn forward(&self, x: &Tensor<f64>) -> Tensor<f64> {
        Dense::forward(self, x).unwrap()
    }
    fn forward_train(&mut self, x: &Tensor<f64>) -> Tensor<f64> {
        Dense::forward_train(self, x).unwrap()
    }
    fn backward(&mut self, g: &Tensor<f64>) -> Tensor<f64> {
        Dense::backward(self, g).unwrap()
    }
    fn params(&mut self) -> Vec<&mut Tensor<f64>> {
        self.params_mut().into_iter().collect()
    }
}

impl Probe for ResidualBlock<f64> {
    fn forward(&self, x: &Tensor<f64>) -> Tensor<f64> {
        ResidualBlock::forward(self, x).unwrap()
    }
    fn forward_train(&mut self, x: &Tensor<f64>) -> Tensor<f64> {
        ResidualBlock::forward_train(self, x).unwrap()
    }
    fn backward(&mut self, g: &Tensor<f64>) -> Tensor<f64> {
        ResidualBlock::backward(self, g).unwrap()
    }
    fn params(&mut self) -> Vec<&mut Tensor<f64>> {
        self.params_mut().into_iter().collect()
    }
}

impl Probe for MaxPool2d {
    fn forward(&self, x: &Tensor<f64>) -> Tensor<f64> {
        MaxPool2d::forward(self, x).unwrap()
    }
    fn forward_train(&mut self, x: &Tensor<f64>) -> Tensor<f64> {
        MaxPool2d::forward_train(self, x).unwrap()
    }
    fn backward(&mut self, g: &Tensor<f64>) -> Tensor<f64> {
        MaxPool2d::backward(self, g).unwrap()
    }
    fn params(&mut self) -> Vec<&mut Tensor<f64>> {
        Vec::new()
    }
}

impl Probe for Relu {
    fn forward(&self, x: &Tensor<f64>) -> Tensor<f64> {
        Relu::forward(self, x)
    }
    fn forward_train(&mut self, x: &Tensor<f64>) -> Tensor<f64> {
        Relu::forward_train(self, x)
    }
    fn backward(&mut self, g: &Tensor<f64>) -> Tensor<f64> {
        Relu::backward(self, g).unwrap()
    }
    fn params(&mut self) -> Vec<&mut Tensor<f64>> {
        Vec::new()
    }
}

pub fn random_tensor(shape: Vec<usize>, rng: &mut impl Rng, lo: f64, hi: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    let v = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::new(shape, v).unwrap()
}

/// `||a - b|| / (||a|| + ||b||)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Central difference of `f` at step `FD_STEP`, or `None` when a step a
/// quarter as long disagrees, which means a ReLU or max-pool kink lies
/// within reach and the function is not smooth there.
pub fn central_difference(mut f: impl FnMut(f64) -> f64) -> Option<f64> {
    let d = |f: &mut dyn FnMut(f64) -> f64, h: f64| (f(h) - f(-h)) / (2.0 * h);
    let coarse = d(&mut f, FD_STEP);
    let fine = d(&mut f, FD_STEP / 4.0);
    ((coarse - fine).abs() <= 1e-6 * (coarse.abs() + fine.abs()) + 1e-9).then_some(coarse)
}

fn probe_indices(len: usize, rng: &mut impl Rng) -> Vec<usize> {
    if len <= FD_SAMPLES {
        (0..len).collect()
    } else {
        (0..FD_SAMPLES).map(|_| rng.random_range(0..len)).collect()
    }
}

fn weighted_sum(y: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

/// Largest relative error between analytic and central-difference gradients
/// over the input and every parameter tensor.
pub fn check_probe<P: Probe>(layer: &mut P, x: &Tensor<f64>, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    for p in layer.params() {
        if p.shape().len() == 1 {
            p.data_mut().iter_mut().for_each(|b| *b = rng.random_range(-0.1..0.1));
        }
        p.zero_grad();
    }
    let y = layer.forward_train(x);
    let r = random_tensor(y.shape().to_vec(), &mut rng, -1.0, 1.0);
    let gx = layer.backward(&r);

    let mut worst = 0.0f64;
    let idx = probe_indices(x.len(), &mut rng);
    let (mut ana, mut num) = (Vec::new(), Vec::new());
    for &i in &idx {
        let fd = central_difference(|h| {
            let mut xs = x.clone();
            xs.data_mut()[i] += h;
            weighted_sum(&layer.forward(&xs), &r)
        });
        if let Some(v) = fd {
            num.push(v);
            ana.push(gx.data()[i]);
        }
    }
    worst = worst.max(relative_error(&ana, &num));

    let n_params = layer.params().len();
    for k in 0..n_params {
        let (len, grad) = {
            let p = &layer.params()[k];
            (p.len(), p.grad().expect("gradient accumulated").to_vec())
        };
        let idx = probe_indices(len, &mut rng);
        let (mut ana, mut num) = (Vec::new(), Vec::new());
        for &i in &idx {
            let orig = layer.params()[k].data()[i];
            let fd = central_difference(|h| {
                layer.params()[k].data_mut()[i] = orig + h;
                let v = weighted_sum(&layer.forward(x), &r);
                layer.params()[k].data_mut()[i] = orig;
                v
            });
            if let Some(v) = fd {
                num.push(v);
                ana.push(grad[i]);
            }
        }
        worst = worst.max(relative_error(&ana, &num));
    }
    worst
}

/// Gradient check of `softmax_xent` and `rmse_loss` w.r.t. their first argument.
pub fn check_losses(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let logits = random_tensor(vec![4, 3], &mut rng, -2.0, 2.0);
    let mut onehot = vec![0.0; 12];
    for row in 0..4 {
        onehot[row * 3 + rng.random_range(0..3)] = 1.0;
    }
    let onehot = Tensor::new(vec![4, 3], onehot).unwrap();
    let (_, g) = softmax_xent(&logits, &onehot).unwrap();
    let num: Vec<f64> = (0..logits.len())
        .map(|i| {
            let mut p = logits.clone();
            p.data_mut()[i] += FD_STEP;
            let mut m = logits.clone();
            m.data_mut()[i] -= FD_STEP;
            (softmax_xent(&p, &onehot).unwrap().0 - softmax_xent(&m, &onehot).unwrap().0) / (2.0 * FD_STEP)
        })
        .collect();
    let mut worst = relative_error(g.data(), &num);

    let pred = random_tensor(vec![5, 1], &mut rng, -1.0, 1.0);
    let target = random_tensor(vec![5, 1], &mut rng, -1.0, 1.0);
    let (_, g) = rmse_loss(&pred, &target).unwrap();
    let num: Vec<f64> = (0..pred.len())
        .map(|i| {
            let mut p = pred.clone();
            p.data_mut()[i] += FD_STEP;
            let mut m = pred.clone();
            m.data_mut()[i] -= FD_STEP;
            (rmse_loss(&p, &target).unwrap().0 - rmse_loss(&m, &target).unwrap().0) / (2.0 * FD_STEP)
        })
        .collect();
    worst = worst.max(relative_error(g.data(), &num));
    worst
}

pub fn small_network_spec(n_classes: usize) -> NetworkSpec {
    NetworkSpec {
        input_height: 8,
        input_width: 10,
        stem: vec![ConvLayerSpec::same3(3, 1), ConvLayerSpec::same3(4, 2)],
        head: vec![ConvLayerSpec::same3(3, 1), ConvLayerSpec::same3(2, 1)],
        hidden_units: 6,
        n_classes,
        ..NetworkSpec::default()
    }
}

fn network_loss(net: &Network<f64>, x: &Tensor<f64>, target: &Tensor<f64>, onehot: &Tensor<f64>) -> f64 {
    let out = net.forward(x).unwrap();
    joint_loss(&out.value, target, &out.logits, onehot, 0.7).unwrap().total
}

/// End-to-end check of the joint loss through the whole network over a
/// sample of every parameter tensor. With `single` the analytic gradients come
/// from an `f32` copy of the network while the finite differences stay in `f64`.
pub fn check_network_precision(seed: u64, single: bool) -> f64 {
    let spec = small_network_spec(3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = build_network::<f64>(&spec, seed).unwrap();
    // Zero biases put exact zeros in front of ReLUs wherever a receptive field
    // is dead, which makes the loss non-differentiable right at the test point.
    for (name, p) in net.named_params_mut() {
        if name.ends_with("bias") {
            p.data_mut().iter_mut().for_each(|b| *b = rng.random_range(-0.1..0.1));
        }
    }
    let n = 2;
    let x = random_tensor(vec![n, 3, spec.input_height, spec.input_width], &mut rng, 0.0, 1.0);
    let target = random_tensor(vec![n, 1], &mut rng, 0.0, 1.0);
    let mut onehot = vec![0.0; n * 3];
    for row in 0..n {
        onehot[row * 3 + rng.random_range(0..3)] = 1.0;
    }
    let onehot = Tensor::new(vec![n, 3], onehot).unwrap();

    let grads: Vec<Vec<f64>> = if single {
        let mut net32 = net.cast::<f32>().unwrap();
        net32.zero_grad();
        let out = net32.forward_train(&x.cast()).unwrap();
        let loss = joint_loss(&out.value, &target.cast(), &out.logits, &onehot.cast(), 0.7).unwrap();
        net32.backward(&loss.grad_value, &loss.grad_logits).unwrap();
        net32
            .named_params()
            .into_iter()
            .map(|(_, p)| p.grad().expect("gradient accumulated").iter().map(|&g| f64::from(g)).collect())
            .collect()
    } else {
        net.zero_grad();
        let out = net.forward_train(&x).unwrap();
        let loss = joint_loss(&out.value, &target, &out.logits, &onehot, 0.7).unwrap();
        net.backward(&loss.grad_value, &loss.grad_logits).unwrap();
        net.named_params().into_iter().map(|(_, p)| p.grad().expect("gradient accumulated").to_vec()).collect()
    };

    let mut worst = 0.0f64;
    for (k, grad) in grads.iter().enumerate() {
        let idx = probe_indices(grad.len(), &mut rng);
        let (mut ana, mut num) = (Vec::new(), Vec::new());
        for &i in &idx {
            let orig = net.named_params()[k].1.data()[i];
            let fd = central_difference(|h| {
                net.named_params_mut()[k].1.data_mut()[i] = orig + h;
                let v = network_loss(&net, &x, &target, &onehot);
                net.named_params_mut()[k].1.data_mut()[i] = orig;
                v
            });
            if let Some(v) = fd {
                num.push(v);
                ana.push(grad[i]);
            }
        }
        worst = worst.max(relative_error(&ana, &num));
    }
    worst
}

pub fn check_network(seed: u64) -> f64 {
    check_network_precision(seed, false)
}

/// Every layer type plus the losses and the whole network for one seed.
pub fn gradient_report(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let mut conv = Conv2d::<f64>::he_init(ConvSpec::square(2, 3, 3, 2, 1), &mut rng).unwrap();
    let x = random_tensor(vec![2, 2, 7, 6], &mut rng, -1.0, 1.0);
    out.push(("conv2d", check_probe(&mut conv, &x, seed)));

    let mut dense = Dense::<f64>::he_init(7, 4, &mut rng).unwrap();
    let x = random_tensor(vec![3, 7], &mut rng, -1.0, 1.0);
    out.push(("dense", check_probe(&mut dense, &x, seed)));

    let mut block = ResidualBlock::<f64>::he_init(3, 3, &mut rng).unwrap();
    let x = random_tensor(vec![2, 3, 5, 5], &mut rng, -1.0, 1.0);
    out.push(("residual", check_probe(&mut block, &x, seed)));

    let mut pool = MaxPool2d::new(2);
    let x = random_tensor(vec![2, 2, 5, 6], &mut rng, -1.0, 1.0);
    out.push(("maxpool", check_probe(&mut pool, &x, seed)));

    let mut relu = Relu::new();
    let x = random_tensor(vec![3, 8], &mut rng, -1.0, 1.0);
    out.push(("relu", check_probe(&mut relu, &x, seed)));

    out.push(("losses", check_losses(seed)));
    out.push(("network", check_network(seed)));
    out
}
