//! Central-difference check of the hand-written backward passes. For a
//! random projection `r`, the scalar `L = sum(r * f(x))` is differentiated
//! analytically and numerically with respect to the input and the weights.
//!
//! cargo run --release --example gradient_check

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use speckle_monitor::tensor::{Conv2d, ConvSpec, Dense, Tensor};

const H: f64 = 1e-6;

fn random(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    let values: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::new(shape, values).unwrap()
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn main() -> speckle_monitor::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    let mut dense = Dense::<f64>::he_init(12, 5, &mut rng)?;
    let x = random(vec![4, 12], &mut rng);
    let r = random(vec![4, 5], &mut rng);
    dense.forward_train(&x)?;
    let dx = dense.backward(&r)?;
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp.data_mut()[i] += H;
        xm.data_mut()[i] -= H;
        let numeric = (dot(&r, &dense.forward(&xp)?) - dot(&r, &dense.forward(&xm)?)) / (2.0 * H);
        worst = worst.max(rel_err(dx.data()[i], numeric));
    }
    println!("dense input gradient: worst relative error {worst:.2e}");

    let mut conv = Conv2d::<f64>::he_init(ConvSpec::square(2, 3, 3, 2, 1), &mut rng)?;
    let x = random(vec![1, 2, 7, 9], &mut rng);
    let y = conv.forward_train(&x)?;
    let r = random(y.shape().to_vec(), &mut rng);
    conv.backward(&r)?;
    let analytic = conv.params()[0].grad().expect("backward fills weight gradients").to_vec();
    let mut worst: f64 = 0.0;
    for (i, &g) in analytic.iter().enumerate() {
        let mut probe = conv.clone();
        probe.params_mut()[0].data_mut()[i] += H;
        let up = dot(&r, &probe.forward(&x)?);
        probe.params_mut()[0].data_mut()[i] -= 2.0 * H;
        let down = dot(&r, &probe.forward(&x)?);
        worst = worst.max(rel_err(g, (up - down) / (2.0 * H)));
    }
    println!("strided conv weight gradient ({} entries): worst relative error {worst:.2e}", analytic.len());
    Ok(())
}
