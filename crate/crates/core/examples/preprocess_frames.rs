//! One speckle frame through the camera model: raw 4080x480 readout, read
//! noise, 16x box average down to 255x25, min-max scaling. Three such frames
//! form one network input.
//!
//! cargo run --release --example preprocess_frames

use speckle_monitor::dataset::{add_detector_noise, detector_readout, downsample_box, normalize01, Image, NetInput};
use speckle_monitor::harness::HarnessConfig;
use speckle_monitor::optics::{propagate_far_field, synthesize_rough_surface, RoughnessSpec};

fn describe(label: &str, im: &Image) {
    let (lo, hi) = im.data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    println!("{label:>12}: {}x{}  min {lo:.3e}  max {hi:.3e}  mean {:.3e}", im.width, im.height, im.mean());
}

fn main() -> speckle_monitor::Result<()> {
    let cfg = HarnessConfig::default();
    let (optics, det) = (&cfg.optics, &cfg.detector);
    let mut frames = Vec::new();
    for seed in 0..3 {
        let spec = RoughnessSpec { ra_um: 0.05, corr_len_um: 4.0, seed };
        let plate = synthesize_rough_surface(&spec, optics.grid_n, optics.grid_n, optics.pitch_um)?;
        let far = propagate_far_field(&plate, optics, [0.0, 0.0])?;

        let raw = detector_readout(&far, optics, det.raw_width, det.raw_height)?;
        let noisy = add_detector_noise(&raw, det.noise_rel_std, 100 + seed);
        let small = downsample_box(&noisy, det.box_factor, det.crop_height)?;
        let scaled = normalize01(&small);
        if seed == 0 {
            describe("raw", &raw);
            describe("noisy", &noisy);
            describe("downsampled", &small);
            describe("normalized", &scaled);
        }
        frames.push(scaled);
    }
    let input = NetInput::from_frames([&frames[0], &frames[1], &frames[2]])?;
    println!("network input: 3 x {} x {} = {} values", det.crop_height, det.frame_width(), input.data().len());
    Ok(())
}
