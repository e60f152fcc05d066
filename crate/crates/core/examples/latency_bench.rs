//! Single-triplet inference latency of the default network, the way the
//! `bench` subcommand measures it, plus a small batch for comparison.
//!
//! cargo run --release --example latency_bench

use std::time::Instant;

use speckle_monitor::dataset::NetInput;
use speckle_monitor::harness::HarnessConfig;
use speckle_monitor::net::{bench_latency, build_network, predict_batch};

fn main() -> speckle_monitor::Result<()> {
    let cfg = HarnessConfig::default();
    let network = build_network::<f32>(&cfg.network, cfg.seed)?;
    let (h, w) = (cfg.detector.crop_height, cfg.detector.frame_width());
    let data: Vec<f32> = (0..3 * h * w).map(|i| ((i * 7919) % 1000) as f32 / 1000.0).collect();
    let input = NetInput::from_raw(h, w, data)?;

    let stats = bench_latency(&network, &input, cfg.bench.iterations, cfg.bench.warmup)?;
    println!("{} parameters on {}", network.parameter_count(), stats.hardware);
    println!(
        "single input: mean {:.2} ms, p50 {:.2} ms, p95 {:.2} ms ({} runs)",
        stats.mean_ms, stats.p50_ms, stats.p95_ms, stats.iterations
    );

    let batch: Vec<&NetInput> = std::iter::repeat_n(&input, 32).collect();
    let t = Instant::now();
    predict_batch(&network, &batch, 1.0)?;
    println!("batch of 32: {:.2} ms per input", t.elapsed().as_secs_f64() * 1e3 / 32.0);
    Ok(())
}
