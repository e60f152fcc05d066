//! A reduced groove sweep end to end: synthesize frames for all three
//! materials, train the joint depth/material network for a few epochs and
//! report validation metrics. The full sweep is `speckle-monitor synth` and
//! `train` with the default config.
//!
//! cargo run --release --example groove_training [out_dir]

use speckle_monitor::dataset::Mode;
use speckle_monitor::harness::{cmd_eval, cmd_synth, cmd_train, HarnessConfig};

fn main() -> speckle_monitor::Result<()> {
    let mut cfg = HarnessConfig::default();
    cfg.output_dir = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("speckle-groove-example"));
    cfg.groove.energies_uj = vec![22.5, 47.5];
    cfg.groove.speeds_mm_s = vec![1.5, 3.5];
    cfg.groove.repeats = 2;
    cfg.drill.enabled = false;
    cfg.train.epochs = 8;
    cfg.train.batch_size = 16;

    for info in cmd_synth(&cfg)? {
        println!("synthesized {} samples into {}", info.samples, info.path.display());
    }
    let trained = cmd_train(&cfg, Mode::Groove, None, false)?;
    println!(
        "trained {} epochs: loss {:.4} -> {:.4}",
        trained.epochs, trained.initial_train_loss, trained.final_train_loss
    );
    let (summary, _) = cmd_eval(&cfg, Mode::Groove, None, None, None)?;
    println!(
        "validation: MAE {:.3} um ({:.1}% of range), accuracy {:.3}, median margin {}",
        summary.mae,
        100.0 * summary.mae_fraction_of_range,
        summary.accuracy,
        summary.median_margin.map_or("n/a".into(), |m| format!("{m:.2}"))
    );
    Ok(())
}
