//! Percussion drilling: frames from craters of random energy and pulse
//! count, labelled with interpolated removed volume, and a network that
//! regresses that volume.
//!
//! cargo run --release --example drill_volume [out_dir]

use speckle_monitor::dataset::Mode;
use speckle_monitor::harness::{cmd_eval, cmd_synth, cmd_train, HarnessConfig};

fn main() -> speckle_monitor::Result<()> {
    let mut cfg = HarnessConfig::default();
    cfg.output_dir = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("speckle-drill-example"));
    cfg.groove.enabled = false;
    cfg.drill.runs = 40;
    cfg.train.epochs = 20;
    cfg.train.batch_size = 16;

    let info = cmd_synth(&cfg)?;
    println!("{} drill samples from {} runs", info[0].samples, info[0].runs);
    cmd_train(&cfg, Mode::Drill, None, false)?;
    let (summary, report) = cmd_eval(&cfg, Mode::Drill, None, None, None)?;
    println!(
        "validation: MAE {:.2} um3, R2 {}",
        summary.mae,
        summary.r2.map_or("n/a".into(), |r| format!("{r:.3}"))
    );
    for rec in report.records.iter().take(5) {
        println!("  true {:8.2} um3  predicted {:8.2} um3", rec.true_value, rec.pred_value);
    }
    Ok(())
}
