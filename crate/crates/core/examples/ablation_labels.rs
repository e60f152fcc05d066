//! Process-model labels: steady groove depth for each material over the
//! energy/speed sweep, crater growth under percussion drilling, and the
//! bilinear volume grid that labels drill frames.
//!
//! cargo run --example ablation_labels

use speckle_monitor::ablation::{crater_geometry, groove_depth, ProcessParams};
use speckle_monitor::harness::{volume_grid, HarnessConfig};

fn main() -> speckle_monitor::Result<()> {
    let cfg = HarnessConfig::default();

    println!("groove depth (um)");
    print!("{:>10} {:>6}", "material", "E uJ");
    for v in &cfg.groove.speeds_mm_s {
        print!(" {:>9}", format!("{v} mm/s"));
    }
    println!();
    for (id, material) in cfg.materials.iter().enumerate() {
        for &e in &cfg.groove.energies_uj {
            print!("{:>10} {e:>6.1}", material.name);
            for &v in &cfg.groove.speeds_mm_s {
                print!(" {:>9.3}", groove_depth(&ProcessParams::grooving(e, v, id), material, &cfg.process)?);
            }
            println!();
        }
    }

    let si = &cfg.drill.material;
    println!("\n{} crater at 5 uJ", si.name);
    for n in [1u32, 10, 50, 100, 200, 300] {
        let c = crater_geometry(&ProcessParams::drilling(5.0, n, 0), si, &cfg.process)?;
        println!("  N={n:>3}: depth {:.3} um, radius {:.2} um, volume {:.2} um3", c.depth_um, c.radius_um, c.volume_um3);
    }

    let grid = volume_grid(&cfg)?;
    println!("\nvolume grid: {} energies x {} pulse counts", grid.energies().len(), grid.pulse_counts().len());
    for &(e, n) in &[(1.0, 50.0), (3.3, 120.0), (7.25, 222.5), (10.0, 300.0)] {
        println!("  V({e} uJ, {n} pulses) = {:.3} um3", grid.interpolate(e, n)?);
    }
    Ok(())
}
