//! Renders the far field of a flat mirror and of rough plates with growing
//! roughness. For each one it prints the light that reaches the detector
//! window and the speckle contrast there.
//!
//! cargo run --release --example speckle_frames

use speckle_monitor::optics::{
    propagate_far_field, speckle_contrast, synthesize_rough_surface, HeightMap, OpticalConfig, RoughnessSpec,
};

fn main() -> speckle_monitor::Result<()> {
    let cfg = OpticalConfig::default();
    let n = cfg.grid_n;
    println!(
        "grid {n}x{n} at {} um pitch, beam waist {} um, lambda {} um",
        cfg.pitch_um, cfg.beam_waist_um, cfg.wavelength_um
    );

    // A mirror sends everything back along the axis, outside the oblique window.
    let flat = propagate_far_field(&HeightMap::flat(n, n, cfg.pitch_um)?, &cfg, [0.0, 0.0])?;
    println!("flat mirror: window energy {:.3e}", flat.grid.data().iter().sum::<f64>());

    println!("{:>8} {:>10} {:>14} {:>9}", "Ra um", "corr um", "window energy", "contrast");
    for &(ra_um, corr_len_um) in &[(0.1, 4.0), (0.3, 4.0), (1.0, 4.0), (2.0, 4.0), (1.0, 12.0)] {
        let surface = synthesize_rough_surface(&RoughnessSpec { ra_um, corr_len_um, seed: 7 }, n, n, cfg.pitch_um)?;
        let frame = propagate_far_field(&surface, &cfg, [0.0, 0.0])?;
        let window: f64 = frame.grid.data().iter().sum();
        println!("{ra_um:>8.2} {corr_len_um:>10.1} {window:>14.4e} {:>9.3}", speckle_contrast(&frame)?);
    }
    Ok(())
}
