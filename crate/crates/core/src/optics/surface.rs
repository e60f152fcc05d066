use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::fft2;
use super::grid::{Grid2D, HeightMap};
use crate::{Error, Result};

const MIN_GRID_PX: usize = 64;
const MIN_PX_PER_CORR_LEN: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoughnessSpec {
    /// Target Ra: mean absolute deviation of height, µm.
    pub ra_um: f64,
    /// 1/e half-width of the Gaussian height autocorrelation, µm.
    pub corr_len_um: f64,
    pub seed: u64,
}

/// Stationary Gaussian random height field with autocorrelation
/// `exp(-r^2 / corr_len^2)`, mean-subtracted and scaled to the requested Ra.
///
/// White noise is filtered in the frequency domain by the transform of
/// `exp(-2 r^2 / corr_len^2)`, whose self-convolution gives the target
/// autocorrelation. The field is periodic on the grid.
pub fn synthesize_rough_surface(
    spec: &RoughnessSpec,
    width_px: usize,
    height_px: usize,
    pitch_um: f64,
) -> Result<HeightMap> {
    if !(spec.ra_um.is_finite() && spec.ra_um >= 0.0) {
        return Err(Error::Config(format!("ra_um must be nonnegative, got {}", spec.ra_um)));
    }
    if !(spec.corr_len_um.is_finite() && spec.corr_len_um > 0.0) {
        return Err(Error::Config(format!(
            "corr_len_um must be positive, got {}",
            spec.corr_len_um
        )));
    }
    if width_px < MIN_GRID_PX || height_px < MIN_GRID_PX {
        return Err(Error::Geometry(format!(
            "rough surface needs at least {MIN_GRID_PX}x{MIN_GRID_PX} pixels, got {width_px}x{height_px}"
        )));
    }
    let px_per_corr = spec.corr_len_um / pitch_um;
    if px_per_corr < MIN_PX_PER_CORR_LEN {
        return Err(Error::Geometry(format!(
            "correlation length {} µm spans {px_per_corr:.2} px at pitch {pitch_um} µm; need >= {MIN_PX_PER_CORR_LEN}",
            spec.corr_len_um
        )));
    }
    if spec.ra_um == 0.0 {
        return HeightMap::flat(width_px, height_px, pitch_um);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut field: Vec<Complex64> = (0..width_px * height_px)
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), 0.0))
        .collect();

    fft2(&mut field, width_px, height_px, false);
    let filter_coeff = std::f64::consts::PI.powi(2) * spec.corr_len_um.powi(2) / 2.0;
    let fx = frequencies(width_px, pitch_um);
    let fy = frequencies(height_px, pitch_um);
    for (row, fy) in fy.iter().enumerate() {
        for (col, fx) in fx.iter().enumerate() {
            field[row * width_px + col] *= (-filter_coeff * (fx * fx + fy * fy)).exp();
        }
    }
    fft2(&mut field, width_px, height_px, true);

    let mut heights: Vec<f64> = field.iter().map(|c| c.re).collect();
    let mean = heights.iter().sum::<f64>() / heights.len() as f64;
    heights.iter_mut().for_each(|h| *h -= mean);
    let mad = heights.iter().map(|h| h.abs()).sum::<f64>() / heights.len() as f64;
    let scale = spec.ra_um / mad;
    heights.iter_mut().for_each(|h| *h *= scale);

    Ok(HeightMap { grid: Grid2D::new(width_px, height_px, pitch_um, heights)? })
}

/// Quasi-periodic ripple field: fringes of period `period_um` with wave
/// vector along x, their phase wandering by a smooth Gaussian field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RippleSpec {
    pub period_um: f64,
    /// Correlation length of the phase wander.
    pub jitter_corr_len_um: f64,
    /// Standard deviation of the phase wander, radians.
    pub jitter_rad: f64,
    pub seed: u64,
}

/// Unit-Ra ripple texture `cos(2π x / period + φ0 + jitter(x, y))`.
pub fn synthesize_ripple_texture(
    spec: &RippleSpec,
    width_px: usize,
    height_px: usize,
    pitch_um: f64,
) -> Result<HeightMap> {
    if !(spec.period_um.is_finite() && spec.period_um >= 2.0 * pitch_um) {
        return Err(Error::Geometry(format!(
            "ripple period {} µm must be at least two pixels at pitch {pitch_um} µm",
            spec.period_um
        )));
    }
    if !(spec.jitter_rad.is_finite() && spec.jitter_rad >= 0.0) {
        return Err(Error::Config(format!("jitter_rad must be nonnegative, got {}", spec.jitter_rad)));
    }
    // Ra of a unit-variance Gaussian is sqrt(2 / pi).
    let wander = RoughnessSpec {
        ra_um: spec.jitter_rad * (2.0 / std::f64::consts::PI).sqrt(),
        corr_len_um: spec.jitter_corr_len_um,
        seed: spec.seed,
    };
    let wander = synthesize_rough_surface(&wander, width_px, height_px, pitch_um)?;
    let phase0 = std::f64::consts::TAU * (splitmix_unit(spec.seed));
    let k = std::f64::consts::TAU / spec.period_um;
    let mut grid = wander.grid.map_xy(|x, _, w| (k * x + phase0 + w).cos());
    let mad = grid.data().iter().map(|v| v.abs()).sum::<f64>() / grid.data().len() as f64;
    if mad > 0.0 {
        grid = grid.map_xy(|_, _, v| v / mad);
    }
    Ok(HeightMap { grid })
}

fn splitmix_unit(seed: u64) -> f64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64
}

/// FFT-ordered spatial frequencies (cycles/µm) for an axis of `n` samples.
fn frequencies(n: usize, pitch_um: f64) -> Vec<f64> {
    let df = 1.0 / (n as f64 * pitch_um);
    (0..n)
        .map(|k| if k <= n / 2 { k as f64 * df } else { (k as f64 - n as f64) * df })
        .collect()
}

/// Material removal (µm, >= 0) of a Gaussian-section groove running along x.
///
/// The cross-section is `depth * exp(-8 (y - offset)^2 / width^2)` (1/e^2 full
/// width `width_um`). Between `x_start` and `x_end` the trench is uniform;
/// beyond either end it closes with the same Gaussian falloff.
pub fn groove_profile(
    grid: &Grid2D,
    depth_um: f64,
    width_um: f64,
    axis_offset_um: f64,
    x_start_um: f64,
    x_end_um: f64,
) -> Result<Grid2D> {
    if !(depth_um.is_finite() && depth_um >= 0.0) {
        return Err(Error::Config(format!("groove depth must be nonnegative, got {depth_um}")));
    }
    if !(width_um.is_finite() && width_um >= 2.0 * grid.pitch()) {
        return Err(Error::Geometry(format!(
            "groove width {width_um} µm must be at least two pixels ({} µm)",
            2.0 * grid.pitch()
        )));
    }
    let k = 8.0 / (width_um * width_um);
    Ok(grid.map_xy(|x, y, _| {
        let dy = y - axis_offset_um;
        let dx = if x < x_start_um {
            x_start_um - x
        } else if x > x_end_um {
            x - x_end_um
        } else {
            0.0
        };
        depth_um * (-k * (dy * dy + dx * dx)).exp()
    }))
}

/// Material removal (µm) of a radially symmetric crater
/// `depth * exp(-2 r^2 / radius^2)`; removed volume is `depth * pi * radius^2 / 2`.
pub fn crater_profile(
    grid: &Grid2D,
    depth_um: f64,
    radius_um: f64,
    center_um: [f64; 2],
) -> Result<Grid2D> {
    if !(depth_um.is_finite() && depth_um >= 0.0) {
        return Err(Error::Config(format!("crater depth must be nonnegative, got {depth_um}")));
    }
    if !(radius_um.is_finite() && radius_um >= grid.pitch()) {
        return Err(Error::Geometry(format!(
            "crater radius {radius_um} µm must be at least one pixel ({} µm)",
            grid.pitch()
        )));
    }
    let k = 2.0 / (radius_um * radius_um);
    Ok(grid.map_xy(|x, y, _| {
        let (dx, dy) = (x - center_um[0], y - center_um[1]);
        depth_um * (-k * (dx * dx + dy * dy)).exp()
    }))
}

fn subtract(surface: &HeightMap, removal: &Grid2D) -> HeightMap {
    let data = surface.grid.data().iter().zip(removal.data()).map(|(h, r)| h - r).collect();
    HeightMap {
        grid: Grid2D::new(surface.grid.width(), surface.grid.height(), surface.grid.pitch(), data)
            .expect("same geometry, finite values"),
    }
}

/// Full-length groove along the scan axis, centered `axis_offset_um` from the grid center.
pub fn carve_groove(
    surface: &HeightMap,
    depth_um: f64,
    width_um: f64,
    axis_offset_um: f64,
) -> Result<HeightMap> {
    carve_groove_segment(
        surface,
        depth_um,
        width_um,
        axis_offset_um,
        f64::NEG_INFINITY,
        f64::INFINITY,
    )
}

/// Groove that only exists between `x_start_um` and `x_end_um` (rounded ends).
pub fn carve_groove_segment(
    surface: &HeightMap,
    depth_um: f64,
    width_um: f64,
    axis_offset_um: f64,
    x_start_um: f64,
    x_end_um: f64,
) -> Result<HeightMap> {
    let removal =
        groove_profile(&surface.grid, depth_um, width_um, axis_offset_um, x_start_um, x_end_um)?;
    Ok(subtract(surface, &removal))
}

pub fn carve_crater(
    surface: &HeightMap,
    depth_um: f64,
    radius_um: f64,
    center_um: [f64; 2],
) -> Result<HeightMap> {
    let removal = crater_profile(&surface.grid, depth_um, radius_um, center_um)?;
    Ok(subtract(surface, &removal))
}
