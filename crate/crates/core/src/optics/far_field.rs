use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::{fft2, fftshift};
use super::grid::{Grid2D, HeightMap};
use crate::{Error, Result};

/// Probe-beam and detector geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpticalConfig {
    pub wavelength_um: f64,
    /// 1/e^2 intensity radius of the probe spot on the target.
    pub beam_waist_um: f64,
    /// Simulation grid is `grid_n x grid_n`.
    pub grid_n: usize,
    pub pitch_um: f64,
    /// Diffraction angle at the left detector edge.
    pub theta_min_deg: f64,
    /// Diffraction angle at the right detector edge.
    pub theta_max_deg: f64,
    /// Half-angle the detector covers perpendicular to the scan plane.
    pub vertical_half_angle_deg: f64,
    pub frame_interval_ms: f64,
}

impl Default for OpticalConfig {
    fn default() -> Self {
        Self {
            wavelength_um: 0.633,
            beam_waist_um: 10.0,
            grid_n: 512,
            pitch_um: 0.25,
            theta_min_deg: 30.0,
            theta_max_deg: 60.0,
            vertical_half_angle_deg: 5.0,
            frame_interval_ms: 1.0,
        }
    }
}

impl OpticalConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("wavelength_um", self.wavelength_um),
            ("beam_waist_um", self.beam_waist_um),
            ("pitch_um", self.pitch_um),
            ("frame_interval_ms", self.frame_interval_ms),
            ("vertical_half_angle_deg", self.vertical_half_angle_deg),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("optics.{name} must be positive, got {v}")));
            }
        }
        if self.grid_n < 2 || self.grid_n % 2 != 0 {
            return Err(Error::Config(format!(
                "optics.grid_n must be even and >= 2, got {}",
                self.grid_n
            )));
        }
        if !(0.0 <= self.theta_min_deg
            && self.theta_min_deg < self.theta_max_deg
            && self.theta_max_deg < 90.0)
        {
            return Err(Error::Config(format!(
                "optics angular window must satisfy 0 <= {} < {} < 90",
                self.theta_min_deg, self.theta_max_deg
            )));
        }
        let nyquist = 1.0 / (2.0 * self.pitch_um);
        if self.fx_max() > nyquist {
            return Err(Error::Config(format!(
                "detector edge sin({})/λ = {:.4} /µm exceeds grid Nyquist {:.4} /µm",
                self.theta_max_deg,
                self.fx_max(),
                nyquist
            )));
        }
        if self.fy_half() > nyquist {
            return Err(Error::Config(format!(
                "vertical window {:.4} /µm exceeds grid Nyquist {nyquist:.4} /µm",
                self.fy_half()
            )));
        }
        Ok(())
    }

    pub fn fx_min(&self) -> f64 {
        self.theta_min_deg.to_radians().sin() / self.wavelength_um
    }

    pub fn fx_max(&self) -> f64 {
        self.theta_max_deg.to_radians().sin() / self.wavelength_um
    }

    pub fn fy_half(&self) -> f64 {
        self.vertical_half_angle_deg.to_radians().sin() / self.wavelength_um
    }

    /// Frequency-plane sample spacing, cycles/µm.
    pub fn df(&self) -> f64 {
        1.0 / (self.grid_n as f64 * self.pitch_um)
    }

    pub fn field_extent_um(&self) -> f64 {
        self.grid_n as f64 * self.pitch_um
    }
}

/// Detector-plane intensity on a spatial-frequency raster.
///
/// Column `c` is at `fx = fx0 + c * df`, row `r` at `fy = fy0 + r * df`
/// (`df` is stored as the grid pitch, in cycles/µm).
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityFrame {
    pub grid: Grid2D,
    pub fx0: f64,
    pub fy0: f64,
    pub wall_time_ms: f64,
}

/// `exp(-r^2 / w0^2) * exp(i 4π h / λ)`: Gaussian probe times the reflection phase.
pub fn aperture_field(
    surface: &HeightMap,
    cfg: &OpticalConfig,
    beam_center_um: [f64; 2],
) -> Result<Vec<Complex64>> {
    let g = &surface.grid;
    if g.width() != cfg.grid_n || g.height() != cfg.grid_n || g.pitch() != cfg.pitch_um {
        return Err(Error::Geometry(format!(
            "surface grid {}x{} @ {} µm does not match optics grid {n}x{n} @ {} µm",
            g.width(),
            g.height(),
            g.pitch(),
            cfg.pitch_um,
            n = cfg.grid_n
        )));
    }
    let inv_w2 = 1.0 / (cfg.beam_waist_um * cfg.beam_waist_um);
    let k = 4.0 * PI / cfg.wavelength_um;
    let mut field = Vec::with_capacity(g.data().len());
    for row in 0..g.height() {
        let dy = g.y_of(row) - beam_center_um[1];
        for col in 0..g.width() {
            let dx = g.x_of(col) - beam_center_um[0];
            let amp = (-(dx * dx + dy * dy) * inv_w2).exp();
            field.push(Complex64::from_polar(amp, k * g.get(row, col)));
        }
    }
    Ok(field)
}

/// Unitary far-field intensity of an `n x n` aperture field, zero frequency at index `n/2`.
///
/// With the unitary scaling, total far-field energy equals total aperture energy.
pub fn far_field_intensity(field: &[Complex64], n: usize) -> Vec<f64> {
    let mut spectrum = field.to_vec();
    fft2(&mut spectrum, n, n, false);
    let scale = 1.0 / (n * n) as f64;
    let intensity: Vec<f64> = spectrum.iter().map(|a| a.norm_sqr() * scale).collect();
    fftshift(&intensity, n, n)
}

/// Speckle frame seen by the detector: the far field restricted to
/// `fx ∈ [sin θmin / λ, sin θmax / λ]` over the full `fy` range.
pub fn propagate_far_field(
    surface: &HeightMap,
    cfg: &OpticalConfig,
    beam_center_um: [f64; 2],
) -> Result<IntensityFrame> {
    cfg.validate()?;
    let n = cfg.grid_n;
    let field = aperture_field(surface, cfg, beam_center_um)?;
    let full = far_field_intensity(&field, n);

    let df = cfg.df();
    let half = (n / 2) as i64;
    let k_lo = (cfg.fx_min() / df).ceil() as i64;
    let k_hi = (cfg.fx_max() / df).floor() as i64;
    if k_hi >= half || k_hi < k_lo {
        return Err(Error::Config("angular window does not fit the frequency grid".into()));
    }
    let (c_lo, c_hi) = ((k_lo + half) as usize, (k_hi + half) as usize);
    let width = c_hi - c_lo + 1;
    let mut data = Vec::with_capacity(width * n);
    for row in 0..n {
        data.extend_from_slice(&full[row * n + c_lo..=row * n + c_hi]);
    }
    Ok(IntensityFrame {
        grid: Grid2D::new(width, n, df, data)?,
        fx0: k_lo as f64 * df,
        fy0: -(half as f64) * df,
        wall_time_ms: 0.0,
    })
}

/// Population standard deviation over mean of the frame's pixels.
pub fn speckle_contrast(frame: &IntensityFrame) -> Result<f64> {
    contrast_of(frame.grid.data())
}

pub(crate) fn contrast_of(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::UndefinedStatistic("contrast of an empty frame"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return Err(Error::UndefinedStatistic("contrast with zero mean intensity"));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt() / mean)
}
