use crate::{Error, Result};

/// Row-major real field on a uniform square-pixel grid.
///
/// Columns run along x (the scan axis), rows along y. Pixel `(row, col)`
/// sits at `x = (col - width/2) * pitch`, `y = (row - height/2) * pitch`, so
/// index `n/2` is the origin, matching the FFT centering used by the optics.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    width_px: usize,
    height_px: usize,
    pitch_um: f64,
    data: Vec<f64>,
}

impl Grid2D {
    pub fn new(width_px: usize, height_px: usize, pitch_um: f64, data: Vec<f64>) -> Result<Self> {
        if width_px == 0 || height_px == 0 {
            return Err(Error::Geometry(format!(
                "grid dimensions must be positive, got {width_px}x{height_px}"
            )));
        }
        if !(pitch_um.is_finite() && pitch_um > 0.0) {
            return Err(Error::Geometry(format!("pitch must be positive, got {pitch_um}")));
        }
        if data.len() != width_px * height_px {
            return Err(Error::Geometry(format!(
                "data length {} does not match {width_px}x{height_px}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Geometry(format!("non-finite value at index {i}")));
        }
        Ok(Self { width_px, height_px, pitch_um, data })
    }

    pub fn zeros(width_px: usize, height_px: usize, pitch_um: f64) -> Result<Self> {
        Self::new(width_px, height_px, pitch_um, vec![0.0; width_px * height_px])
    }

    pub fn width(&self) -> usize {
        self.width_px
    }

    pub fn height(&self) -> usize {
        self.height_px
    }

    pub fn pitch(&self) -> f64 {
        self.pitch_um
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width_px + col]
    }

    /// Physical x coordinate (µm) of a column center.
    pub fn x_of(&self, col: usize) -> f64 {
        (col as f64 - (self.width_px / 2) as f64) * self.pitch_um
    }

    /// Physical y coordinate (µm) of a row center.
    pub fn y_of(&self, row: usize) -> f64 {
        (row as f64 - (self.height_px / 2) as f64) * self.pitch_um
    }

    pub fn same_geometry(&self, other: &Grid2D) -> bool {
        self.width_px == other.width_px
            && self.height_px == other.height_px
            && self.pitch_um == other.pitch_um
    }

    /// Applies `f(x_um, y_um, value)` to every pixel. The result must stay finite.
    pub(crate) fn map_xy(&self, mut f: impl FnMut(f64, f64, f64) -> f64) -> Grid2D {
        let mut data = Vec::with_capacity(self.data.len());
        for row in 0..self.height_px {
            let y = self.y_of(row);
            for col in 0..self.width_px {
                data.push(f(self.x_of(col), y, self.data[row * self.width_px + col]));
            }
        }
        Grid2D { data, ..*self }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Surface height in µm; positive is above the nominal plane.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightMap {
    pub grid: Grid2D,
}

impl HeightMap {
    pub fn flat(width_px: usize, height_px: usize, pitch_um: f64) -> Result<Self> {
        Ok(Self { grid: Grid2D::zeros(width_px, height_px, pitch_um)? })
    }

    /// Mean absolute deviation from the sample mean (the Ra statistic).
    pub fn ra(&self) -> f64 {
        let mean = self.grid.mean();
        self.grid.data().iter().map(|h| (h - mean).abs()).sum::<f64>()
            / self.grid.data().len() as f64
    }

    pub fn offset(&self, c: f64) -> HeightMap {
        HeightMap { grid: self.grid.map_xy(|_, _, h| h + c) }
    }
}
