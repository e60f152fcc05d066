use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::optics::{IntensityFrame, OpticalConfig};
use crate::{Error, Result};

/// Plain row-major image (`height` rows of `width` pixels).
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Shape(format!(
                "image data has {} values, expected {width}x{height}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Resamples the detector window onto a `raw_width x raw_height` camera raster.
///
/// Columns span `sin θmin / λ .. sin θmax / λ` left to right, rows span the
/// vertical half-angle symmetrically. Values are bilinear in the frame's
/// frequency samples.
pub fn detector_readout(
    frame: &IntensityFrame,
    cfg: &OpticalConfig,
    raw_width: usize,
    raw_height: usize,
) -> Result<Image> {
    if raw_width == 0 || raw_height == 0 {
        return Err(Error::Config("detector raster must be nonempty".into()));
    }
    let df = frame.grid.pitch();
    let (w, h) = (frame.grid.width(), frame.grid.height());
    let axis = |n_out: usize, lo: f64, hi: f64, origin: f64, n_in: usize| -> Vec<(usize, usize, f64)> {
        (0..n_out)
            .map(|i| {
                let f = lo + (i as f64 + 0.5) / n_out as f64 * (hi - lo);
                let pos = ((f - origin) / df).clamp(0.0, (n_in - 1) as f64);
                let i0 = (pos.floor() as usize).min(n_in.saturating_sub(2));
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, pos - i0 as f64)
            })
            .collect()
    };
    let cols = axis(raw_width, cfg.fx_min(), cfg.fx_max(), frame.fx0, w);
    let rows = axis(raw_height, -cfg.fy_half(), cfg.fy_half(), frame.fy0, h);
    let src = frame.grid.data();
    let mut data = Vec::with_capacity(raw_width * raw_height);
    for &(r0, r1, tr) in &rows {
        let (line0, line1) = (&src[r0 * w..(r0 + 1) * w], &src[r1 * w..(r1 + 1) * w]);
        for &(c0, c1, tc) in &cols {
            let top = line0[c0] * (1.0 - tc) + line0[c1] * tc;
            let bottom = line1[c0] * (1.0 - tc) + line1[c1] * tc;
            data.push(top * (1.0 - tr) + bottom * tr);
        }
    }
    Image::new(raw_width, raw_height, data)
}

/// Additive Gaussian read noise with standard deviation `relative_std * mean`,
/// clipped at zero.
pub fn add_detector_noise(image: &Image, relative_std: f64, seed: u64) -> Image {
    if relative_std <= 0.0 {
        return image.clone();
    }
    let sigma = relative_std * image.mean();
    let Ok(normal) = Normal::new(0.0, sigma) else {
        return image.clone();
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = image.data.iter().map(|v| (v + normal.sample(&mut rng)).max(0.0)).collect();
    Image { data, ..*image }
}

/// Non-overlapping `factor x factor` box means, then a centered crop to `target_height` rows.
pub fn downsample_box(raw: &Image, factor: usize, target_height: usize) -> Result<Image> {
    if factor == 0 {
        return Err(Error::Config("box factor must be positive".into()));
    }
    if raw.width % factor != 0 {
        return Err(Error::Shape(format!(
            "width {} is not divisible by box factor {factor}",
            raw.width
        )));
    }
    if raw.height % factor != 0 {
        return Err(Error::Shape(format!(
            "height {} is not divisible by box factor {factor}",
            raw.height
        )));
    }
    let (out_w, full_h) = (raw.width / factor, raw.height / factor);
    if full_h < target_height {
        return Err(Error::Shape(format!(
            "height {} / {factor} = {full_h} rows is fewer than the target {target_height}",
            raw.height
        )));
    }
    let first_row = (full_h - target_height) / 2;
    let norm = 1.0 / (factor * factor) as f64;
    let mut data = vec![0.0; out_w * target_height];
    for out_r in 0..target_height {
        let r_base = (first_row + out_r) * factor;
        let acc = &mut data[out_r * out_w..(out_r + 1) * out_w];
        for r in r_base..r_base + factor {
            let line = &raw.data[r * raw.width..(r + 1) * raw.width];
            for (c, a) in acc.iter_mut().enumerate() {
                *a += line[c * factor..(c + 1) * factor].iter().sum::<f64>();
            }
        }
        acc.iter_mut().for_each(|a| *a *= norm);
    }
    Image::new(out_w, target_height, data)
}

/// Min-max normalization to `[0, 1]`; a constant image maps to zeros.
pub fn normalize01(image: &Image) -> Image {
    let (min, max) = image
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = max - min;
    let data = if range > 0.0 && range.is_finite() {
        image.data.iter().map(|v| ((v - min) / range).clamp(0.0, 1.0)).collect()
    } else {
        vec![0.0; image.data.len()]
    };
    Image { data, ..*image }
}
