use super::preprocess::Image;
use crate::{Error, Result};

pub const FRAMES_PER_INPUT: usize = 3;

/// Three consecutive normalized frames, stored channel-major as `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetInput {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl NetInput {
    pub fn from_frames(frames: [&Image; FRAMES_PER_INPUT]) -> Result<Self> {
        let (width, height) = (frames[0].width, frames[0].height);
        if frames.iter().any(|f| f.width != width || f.height != height) {
            return Err(Error::Shape("triplet frames differ in size".into()));
        }
        let data: Vec<f32> = frames.iter().flat_map(|f| f.data.iter().map(|&v| v as f32)).collect();
        Self::from_raw(height, width, data)
    }

    /// Wraps `3 * height * width` values; every value must lie in `[0, 1]`.
    pub fn from_raw(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != FRAMES_PER_INPUT * height * width {
            return Err(Error::Shape(format!(
                "net input has {} values, expected 3x{height}x{width}",
                data.len()
            )));
        }
        if let Some((index, &value)) =
            data.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::InputRange { index, value });
        }
        Ok(Self { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub run_id: u32,
    pub input: NetInput,
    /// Depth (µm) or volume (µm³) at the triplet's last frame.
    pub target_value: f32,
    pub material_onehot: Vec<f32>,
}

impl LabeledSample {
    pub fn material(&self) -> usize {
        self.material_onehot.iter().position(|&v| v == 1.0).unwrap_or(0)
    }
}

pub fn one_hot(class: usize, n_classes: usize) -> Result<Vec<f32>> {
    if class >= n_classes {
        return Err(Error::Config(format!("class {class} out of range for {n_classes} classes")));
    }
    let mut v = vec![0.0; n_classes];
    v[class] = 1.0;
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletOptions {
    pub idle_frames: usize,
    pub stride: usize,
    /// Maximum triplets taken from one run.
    pub cap: Option<usize>,
}

impl Default for TripletOptions {
    fn default() -> Self {
        Self { idle_frames: 9, stride: 1, cap: Some(10) }
    }
}

/// Sliding windows of three consecutive processed frames.
///
/// Windows may not start before `idle_frames`. Each sample carries the label
/// of its last frame. Too few frames yields an empty list.
pub fn assemble_triplets(
    frames: &[Image],
    labels: &[f64],
    opts: &TripletOptions,
    run_id: u32,
    material_onehot: &[f32],
) -> Result<Vec<LabeledSample>> {
    if frames.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} frames but {} labels",
            frames.len(),
            labels.len()
        )));
    }
    if opts.stride == 0 {
        return Err(Error::Config("triplet stride must be positive".into()));
    }
    if frames.len() < opts.idle_frames + FRAMES_PER_INPUT {
        log::warn!(
            "run {run_id}: {} frames cannot hold a triplet after {} idle frames",
            frames.len(),
            opts.idle_frames
        );
        return Ok(Vec::new());
    }
    let starts = (opts.idle_frames..=frames.len() - FRAMES_PER_INPUT).step_by(opts.stride);
    let cap = opts.cap.unwrap_or(usize::MAX);
    starts
        .take(cap)
        .map(|s| {
            let last = s + FRAMES_PER_INPUT - 1;
            let target = labels[last];
            if !(target.is_finite() && target >= 0.0) {
                return Err(Error::Config(format!("run {run_id}: bad label {target} at frame {last}")));
            }
            Ok(LabeledSample {
                run_id,
                input: NetInput::from_frames([&frames[s], &frames[s + 1], &frames[s + 2]])?,
                target_value: target as f32,
                material_onehot: material_onehot.to_vec(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames(n: usize) -> (Vec<Image>, Vec<f64>) {
        let f = (0..n).map(|k| Image::filled(4, 2, k as f64 / n as f64)).collect();
        let l = (0..n).map(|k| k as f64).collect();
        (f, l)
    }

    fn opts(idle: usize, stride: usize, cap: Option<usize>) -> TripletOptions {
        TripletOptions { idle_frames: idle, stride, cap }
    }

    #[test]
    fn twelve_frames_one_triplet() {
        let (f, l) = frames(12);
        let s = assemble_triplets(&f, &l, &opts(9, 1, Some(10)), 0, &[1.0, 0.0]).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].target_value, 11.0);
        assert_eq!(s[0].input.data()[0], (9.0 / 12.0) as f32);
    }

    #[test]
    fn cap_limits_per_run() {
        let (f, l) = frames(21);
        let s = assemble_triplets(&f, &l, &opts(9, 1, Some(10)), 0, &[1.0]).unwrap();
        assert_eq!(s.len(), 10);
    }

    #[test]
    fn stride_three_gives_disjoint_windows() {
        let (f, l) = frames(18 + 9);
        let s = assemble_triplets(&f, &l, &opts(9, 3, None), 0, &[1.0]).unwrap();
        assert_eq!(s.len(), 6);
        let lasts: Vec<f32> = s.iter().map(|x| x.target_value).collect();
        assert_eq!(lasts, vec![11.0, 14.0, 17.0, 20.0, 23.0, 26.0]);
    }

    #[test]
    fn too_few_frames_is_empty() {
        let (f, l) = frames(10);
        assert!(assemble_triplets(&f, &l, &opts(9, 1, None), 0, &[1.0]).unwrap().is_empty());
    }

    #[test]
    fn rejects_out_of_range_input() {
        let err = NetInput::from_raw(1, 1, vec![0.0, 1.5, 0.2]).unwrap_err();
        assert!(matches!(err, Error::InputRange { index: 1, .. }));
    }

    #[test]
    fn one_hot_has_single_unit() {
        let v = one_hot(2, 3).unwrap();
        assert_eq!(v, vec![0.0, 0.0, 1.0]);
        assert!(one_hot(3, 3).is_err());
    }
}
