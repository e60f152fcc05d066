use super::far_field::{propagate_far_field, IntensityFrame, OpticalConfig};
use super::grid::HeightMap;
use crate::ablation::ProcessTrajectory;
use crate::{Error, Result};

/// Renders frames `0..n_frames` of a process run.
pub fn render_sequence(
    initial: &HeightMap,
    trajectory: &ProcessTrajectory,
    cfg: &OpticalConfig,
    n_frames: usize,
) -> Result<Vec<IntensityFrame>> {
    if n_frames == 0 {
        return Err(Error::Config("render_sequence needs at least one frame".into()));
    }
    let indices: Vec<usize> = (0..n_frames).collect();
    render_frames(initial, trajectory, cfg, &indices)
}

/// Renders selected frame indices. Frame `k` is a snapshot at `k * frame_interval_ms`.
///
/// The beam must stay at least two waists inside the simulated field so the
/// periodic grid never truncates it.
pub fn render_frames(
    initial: &HeightMap,
    trajectory: &ProcessTrajectory,
    cfg: &OpticalConfig,
    frames: &[usize],
) -> Result<Vec<IntensityFrame>> {
    cfg.validate()?;
    let limit = cfg.field_extent_um() / 2.0 - 2.0 * cfg.beam_waist_um;
    for &k in frames {
        let [x, y] = trajectory.beam_center(k);
        if x.abs() > limit || y.abs() > limit {
            return Err(Error::BeamOffGrid { frame: k, x_um: x, y_um: y });
        }
    }
    frames
        .iter()
        .map(|&k| {
            let surface = trajectory.surface_at(initial, k)?;
            let mut frame = propagate_far_field(&surface, cfg, trajectory.beam_center(k))?;
            frame.wall_time_ms = k as f64 * cfg.frame_interval_ms;
            Ok(frame)
        })
        .collect()
}
