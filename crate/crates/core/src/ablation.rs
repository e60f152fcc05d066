//! Process parameters to ablated geometry and ground-truth labels.
//!
//! Depth follows a logarithmic fluence law per pulse, `δ · ln(E / E_th)`,
//! multiplied by the number of pulses that land on a point: `N` for
//! percussion drilling, `spot · f_rep / v` for a scanned groove.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::optics::{
    carve_crater, carve_groove_segment, crater_profile, groove_profile, Grid2D, HeightMap,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialSpec {
    pub name: String,
    /// Ablation depth per pulse at `E = e * E_th` (the `δ` of the fluence law), µm.
    pub depth_per_pulse_um: f64,
    pub threshold_energy_uj: f64,
    /// Ra of the unprocessed plate.
    pub ra_um: f64,
    /// Height autocorrelation length of the unprocessed plate.
    pub corr_len_um: f64,
    /// Period of the ripples left on the processed floor.
    pub ripple_period_um: f64,
    /// Correlation length of the ripple phase wander.
    pub texture_corr_len_um: f64,
    /// Groove-floor texture amplitude per µm of local removal.
    pub texture_gain: f64,
}

impl MaterialSpec {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("depth_per_pulse_um", self.depth_per_pulse_um, false),
            ("threshold_energy_uj", self.threshold_energy_uj, false),
            ("ra_um", self.ra_um, true),
            ("corr_len_um", self.corr_len_um, false),
            ("ripple_period_um", self.ripple_period_um, false),
            ("texture_corr_len_um", self.texture_corr_len_um, false),
            ("texture_gain", self.texture_gain, true),
        ];
        for (field, v, zero_ok) in checks {
            if !v.is_finite() || v < 0.0 || (!zero_ok && v == 0.0) {
                return Err(Error::Config(format!("material `{}`: bad {field} = {v}", self.name)));
            }
        }
        Ok(())
    }

    pub fn aluminum() -> Self {
        Self {
            name: "Al".into(),
            depth_per_pulse_um: 0.1,
            threshold_energy_uj: 5.0,
            ra_um: 1.0,
            corr_len_um: 4.0,
            ripple_period_um: 0.75,
            texture_corr_len_um: 1.5,
            texture_gain: 0.013,
        }
    }

    pub fn copper() -> Self {
        Self {
            name: "Cu".into(),
            depth_per_pulse_um: 0.08,
            threshold_energy_uj: 7.0,
            ra_um: 1.0,
            corr_len_um: 8.0,
            ripple_period_um: 0.95,
            texture_corr_len_um: 2.0,
            texture_gain: 0.0185,
        }
    }

    pub fn nickel() -> Self {
        Self {
            name: "Ni".into(),
            depth_per_pulse_um: 0.07,
            threshold_energy_uj: 6.0,
            ra_um: 1.0,
            corr_len_um: 12.0,
            ripple_period_um: 1.15,
            texture_corr_len_um: 3.0,
            texture_gain: 0.02,
        }
    }

    /// Polished wafer used for percussion drilling.
    pub fn silicon() -> Self {
        Self {
            name: "Si".into(),
            depth_per_pulse_um: 0.004,
            threshold_energy_uj: 0.5,
            ra_um: 0.05,
            corr_len_um: 2.0,
            ripple_period_um: 1.0,
            texture_corr_len_um: 1.5,
            texture_gain: 0.0,
        }
    }
}

/// Laser constants shared by all runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProcessConstants {
    /// Processing spot diameter on target; also the groove 1/e^2 width.
    pub spot_diameter_um: f64,
    pub rep_rate_khz: f64,
    /// Crater radius after the first pulse.
    pub crater_base_radius_um: f64,
    /// Crater radius grows as `r0 (1 + growth · ln N)`.
    pub crater_radius_growth: f64,
    /// Removal depth over which the plate's original roughness decays by 1/e.
    pub roughness_erase_depth_um: f64,
    /// Standard deviation of the floor-ripple phase wander, radians.
    pub ripple_jitter_rad: f64,
}

impl Default for ProcessConstants {
    fn default() -> Self {
        Self {
            spot_diameter_um: 15.0,
            rep_rate_khz: 1.0,
            crater_base_radius_um: 5.0,
            crater_radius_growth: 0.1,
            roughness_erase_depth_um: 0.02,
            ripple_jitter_rad: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    Grooving { scan_speed_mm_s: f64 },
    Drilling { n_pulses: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessParams {
    pub pulse_energy_uj: f64,
    pub kind: ProcessKind,
    pub material_id: usize,
}

impl ProcessParams {
    pub fn grooving(pulse_energy_uj: f64, scan_speed_mm_s: f64, material_id: usize) -> Self {
        Self { pulse_energy_uj, kind: ProcessKind::Grooving { scan_speed_mm_s }, material_id }
    }

    pub fn drilling(pulse_energy_uj: f64, n_pulses: u32, material_id: usize) -> Self {
        Self { pulse_energy_uj, kind: ProcessKind::Drilling { n_pulses }, material_id }
    }
}

fn depth_per_pulse(energy_uj: f64, material: &MaterialSpec) -> Result<f64> {
    if !(energy_uj.is_finite() && energy_uj > 0.0) {
        return Err(Error::Config(format!("pulse energy must be positive, got {energy_uj}")));
    }
    Ok((material.depth_per_pulse_um * (energy_uj / material.threshold_energy_uj).ln()).max(0.0))
}

/// Steady-state groove depth, µm.
pub fn groove_depth(
    params: &ProcessParams,
    material: &MaterialSpec,
    consts: &ProcessConstants,
) -> Result<f64> {
    let ProcessKind::Grooving { scan_speed_mm_s } = params.kind else {
        return Err(Error::Config("groove_depth needs grooving parameters".into()));
    };
    if !(scan_speed_mm_s.is_finite() && scan_speed_mm_s > 0.0) {
        return Err(Error::Config(format!("scan speed must be positive, got {scan_speed_mm_s}")));
    }
    // mm/s == µm/ms and kHz == 1/ms, so this is dimensionless.
    let pulses_per_spot = consts.spot_diameter_um * consts.rep_rate_khz / scan_speed_mm_s;
    Ok(depth_per_pulse(params.pulse_energy_uj, material)? * pulses_per_spot)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CraterGeometry {
    pub depth_um: f64,
    pub radius_um: f64,
    pub volume_um3: f64,
}

/// Percussion-drilled crater after `n_pulses`; all zero at or below threshold.
pub fn crater_geometry(
    params: &ProcessParams,
    material: &MaterialSpec,
    consts: &ProcessConstants,
) -> Result<CraterGeometry> {
    let ProcessKind::Drilling { n_pulses } = params.kind else {
        return Err(Error::Config("crater_geometry needs drilling parameters".into()));
    };
    if n_pulses == 0 {
        return Err(Error::Config("n_pulses must be at least 1".into()));
    }
    let per_pulse = depth_per_pulse(params.pulse_energy_uj, material)?;
    if per_pulse == 0.0 {
        return Ok(CraterGeometry { depth_um: 0.0, radius_um: 0.0, volume_um3: 0.0 });
    }
    let n = f64::from(n_pulses);
    let depth_um = per_pulse * n;
    let radius_um = consts.crater_base_radius_um * (1.0 + consts.crater_radius_growth * n.ln());
    let volume_um3 = depth_um * std::f64::consts::PI * radius_um * radius_um / 2.0;
    Ok(CraterGeometry { depth_um, radius_um, volume_um3 })
}

/// `Σ max(before - after, 0) · pitch²` in µm³.
pub fn ablated_volume(before: &HeightMap, after: &HeightMap) -> Result<f64> {
    if !before.grid.same_geometry(&after.grid) {
        return Err(Error::Geometry(format!(
            "height maps differ: {}x{} @ {} vs {}x{} @ {}",
            before.grid.width(),
            before.grid.height(),
            before.grid.pitch(),
            after.grid.width(),
            after.grid.height(),
            after.grid.pitch()
        )));
    }
    let removed: f64 = before
        .grid
        .data()
        .iter()
        .zip(after.grid.data())
        .map(|(b, a)| (b - a).max(0.0))
        .sum();
    Ok(removed * before.grid.pitch().powi(2))
}

/// Measured (or synthetic) crater volumes on an energy × pulse-count grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeLabelGrid {
    energies_uj: Vec<f64>,
    pulse_counts: Vec<u32>,
    /// Row-major: `volumes[i * pulse_counts.len() + j]` is at `(energies[i], pulse_counts[j])`.
    volumes_um3: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct VolumeRow {
    #[serde(rename = "energy_uJ")]
    energy_uj: f64,
    n_pulses: u32,
    volume_um3: f64,
}

impl VolumeLabelGrid {
    pub fn new(energies_uj: Vec<f64>, pulse_counts: Vec<u32>, volumes_um3: Vec<f64>) -> Result<Self> {
        if energies_uj.len() < 2 || pulse_counts.len() < 2 {
            return Err(Error::Config("volume grid needs at least two nodes per axis".into()));
        }
        if !energies_uj.windows(2).all(|w| w[0] < w[1]) || !energies_uj.iter().all(|e| e.is_finite())
        {
            return Err(Error::Config("energy axis must be finite and strictly increasing".into()));
        }
        if !pulse_counts.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("pulse axis must be strictly increasing".into()));
        }
        if volumes_um3.len() != energies_uj.len() * pulse_counts.len() {
            return Err(Error::Config(format!(
                "expected {} volumes, got {}",
                energies_uj.len() * pulse_counts.len(),
                volumes_um3.len()
            )));
        }
        if let Some(v) = volumes_um3.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Config(format!("volumes must be finite and >= 0, got {v}")));
        }
        Ok(Self { energies_uj, pulse_counts, volumes_um3 })
    }

    /// Grid filled from the analytic crater model.
    pub fn from_model(
        energies_uj: Vec<f64>,
        pulse_counts: Vec<u32>,
        material: &MaterialSpec,
        consts: &ProcessConstants,
    ) -> Result<Self> {
        let mut volumes = Vec::with_capacity(energies_uj.len() * pulse_counts.len());
        for &e in &energies_uj {
            for &n in &pulse_counts {
                let p = ProcessParams::drilling(e, n, 0);
                volumes.push(crater_geometry(&p, material, consts)?.volume_um3);
            }
        }
        Self::new(energies_uj, pulse_counts, volumes)
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies_uj
    }

    pub fn pulse_counts(&self) -> &[u32] {
        &self.pulse_counts
    }

    pub fn volume_at(&self, energy_idx: usize, pulse_idx: usize) -> f64 {
        self.volumes_um3[energy_idx * self.pulse_counts.len() + pulse_idx]
    }

    pub fn max_volume(&self) -> f64 {
        self.volumes_um3.iter().cloned().fold(0.0, f64::max)
    }

    pub fn node_count(&self) -> usize {
        self.volumes_um3.len()
    }

    pub fn contains(&self, energy_uj: f64, pulses: f64) -> bool {
        let (e0, e1) = (self.energies_uj[0], *self.energies_uj.last().unwrap());
        let (n0, n1) = (f64::from(self.pulse_counts[0]), f64::from(*self.pulse_counts.last().unwrap()));
        (e0..=e1).contains(&energy_uj) && (n0..=n1).contains(&pulses)
    }

    /// Bilinear interpolation; queries outside the bounding box are rejected.
    pub fn interpolate(&self, energy_uj: f64, pulses: f64) -> Result<f64> {
        if !self.contains(energy_uj, pulses) {
            return Err(Error::OutOfRange { energy_uj, pulses });
        }
        let i = cell_index(&self.energies_uj, energy_uj);
        let n_axis: Vec<f64> = self.pulse_counts.iter().map(|&n| f64::from(n)).collect();
        let j = cell_index(&n_axis, pulses);
        let s = (energy_uj - self.energies_uj[i]) / (self.energies_uj[i + 1] - self.energies_uj[i]);
        let t = (pulses - n_axis[j]) / (n_axis[j + 1] - n_axis[j]);
        let v00 = self.volume_at(i, j);
        let v10 = self.volume_at(i + 1, j);
        let v01 = self.volume_at(i, j + 1);
        let v11 = self.volume_at(i + 1, j + 1);
        Ok((1.0 - s) * (1.0 - t) * v00 + s * (1.0 - t) * v10 + (1.0 - s) * t * v01 + s * t * v11)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (i, &e) in self.energies_uj.iter().enumerate() {
            for (j, &n) in self.pulse_counts.iter().enumerate() {
                w.serialize(VolumeRow { energy_uj: e, n_pulses: n, volume_um3: self.volume_at(i, j) })?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rows = Vec::new();
        for row in csv::Reader::from_reader(reader).deserialize() {
            let row: VolumeRow = row?;
            rows.push(row);
        }
        let mut energies: Vec<f64> = Vec::new();
        let mut pulses: Vec<u32> = Vec::new();
        for r in &rows {
            if !energies.contains(&r.energy_uj) {
                energies.push(r.energy_uj);
            }
            if !pulses.contains(&r.n_pulses) {
                pulses.push(r.n_pulses);
            }
        }
        if rows.len() != energies.len() * pulses.len() {
            return Err(Error::Config(format!(
                "volume CSV has {} rows, expected a full {}x{} grid",
                rows.len(),
                energies.len(),
                pulses.len()
            )));
        }
        let mut volumes = Vec::with_capacity(rows.len());
        for (k, r) in rows.iter().enumerate() {
            let (i, j) = (k / pulses.len(), k % pulses.len());
            if r.energy_uj != energies[i] || r.n_pulses != pulses[j] {
                return Err(Error::Config(format!(
                    "volume CSV row {} is out of (energy, pulses) order",
                    k + 2
                )));
            }
            volumes.push(r.volume_um3);
        }
        Self::new(energies, pulses, volumes)
    }
}

/// Largest `i` with `axis[i] <= x`, capped so that `i + 1` is valid.
fn cell_index(axis: &[f64], x: f64) -> usize {
    let i = axis.partition_point(|&a| a <= x).saturating_sub(1);
    i.min(axis.len() - 2)
}

/// Geometry present on the surface at one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Feature {
    Pristine,
    Groove { depth_um: f64, width_um: f64, axis_offset_um: f64, x_start_um: f64, x_end_um: f64 },
    Crater { depth_um: f64, radius_um: f64, center_um: [f64; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameState {
    pub feature: Feature,
    /// Ground truth at this frame: groove depth (µm) or analytic crater volume (µm³).
    pub label: f64,
    pub pulses_delivered: u32,
}

/// Processed-floor morphology: the plate's roughness decays as
/// `exp(-removal / erase_depth_um)` while a unit-Ra texture scaled by
/// `gain * removal` is laid down.
#[derive(Debug, Clone, PartialEq)]
pub struct GrooveTexture {
    pub field: HeightMap,
    pub gain: f64,
    pub erase_depth_um: f64,
}

/// Per-frame process schedule plus beam motion.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessTrajectory {
    pub params: Option<ProcessParams>,
    pub idle_frames: usize,
    pub beam_start_um: [f64; 2],
    pub beam_velocity_um_per_ms: [f64; 2],
    pub frame_interval_ms: f64,
    states: Vec<FrameState>,
    pub texture: Option<GrooveTexture>,
}

const PRISTINE: FrameState = FrameState { feature: Feature::Pristine, label: 0.0, pulses_delivered: 0 };

impl ProcessTrajectory {
    /// Beam parked over an untouched surface.
    pub fn stationary(beam_center_um: [f64; 2], frame_interval_ms: f64) -> Self {
        Self {
            params: None,
            idle_frames: 0,
            beam_start_um: beam_center_um,
            beam_velocity_um_per_ms: [0.0, 0.0],
            frame_interval_ms,
            states: vec![PRISTINE],
            texture: None,
        }
    }

    /// Groove scan along +x. The stage moves from frame 0; laser pulses start
    /// at `idle_frames`, and the depth ramps linearly to steady state over
    /// `ramp_frames`. The groove trails the beam from where processing began.
    #[allow(clippy::too_many_arguments)]
    pub fn grooving(
        params: ProcessParams,
        material: &MaterialSpec,
        consts: &ProcessConstants,
        n_frames: usize,
        idle_frames: usize,
        ramp_frames: usize,
        beam_start_um: [f64; 2],
        frame_interval_ms: f64,
    ) -> Result<Self> {
        let ProcessKind::Grooving { scan_speed_mm_s } = params.kind else {
            return Err(Error::Config("grooving trajectory needs grooving parameters".into()));
        };
        let steady = groove_depth(&params, material, consts)?;
        let ramp = ramp_frames.max(1);
        let v = scan_speed_mm_s; // µm/ms
        let x_of = |k: usize| beam_start_um[0] + v * k as f64 * frame_interval_ms;
        let states = (0..n_frames)
            .map(|k| {
                if k < idle_frames {
                    return PRISTINE;
                }
                let since = k - idle_frames + 1;
                let depth = steady * (since as f64 / ramp as f64).min(1.0);
                FrameState {
                    feature: Feature::Groove {
                        depth_um: depth,
                        width_um: consts.spot_diameter_um,
                        axis_offset_um: beam_start_um[1],
                        x_start_um: x_of(idle_frames),
                        x_end_um: x_of(k),
                    },
                    label: depth,
                    pulses_delivered: 0,
                }
            })
            .collect();
        Ok(Self {
            params: Some(params),
            idle_frames,
            beam_start_um,
            beam_velocity_um_per_ms: [v, 0.0],
            frame_interval_ms,
            states,
            texture: None,
        })
    }

    /// Percussion drilling at a fixed spot, one pulse per frame after
    /// `idle_frames`, stopping after the requested pulse count.
    pub fn drilling(
        params: ProcessParams,
        material: &MaterialSpec,
        consts: &ProcessConstants,
        idle_frames: usize,
        beam_center_um: [f64; 2],
        frame_interval_ms: f64,
    ) -> Result<Self> {
        let ProcessKind::Drilling { n_pulses } = params.kind else {
            return Err(Error::Config("drilling trajectory needs drilling parameters".into()));
        };
        let mut states = vec![PRISTINE; idle_frames];
        for n in 1..=n_pulses {
            let p = ProcessParams::drilling(params.pulse_energy_uj, n, params.material_id);
            let geo = crater_geometry(&p, material, consts)?;
            let feature = if geo.depth_um > 0.0 {
                Feature::Crater {
                    depth_um: geo.depth_um,
                    radius_um: geo.radius_um,
                    center_um: beam_center_um,
                }
            } else {
                Feature::Pristine
            };
            states.push(FrameState { feature, label: geo.volume_um3, pulses_delivered: n });
        }
        Ok(Self {
            params: Some(params),
            idle_frames,
            beam_start_um: beam_center_um,
            beam_velocity_um_per_ms: [0.0, 0.0],
            frame_interval_ms,
            states,
            texture: None,
        })
    }

    pub fn with_texture(mut self, texture: GrooveTexture) -> Self {
        self.texture = Some(texture);
        self
    }

    /// Number of frames with a distinct schedule entry; later frames hold the last state.
    pub fn scheduled_frames(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, frame: usize) -> &FrameState {
        self.states.get(frame).or(self.states.last()).unwrap_or(&PRISTINE)
    }

    pub fn beam_center(&self, frame: usize) -> [f64; 2] {
        let t = frame as f64 * self.frame_interval_ms;
        [
            self.beam_start_um[0] + self.beam_velocity_um_per_ms[0] * t,
            self.beam_start_um[1] + self.beam_velocity_um_per_ms[1] * t,
        ]
    }

    pub fn labels(&self, n_frames: usize) -> Vec<f64> {
        (0..n_frames).map(|k| self.state(k).label).collect()
    }

    /// Surface as it stands at `frame`.
    pub fn surface_at(&self, initial: &HeightMap, frame: usize) -> Result<HeightMap> {
        let removal: Grid2D = match self.state(frame).feature {
            Feature::Pristine => return Ok(initial.clone()),
            Feature::Groove { depth_um, width_um, axis_offset_um, x_start_um, x_end_um } => {
                if self.texture.is_none() {
                    return carve_groove_segment(
                        initial, depth_um, width_um, axis_offset_um, x_start_um, x_end_um,
                    );
                }
                groove_profile(&initial.grid, depth_um, width_um, axis_offset_um, x_start_um, x_end_um)?
            }
            Feature::Crater { depth_um, radius_um, center_um } => {
                if self.texture.is_none() {
                    return carve_crater(initial, depth_um, radius_um, center_um);
                }
                crater_profile(&initial.grid, depth_um, radius_um, center_um)?
            }
        };
        let tex = self.texture.as_ref().expect("checked above");
        if !tex.field.grid.same_geometry(&initial.grid) {
            return Err(Error::Geometry("texture grid does not match the surface".into()));
        }
        let erase = tex.erase_depth_um;
        let data = initial
            .grid
            .data()
            .iter()
            .zip(removal.data())
            .zip(tex.field.grid.data())
            .map(|((h, r), t)| h * (-r / erase).exp() - r + tex.gain * r * t)
            .collect();
        Ok(HeightMap {
            grid: Grid2D::new(initial.grid.width(), initial.grid.height(), initial.grid.pitch(), data)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consts() -> ProcessConstants {
        ProcessConstants::default()
    }

    #[test]
    fn groove_depth_zero_at_threshold() {
        let al = MaterialSpec::aluminum();
        let p = ProcessParams::grooving(al.threshold_energy_uj, 1.0, 0);
        assert_eq!(groove_depth(&p, &al, &consts()).unwrap(), 0.0);
        let below = ProcessParams::grooving(1.0, 1.0, 0);
        assert_eq!(groove_depth(&below, &al, &consts()).unwrap(), 0.0);
    }

    #[test]
    fn doubling_speed_halves_depth() {
        let al = MaterialSpec::aluminum();
        let slow = groove_depth(&ProcessParams::grooving(30.0, 1.5, 0), &al, &consts()).unwrap();
        let fast = groove_depth(&ProcessParams::grooving(30.0, 3.0, 0), &al, &consts()).unwrap();
        assert!((slow / fast - 2.0).abs() < 1e-12);
    }

    #[test]
    fn groove_depth_reference_value() {
        // 0.1 * ln(60/5) * (15 * 1 / 1), evaluated independently
        let al = MaterialSpec::aluminum();
        let d = groove_depth(&ProcessParams::grooving(60.0, 1.0, 0), &al, &consts()).unwrap();
        assert!((d - 3.727_359_974_682_000_8).abs() < 1e-12, "{d}");
    }

    #[test]
    fn groove_depth_rejects_bad_speed() {
        let al = MaterialSpec::aluminum();
        assert!(groove_depth(&ProcessParams::grooving(30.0, 0.0, 0), &al, &consts()).is_err());
        assert!(groove_depth(&ProcessParams::grooving(30.0, -1.0, 0), &al, &consts()).is_err());
    }

    #[test]
    fn groove_depth_monotone_over_sweep() {
        let al = MaterialSpec::aluminum();
        let energies: Vec<f64> = (0..20).map(|i| 6.0 + 3.0 * i as f64).collect();
        let speeds: Vec<f64> = (0..10).map(|i| 1.0 + 0.25 * i as f64).collect();
        for &v in &speeds {
            let depths: Vec<f64> = energies
                .iter()
                .map(|&e| groove_depth(&ProcessParams::grooving(e, v, 0), &al, &consts()).unwrap())
                .collect();
            assert!(depths.windows(2).all(|w| w[1] > w[0]));
        }
        for &e in &energies {
            let depths: Vec<f64> = speeds
                .iter()
                .map(|&v| groove_depth(&ProcessParams::grooving(e, v, 0), &al, &consts()).unwrap())
                .collect();
            assert!(depths.windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn crater_depth_linear_in_pulses() {
        let si = MaterialSpec::silicon();
        for n in [1u32, 7, 50, 150] {
            let one = crater_geometry(&ProcessParams::drilling(5.0, 1, 0), &si, &consts()).unwrap();
            let a = crater_geometry(&ProcessParams::drilling(5.0, n, 0), &si, &consts()).unwrap();
            let b = crater_geometry(&ProcessParams::drilling(5.0, 2 * n, 0), &si, &consts()).unwrap();
            assert_eq!(b.depth_um, 2.0 * a.depth_um);
            assert_eq!(a.depth_um, f64::from(n) * one.depth_um);
        }
    }

    #[test]
    fn crater_below_threshold_is_empty() {
        let si = MaterialSpec::silicon();
        let g = crater_geometry(&ProcessParams::drilling(0.4, 100, 0), &si, &consts()).unwrap();
        assert_eq!((g.depth_um, g.radius_um, g.volume_um3), (0.0, 0.0, 0.0));
    }

    #[test]
    fn crater_reference_triple() {
        // E = 4 µJ, N = 200 on the silicon defaults, evaluated independently
        let si = MaterialSpec::silicon();
        let g = crater_geometry(&ProcessParams::drilling(4.0, 200, 0), &si, &consts()).unwrap();
        assert!((g.depth_um - 1.663_553_233_343_868_7).abs() < 1e-12, "{}", g.depth_um);
        assert!((g.radius_um - 7.649_158_683_274_018).abs() < 1e-12, "{}", g.radius_um);
        assert!((g.volume_um3 - 152.891_703_966_285).abs() < 1e-9, "{}", g.volume_um3);
    }

    #[test]
    fn ablated_volume_arithmetic() {
        let before = HeightMap::flat(20, 20, 0.25).unwrap();
        assert_eq!(ablated_volume(&before, &before).unwrap(), 0.0);
        let data: Vec<f64> = (0..400).map(|i| if i < 100 { -1.0 } else { 0.0 }).collect();
        let after = HeightMap { grid: Grid2D::new(20, 20, 0.25, data).unwrap() };
        assert!((ablated_volume(&before, &after).unwrap() - 6.25).abs() < 1e-12);
        // raised material does not count
        assert_eq!(ablated_volume(&after, &before).unwrap(), 0.0);
        let other = HeightMap::flat(10, 10, 0.25).unwrap();
        assert!(ablated_volume(&before, &other).is_err());
    }

    #[test]
    fn carved_crater_volume_matches_model() {
        let si = MaterialSpec::silicon();
        let g = crater_geometry(&ProcessParams::drilling(8.0, 250, 0), &si, &consts()).unwrap();
        let flat = HeightMap::flat(512, 512, 0.25).unwrap();
        let after = carve_crater(&flat, g.depth_um, g.radius_um, [0.0, 0.0]).unwrap();
        let v = ablated_volume(&flat, &after).unwrap();
        assert!((v / g.volume_um3 - 1.0).abs() < 0.01);
    }

    fn small_grid() -> VolumeLabelGrid {
        VolumeLabelGrid::new(vec![1.0, 2.0, 4.0], vec![50, 100], vec![1.0, 2.0, 3.0, 5.0, 8.0, 13.0])
            .unwrap()
    }

    #[test]
    fn interpolation_exact_at_nodes_and_midpoints() {
        let g = small_grid();
        for (i, &e) in g.energies().iter().enumerate() {
            for (j, &n) in g.pulse_counts().iter().enumerate() {
                assert_eq!(g.interpolate(e, f64::from(n)).unwrap(), g.volume_at(i, j));
            }
        }
        let mid = g.interpolate(1.5, 75.0).unwrap();
        assert!((mid - (1.0 + 2.0 + 3.0 + 5.0) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn interpolation_rejects_extrapolation() {
        let g = small_grid();
        assert!(matches!(g.interpolate(0.5, 60.0), Err(Error::OutOfRange { .. })));
        assert!(matches!(g.interpolate(2.0, 101.0), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn grid_rejects_bad_axes() {
        assert!(VolumeLabelGrid::new(vec![2.0, 1.0], vec![1, 2], vec![0.0; 4]).is_err());
        assert!(VolumeLabelGrid::new(vec![1.0, 2.0], vec![2, 2], vec![0.0; 4]).is_err());
        assert!(VolumeLabelGrid::new(vec![1.0, 2.0], vec![1, 2], vec![0.0, -1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let g = small_grid();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("energy_uJ,n_pulses,volume_um3\n"));
        assert_eq!(VolumeLabelGrid::read_csv(buf.as_slice()).unwrap(), g);
    }

    #[test]
    fn grooving_schedule_idles_then_ramps() {
        let al = MaterialSpec::aluminum();
        let p = ProcessParams::grooving(40.0, 3.5, 0);
        let t = ProcessTrajectory::grooving(p, &al, &consts(), 12, 9, 2, [-30.0, 0.0], 1.0).unwrap();
        let labels = t.labels(12);
        assert!(labels[..9].iter().all(|&d| d == 0.0));
        let steady = groove_depth(&p, &al, &consts()).unwrap();
        assert_eq!(labels[9], steady / 2.0);
        assert_eq!(labels[10], steady);
        assert_eq!(labels[11], steady);
        let c0 = t.beam_center(0);
        let c1 = t.beam_center(1);
        assert!((c1[0] - c0[0] - 3.5).abs() < 1e-12);
    }

    #[test]
    fn drilling_schedule_counts_pulses() {
        let si = MaterialSpec::silicon();
        let p = ProcessParams::drilling(5.0, 20, 0);
        let t = ProcessTrajectory::drilling(p, &si, &consts(), 9, [0.0, 0.0], 1.0).unwrap();
        assert_eq!(t.scheduled_frames(), 29);
        assert_eq!(t.state(8).pulses_delivered, 0);
        assert_eq!(t.state(9).pulses_delivered, 1);
        assert_eq!(t.state(28).pulses_delivered, 20);
        assert_eq!(t.state(100).pulses_delivered, 20);
        let labels = t.labels(29);
        assert!(labels.windows(2).all(|w| w[1] >= w[0]));
    }
}
