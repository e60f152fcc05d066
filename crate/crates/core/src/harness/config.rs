use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ablation::{MaterialSpec, ProcessConstants};
use crate::net::{NetworkSpec, TrainConfig};
use crate::optics::OpticalConfig;
use crate::{Error, Result};

/// The commented default configuration shipped with the crate.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../../configs/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrooveSweep {
    pub enabled: bool,
    pub energies_uj: Vec<f64>,
    pub speeds_mm_s: Vec<f64>,
    /// Independent runs (fresh surfaces) per (material, energy, speed).
    pub repeats: usize,
    /// Frames acquired per run, idle ones included.
    pub n_frames: usize,
    pub idle_frames: usize,
    /// Frames over which the groove deepens to its steady-state depth.
    pub ramp_frames: usize,
    /// Probe position at frame 0, µm from the grid center.
    pub beam_start_um: [f64; 2],
}

impl Default for GrooveSweep {
    fn default() -> Self {
        Self {
            enabled: true,
            energies_uj: vec![10.0, 22.5, 35.0, 47.5, 60.0],
            speeds_mm_s: vec![1.0, 1.5, 2.5, 3.5],
            repeats: 1,
            n_frames: 21,
            idle_frames: 9,
            ramp_frames: 2,
            beam_start_um: [-35.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DrillSweep {
    pub enabled: bool,
    pub material: MaterialSpec,
    /// Energy axis of the volume label grid.
    pub grid_energies_uj: Vec<f64>,
    /// Pulse-count axis of the volume label grid.
    pub grid_pulses: Vec<u32>,
    /// Runs with a random energy and final pulse count inside the grid.
    pub runs: usize,
    /// Consecutive frames rendered at the end of each run.
    pub frames_per_run: usize,
    pub idle_frames: usize,
}

impl Default for DrillSweep {
    fn default() -> Self {
        Self {
            enabled: true,
            material: MaterialSpec::silicon(),
            grid_energies_uj: (1..=10).map(f64::from).collect(),
            grid_pulses: (1..=6).map(|k| 50 * k).collect(),
            runs: 60,
            frames_per_run: 12,
            idle_frames: 9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub raw_width: usize,
    pub raw_height: usize,
    pub box_factor: usize,
    pub crop_height: usize,
    /// Gaussian read noise relative to the frame mean; 0 disables it.
    pub noise_rel_std: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { raw_width: 4080, raw_height: 480, box_factor: 16, crop_height: 25, noise_rel_std: 0.01 }
    }
}

impl DetectorConfig {
    pub fn frame_width(&self) -> usize {
        self.raw_width / self.box_factor.max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TripletConfig {
    pub stride: usize,
    pub cap: usize,
}

impl Default for TripletConfig {
    fn default() -> Self {
        Self { stride: 1, cap: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub iterations: usize,
    pub warmup: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { iterations: 200, warmup: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub output_dir: PathBuf,
    /// Master seed; every surface, texture, noise field and draw derives from it.
    pub seed: u64,
    pub optics: OpticalConfig,
    pub process: ProcessConstants,
    /// Groove-mode materials, in class order.
    pub materials: Vec<MaterialSpec>,
    pub groove: GrooveSweep,
    pub drill: DrillSweep,
    pub detector: DetectorConfig,
    pub triplets: TripletConfig,
    pub network: NetworkSpec,
    pub train: TrainConfig,
    pub bench: BenchConfig,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            seed: 2024,
            optics: OpticalConfig::default(),
            process: ProcessConstants::default(),
            materials: vec![MaterialSpec::aluminum(), MaterialSpec::copper(), MaterialSpec::nickel()],
            groove: GrooveSweep::default(),
            drill: DrillSweep::default(),
            detector: DetectorConfig::default(),
            triplets: TripletConfig::default(),
            network: NetworkSpec::default(),
            // A few hundred samples: small batches and a lighter material term.
            train: TrainConfig { batch_size: 32, lambda_cls: 0.3, ..TrainConfig::default() },
            bench: BenchConfig::default(),
        }
    }
}

fn merge_tables(base: &mut toml::Table, overrides: toml::Table) {
    for (key, value) in overrides {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge_tables(b, o),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

fn strictly_increasing<T: PartialOrd>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl HarnessConfig {
    /// Parses a config. Keys the text leaves out keep their value from
    /// [`HarnessConfig::default`], at any depth: a `[train]` table that only
    /// sets `epochs` keeps the default batch size. Arrays are replaced whole.
    pub fn from_toml(text: &str) -> Result<Self> {
        let overrides: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut merged = toml::Table::try_from(Self::default()).map_err(|e| Error::Config(e.to_string()))?;
        merge_tables(&mut merged, overrides);
        merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads and validates a config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg = Self::from_toml(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every problem found, reported together.
    pub fn problems(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if let Err(e) = self.optics.validate() {
            errs.push(e.to_string());
        }
        let p = &self.process;
        for (name, v) in [
            ("process.spot_diameter_um", p.spot_diameter_um),
            ("process.rep_rate_khz", p.rep_rate_khz),
            ("process.crater_base_radius_um", p.crater_base_radius_um),
            ("process.roughness_erase_depth_um", p.roughness_erase_depth_um),
        ] {
            if !(v.is_finite() && v > 0.0) {
                errs.push(format!("{name} must be positive, got {v}"));
            }
        }
        if self.materials.is_empty() {
            errs.push("materials: at least one groove material is required".into());
        }
        for m in self.materials.iter().chain([&self.drill.material]) {
            if let Err(e) = m.validate() {
                errs.push(e.to_string());
            }
        }

        let g = &self.groove;
        if g.enabled {
            if g.energies_uj.is_empty() || g.energies_uj.iter().any(|&e| !(e > 0.0)) {
                errs.push("groove.energies_uj must be a nonempty list of positive energies".into());
            }
            if g.speeds_mm_s.is_empty() || g.speeds_mm_s.iter().any(|&v| !(v > 0.0)) {
                errs.push("groove.speeds_mm_s must be a nonempty list of positive speeds".into());
            }
            if g.repeats == 0 {
                errs.push("groove.repeats must be at least 1".into());
            }
            if g.n_frames < g.idle_frames + 3 {
                errs.push(format!(
                    "groove.n_frames ({}) leaves no triplet after {} idle frames",
                    g.n_frames, g.idle_frames
                ));
            }
            if self.optics.validate().is_ok() && g.n_frames > 0 {
                let limit = self.optics.field_extent_um() / 2.0 - 2.0 * self.optics.beam_waist_um;
                let travel = g.speeds_mm_s.iter().cloned().fold(0.0, f64::max)
                    * (g.n_frames - 1) as f64
                    * self.optics.frame_interval_ms;
                let end = g.beam_start_um[0] + travel;
                if g.beam_start_um[0].abs() > limit || end.abs() > limit || g.beam_start_um[1].abs() > limit {
                    errs.push(format!(
                        "groove: probe travels from x = {} to {end:.1} µm but must stay within ±{limit:.1} µm",
                        g.beam_start_um[0]
                    ));
                }
            }
            if self.network.n_classes != self.materials.len() {
                errs.push(format!(
                    "network.n_classes ({}) must equal the number of groove materials ({})",
                    self.network.n_classes,
                    self.materials.len()
                ));
            }
        }

        let d = &self.drill;
        if d.enabled {
            if d.grid_energies_uj.len() < 2 || !strictly_increasing(&d.grid_energies_uj) {
                errs.push("drill.grid_energies_uj needs at least 2 strictly increasing values".into());
            }
            if d.grid_pulses.len() < 2 || !strictly_increasing(&d.grid_pulses) || d.grid_pulses[0] == 0 {
                errs.push("drill.grid_pulses needs at least 2 strictly increasing positive counts".into());
            }
            if d.runs < 2 {
                errs.push("drill.runs must be at least 2 for a run-level split".into());
            }
            if d.frames_per_run < 3 {
                errs.push("drill.frames_per_run must be at least 3".into());
            }
            if let (Some(&lo), Some(&hi)) = (d.grid_pulses.first(), d.grid_pulses.last()) {
                if (hi as usize) < lo as usize + d.frames_per_run.saturating_sub(1) {
                    errs.push(format!(
                        "drill: {} frames per run do not fit between {lo} and {hi} pulses",
                        d.frames_per_run
                    ));
                }
            }
        }
        if !g.enabled && !d.enabled {
            errs.push("at least one of groove.enabled / drill.enabled must be true".into());
        }

        let det = &self.detector;
        if det.box_factor == 0 || det.raw_width % det.box_factor.max(1) != 0 {
            errs.push(format!(
                "detector.raw_width ({}) must be divisible by detector.box_factor ({})",
                det.raw_width, det.box_factor
            ));
        }
        if det.box_factor > 0 && det.raw_height / det.box_factor < det.crop_height {
            errs.push(format!(
                "detector.raw_height / box_factor ({}) is below crop_height ({})",
                det.raw_height / det.box_factor,
                det.crop_height
            ));
        }
        if det.crop_height == 0 {
            errs.push("detector.crop_height must be positive".into());
        }
        if !(det.noise_rel_std >= 0.0) {
            errs.push("detector.noise_rel_std must be non-negative".into());
        }
        if det.box_factor > 0
            && (self.network.input_height != det.crop_height || self.network.input_width != det.frame_width())
        {
            errs.push(format!(
                "network input {}x{} does not match detector output {}x{}",
                self.network.input_height,
                self.network.input_width,
                det.crop_height,
                det.frame_width()
            ));
        }
        if self.triplets.stride == 0 || self.triplets.cap == 0 {
            errs.push("triplets.stride and triplets.cap must be positive".into());
        }
        if let Err(e) = self.network.trace() {
            errs.push(format!("network: {e}"));
        }
        errs.extend(self.train.validate());
        if self.bench.iterations < 100 {
            errs.push(format!("bench.iterations must be at least 100, got {}", self.bench.iterations));
        }
        if self.bench.warmup < 10 {
            errs.push(format!("bench.warmup must be at least 10, got {}", self.bench.warmup));
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.problems();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("{} problem(s):\n  - {}", errs.len(), errs.join("\n  - "))))
        }
    }
}
