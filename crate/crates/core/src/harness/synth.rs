use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::HarnessConfig;
use crate::ablation::{GrooveTexture, MaterialSpec, ProcessParams, ProcessTrajectory, VolumeLabelGrid};
use crate::dataset::{
    add_detector_noise, assemble_triplets, detector_readout, downsample_box, normalize01, one_hot, DatasetManifest,
    Image, LabeledSample, Mode, RunRecord, TripletOptions, SCHEMA_VERSION,
};
use crate::optics::{
    render_frames, synthesize_ripple_texture, synthesize_rough_surface, HeightMap, IntensityFrame, RippleSpec, RoughnessSpec,
};
use crate::{Error, Result};

const STREAM_SURFACE: u64 = 1;
const STREAM_TEXTURE: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_DRILL_DRAWS: u64 = 4;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent seed for `(stream, index)` under a master seed.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream ^ splitmix64(index)))
}

/// A synthesized dataset before it is written.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub manifest: DatasetManifest,
    pub samples: Vec<LabeledSample>,
}

struct RunOutput {
    record: RunRecord,
    samples: Vec<LabeledSample>,
}

/// Camera pipeline for one rendered frame: readout, read noise, box average, min-max.
pub fn preprocess_frame(frame: &IntensityFrame, cfg: &HarnessConfig, noise_seed: u64) -> Result<Image> {
    let det = &cfg.detector;
    let mut raw = detector_readout(frame, &cfg.optics, det.raw_width, det.raw_height)?;
    if det.noise_rel_std > 0.0 {
        raw = add_detector_noise(&raw, det.noise_rel_std, noise_seed);
    }
    Ok(normalize01(&downsample_box(&raw, det.box_factor, det.crop_height)?))
}

fn surfaces(cfg: &HarnessConfig, material: &MaterialSpec, run: u64) -> Result<(HeightMap, GrooveTexture)> {
    let n = cfg.optics.grid_n;
    let pitch = cfg.optics.pitch_um;
    let plate = RoughnessSpec {
        ra_um: material.ra_um,
        corr_len_um: material.corr_len_um,
        seed: derive_seed(cfg.seed, STREAM_SURFACE, run),
    };
    let texture = RippleSpec {
        period_um: material.ripple_period_um,
        jitter_corr_len_um: material.texture_corr_len_um,
        jitter_rad: cfg.process.ripple_jitter_rad,
        seed: derive_seed(cfg.seed, STREAM_TEXTURE, run),
    };
    Ok((
        synthesize_rough_surface(&plate, n, n, pitch)?,
        GrooveTexture {
            field: synthesize_ripple_texture(&texture, n, n, pitch)?,
            gain: material.texture_gain,
            erase_depth_um: cfg.process.roughness_erase_depth_um,
        },
    ))
}

fn finish_run(
    cfg: &HarnessConfig,
    run_id: u32,
    params: ProcessParams,
    material: &MaterialSpec,
    frames: Vec<IntensityFrame>,
    first_frame: usize,
    labels: Vec<f64>,
    onehot: &[f32],
) -> Result<RunOutput> {
    let images = frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let seed = derive_seed(cfg.seed, STREAM_NOISE, (u64::from(run_id) << 20) | (first_frame + i) as u64);
            preprocess_frame(f, cfg, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let opts = TripletOptions { idle_frames: 0, stride: cfg.triplets.stride, cap: Some(cfg.triplets.cap) };
    let samples = assemble_triplets(&images, &labels, &opts, run_id, onehot)?;
    Ok(RunOutput {
        record: RunRecord {
            run_id,
            params,
            material: material.name.clone(),
            frame_labels: labels,
            first_frame,
            first_sample: 0,
            sample_count: samples.len(),
            payload_offset: 0,
        },
        samples,
    })
}

fn groove_run(cfg: &HarnessConfig, run_id: u32, params: ProcessParams) -> Result<RunOutput> {
    let g = &cfg.groove;
    let material = &cfg.materials[params.material_id];
    let (plate, texture) = surfaces(cfg, material, u64::from(run_id))?;
    let traj = ProcessTrajectory::grooving(
        params,
        material,
        &cfg.process,
        g.n_frames,
        g.idle_frames,
        g.ramp_frames,
        g.beam_start_um,
        cfg.optics.frame_interval_ms,
    )?
    .with_texture(texture);
    let indices: Vec<usize> = (g.idle_frames..g.n_frames).collect();
    let frames = render_frames(&plate, &traj, &cfg.optics, &indices)?;
    let labels = traj.labels(g.n_frames)[g.idle_frames..].to_vec();
    let onehot = one_hot(params.material_id, cfg.materials.len())?;
    finish_run(cfg, run_id, params, material, frames, g.idle_frames, labels, &onehot)
}

fn drill_run(cfg: &HarnessConfig, grid: &VolumeLabelGrid, run_id: u32, params: ProcessParams) -> Result<RunOutput> {
    let d = &cfg.drill;
    let crate::ablation::ProcessKind::Drilling { n_pulses } = params.kind else {
        return Err(Error::Config("drill run needs drilling parameters".into()));
    };
    let (plate, texture) = surfaces(cfg, &d.material, u64::from(run_id))?;
    let traj =
        ProcessTrajectory::drilling(params, &d.material, &cfg.process, d.idle_frames, [0.0, 0.0], cfg.optics.frame_interval_ms)?
            .with_texture(texture);
    let last = d.idle_frames + n_pulses as usize - 1;
    let first = last + 1 - d.frames_per_run;
    let indices: Vec<usize> = (first..=last).collect();
    let labels = indices
        .iter()
        .map(|&k| grid.interpolate(params.pulse_energy_uj, traj.state(k).pulses_delivered as f64))
        .collect::<Result<Vec<_>>>()?;
    let frames = render_frames(&plate, &traj, &cfg.optics, &indices)?;
    finish_run(cfg, run_id, params, &d.material, frames, first, labels, &[1.0])
}

fn assemble(
    cfg: &HarnessConfig,
    mode: Mode,
    runs: Vec<RunOutput>,
    materials: Vec<String>,
    target_scale: f64,
    target_unit: &str,
) -> SynthOutput {
    let record_len = 4 * (2 + materials.len() + 3 * cfg.detector.crop_height * cfg.detector.frame_width());
    let mut records = Vec::with_capacity(runs.len());
    let mut samples = Vec::new();
    for mut run in runs {
        run.record.first_sample = samples.len();
        run.record.payload_offset = (samples.len() * record_len) as u64;
        records.push(run.record);
        samples.extend(run.samples);
    }
    let seeds = BTreeMap::from([("master".to_string(), cfg.seed)]);
    let manifest = DatasetManifest {
        schema_version: SCHEMA_VERSION,
        mode,
        materials,
        sample_count: samples.len(),
        frame_height: cfg.detector.crop_height,
        frame_width: cfg.detector.frame_width(),
        target_scale,
        target_unit: target_unit.to_string(),
        seeds,
        runs: records,
    };
    SynthOutput { manifest, samples }
}

/// Every (material, energy, speed, repeat) combination as one run. Depth
/// targets are scaled by the deepest label in the sweep.
pub fn synth_groove(cfg: &HarnessConfig) -> Result<SynthOutput> {
    let g = &cfg.groove;
    let mut params = Vec::new();
    for m in 0..cfg.materials.len() {
        for &e in &g.energies_uj {
            for &v in &g.speeds_mm_s {
                for _ in 0..g.repeats {
                    params.push(ProcessParams::grooving(e, v, m));
                }
            }
        }
    }
    let runs = params
        .into_par_iter()
        .enumerate()
        .map(|(i, p)| groove_run(cfg, i as u32, p))
        .collect::<Result<Vec<_>>>()?;
    let scale = runs.iter().flat_map(|r| r.record.frame_labels.iter().copied()).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::Config("groove sweep removes no material; every pulse energy is below threshold".into()));
    }
    let names = cfg.materials.iter().map(|m| m.name.clone()).collect();
    Ok(assemble(cfg, Mode::Groove, runs, names, scale, "um"))
}

pub fn volume_grid(cfg: &HarnessConfig) -> Result<VolumeLabelGrid> {
    let d = &cfg.drill;
    VolumeLabelGrid::from_model(d.grid_energies_uj.clone(), d.grid_pulses.clone(), &d.material, &cfg.process)
}

/// Random (energy, final pulse count) runs whose rendered frames all fall inside the label grid.
pub fn synth_drill(cfg: &HarnessConfig) -> Result<(SynthOutput, VolumeLabelGrid)> {
    let d = &cfg.drill;
    let grid = volume_grid(cfg)?;
    let (e_lo, e_hi) = (grid.energies()[0], *grid.energies().last().expect("validated"));
    let n_lo = grid.pulse_counts()[0] + d.frames_per_run as u32 - 1;
    let n_hi = *grid.pulse_counts().last().expect("validated");
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_DRILL_DRAWS, 0));
    let params: Vec<ProcessParams> = (0..d.runs)
        .map(|_| ProcessParams::drilling(rng.random_range(e_lo..=e_hi), rng.random_range(n_lo..=n_hi), 0))
        .collect();
    let runs = params
        .into_par_iter()
        .enumerate()
        .map(|(i, p)| drill_run(cfg, &grid, i as u32, p))
        .collect::<Result<Vec<_>>>()?;
    let scale = grid.max_volume();
    if !(scale > 0.0) {
        return Err(Error::Config("drill label grid has no positive volume".into()));
    }
    Ok((assemble(cfg, Mode::Drill, runs, vec![d.material.name.clone()], scale, "um3"), grid))
}

/// `run_id,frame_idx,<label column>,material`, one row per rendered frame.
pub fn write_labels_csv(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    let column = match manifest.mode {
        Mode::Groove => "depth_um",
        Mode::Drill => "volume_um3",
    };
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["run_id", "frame_idx", column, "material"])?;
    for run in &manifest.runs {
        for (i, label) in run.frame_labels.iter().enumerate() {
            w.write_record([
                run.run_id.to_string(),
                (run.first_frame + i).to_string(),
                label.to_string(),
                run.material.clone(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
