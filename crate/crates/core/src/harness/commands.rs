use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::HarnessConfig;
use super::synth::{synth_drill, synth_groove, write_labels_csv};
use crate::dataset::{read_dataset, split_dataset, write_dataset, hex_digest, DatasetManifest, LabeledSample, Mode, NetInput};
use crate::net::{
    bench_latency, evaluate, predict_batch, EvalReport, LatencyStats, ModelMeta, Prediction, Trainer,
};
use crate::{Error, Result};

pub fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Groove => "groove",
        Mode::Drill => "drill",
    }
}

/// Where each command reads and writes, all under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(cfg: &HarnessConfig) -> Self {
        Self { root: cfg.output_dir.clone() }
    }

    fn file(&self, mode: Mode, suffix: &str) -> PathBuf {
        self.root.join(format!("{}{suffix}", mode_name(mode)))
    }

    pub fn dataset(&self, mode: Mode) -> PathBuf {
        self.file(mode, ".spkl")
    }

    pub fn labels(&self, mode: Mode) -> PathBuf {
        self.file(mode, "_labels.csv")
    }

    pub fn checkpoint(&self, mode: Mode) -> PathBuf {
        self.file(mode, "_model.ckpt")
    }

    pub fn loss_curve(&self, mode: Mode) -> PathBuf {
        self.file(mode, "_loss.csv")
    }

    pub fn eval_csv(&self, mode: Mode) -> PathBuf {
        self.file(mode, "_eval.csv")
    }

    pub fn eval_summary(&self, mode: Mode) -> PathBuf {
        self.file(mode, "_eval.toml")
    }

    pub fn volume_grid(&self) -> PathBuf {
        self.root.join("volume_grid.csv")
    }

    pub fn bench(&self) -> PathBuf {
        self.root.join("bench.toml")
    }

    pub fn predictions(&self) -> PathBuf {
        self.root.join("predictions.toml")
    }
}

fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Config(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub mode: String,
    pub path: PathBuf,
    pub runs: usize,
    pub samples: usize,
    pub sha256: String,
}

/// Synthesizes every enabled mode and writes datasets plus label tables.
pub fn cmd_synth(cfg: &HarnessConfig) -> Result<Vec<DatasetInfo>> {
    cfg.validate()?;
    let layout = Layout::new(cfg);
    fs::create_dir_all(&layout.root)?;
    let mut out = Vec::new();
    let mut save = |manifest: &DatasetManifest, samples: &[LabeledSample]| -> Result<()> {
        let path = layout.dataset(manifest.mode);
        let digest = write_dataset(samples, manifest, &path)?;
        write_labels_csv(manifest, &layout.labels(manifest.mode))?;
        log::info!("wrote {} ({} samples)", path.display(), samples.len());
        out.push(DatasetInfo {
            mode: mode_name(manifest.mode).into(),
            path,
            runs: manifest.runs.len(),
            samples: samples.len(),
            sha256: hex_digest(&digest),
        });
        Ok(())
    };
    if cfg.groove.enabled {
        let g = synth_groove(cfg)?;
        save(&g.manifest, &g.samples)?;
    }
    if cfg.drill.enabled {
        let (d, grid) = synth_drill(cfg)?;
        grid.write_csv(fs::File::create(layout.volume_grid())?)?;
        save(&d.manifest, &d.samples)?;
    }
    Ok(out)
}

/// Dataset split into (train, validation) at run level under the training seed.
pub fn load_split(
    cfg: &HarnessConfig,
    path: &Path,
) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>, DatasetManifest)> {
    let (samples, manifest) = read_dataset(path)?;
    if samples.is_empty() {
        return Err(Error::Config(format!("{} holds no samples", path.display())));
    }
    let (train, val) = split_dataset(samples, 1.0 - cfg.train.validation_fraction, cfg.train.seed)?;
    Ok((train, val, manifest))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub loss_curve: PathBuf,
    pub epochs: usize,
    pub train_samples: usize,
    pub val_samples: usize,
    pub initial_train_loss: f64,
    pub final_train_loss: f64,
    pub final_val_loss: Option<f64>,
}

fn write_loss_curve(trainer: &Trainer, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "train_loss", "val_loss", "val_rmse", "val_xent"])?;
    for log in &trainer.history {
        let opt = |f: fn(&crate::net::LossBreakdown) -> f64| log.val.as_ref().map(|v| f(v).to_string()).unwrap_or_default();
        w.write_record([
            log.epoch.to_string(),
            log.train_loss.to_string(),
            opt(|v| v.total),
            opt(|v| v.rmse),
            opt(|v| v.xent),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Trains on a dataset (default: the synthesized one for `mode`). With `resume`,
/// continues from an existing checkpoint until `train.epochs` are done.
pub fn cmd_train(cfg: &HarnessConfig, mode: Mode, dataset: Option<&Path>, resume: bool) -> Result<TrainSummary> {
    cfg.validate()?;
    let layout = Layout::new(cfg);
    let path = dataset.map(Path::to_path_buf).unwrap_or_else(|| layout.dataset(mode));
    if !path.exists() {
        return Err(Error::Config(format!("dataset {} does not exist; run `synth` first", path.display())));
    }
    let (train, val, manifest) = load_split(cfg, &path)?;
    fs::create_dir_all(&layout.root)?;
    let ckpt = layout.checkpoint(manifest.mode);
    let mut trainer = if resume && ckpt.exists() {
        let t = Trainer::load(&ckpt)?;
        check_compatible(&t, &manifest)?;
        t
    } else {
        let spec = cfg.network.clone().with_classes(manifest.materials.len());
        let meta = ModelMeta {
            mode: manifest.mode,
            materials: manifest.materials.clone(),
            target_scale: manifest.target_scale,
            target_unit: manifest.target_unit.clone(),
        };
        Trainer::new(&spec, meta, &cfg.train)?
    };
    let initial = trainer.dataset_loss(&train, &cfg.train)?.total;
    trainer.fit(&train, &val, &cfg.train)?;
    trainer.save(&ckpt)?;
    let curve = layout.loss_curve(manifest.mode);
    write_loss_curve(&trainer, &curve)?;
    let last = trainer.history.last();
    Ok(TrainSummary {
        checkpoint: ckpt,
        loss_curve: curve,
        epochs: trainer.epochs_done(),
        train_samples: train.len(),
        val_samples: val.len(),
        initial_train_loss: initial,
        final_train_loss: last.map_or(initial, |l| l.train_loss),
        final_val_loss: last.and_then(|l| l.val.map(|v| v.total)),
    })
}

fn check_compatible(trainer: &Trainer, manifest: &DatasetManifest) -> Result<()> {
    let spec = trainer.network.spec();
    let model = [spec.n_classes, spec.input_height, spec.input_width];
    let data = [manifest.materials.len(), manifest.frame_height, manifest.frame_width];
    if model != data || trainer.meta.mode != manifest.mode {
        return Err(Error::Incompatible(format!(
            "checkpoint is {} with K={} on {}x{} inputs; dataset is {} with K={} on {}x{} inputs",
            mode_name(trainer.meta.mode),
            model[0],
            model[1],
            model[2],
            mode_name(manifest.mode),
            data[0],
            data[1],
            data[2]
        )));
    }
    Ok(())
}

/// Optional acceptance limits; absent entries are not checked.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub groove: ModeThresholds,
    pub drill: ModeThresholds,
    pub bench: BenchThresholds,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeThresholds {
    /// Validation MAE as a fraction of the validation label range.
    pub max_mae_fraction_of_range: Option<f64>,
    /// Validation MAE divided by training MAE.
    pub max_val_to_train_mae: Option<f64>,
    pub min_accuracy: Option<f64>,
    pub min_median_margin: Option<f64>,
    pub min_r2: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchThresholds {
    pub max_p95_ms: Option<f64>,
}

impl Thresholds {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn for_mode(&self, mode: Mode) -> &ModeThresholds {
        match mode {
            Mode::Groove => &self.groove,
            Mode::Drill => &self.drill,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, pass: value <= limit }
    }

    fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, pass: value >= limit }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub mode: String,
    pub checkpoint: PathBuf,
    pub dataset: PathBuf,
    pub validation_samples: usize,
    pub train_samples: usize,
    pub mae: f64,
    pub rmse: f64,
    pub max_error: f64,
    pub r2: Option<f64>,
    pub label_range: f64,
    pub mae_fraction_of_range: f64,
    pub train_mae: f64,
    pub val_to_train_mae: f64,
    pub accuracy: f64,
    pub median_margin: Option<f64>,
    pub median_margin_db: Option<f64>,
    pub target_unit: String,
    pub checks: Vec<Check>,
}

impl EvalSummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn mode_checks(t: &ModeThresholds, s: &EvalSummary) -> Vec<Check> {
    let mut checks = Vec::new();
    if let Some(l) = t.max_mae_fraction_of_range {
        checks.push(Check::at_most("mae_fraction_of_range", s.mae_fraction_of_range, l));
    }
    if let Some(l) = t.max_val_to_train_mae {
        checks.push(Check::at_most("val_to_train_mae", s.val_to_train_mae, l));
    }
    if let Some(l) = t.min_accuracy {
        checks.push(Check::at_least("accuracy", s.accuracy, l));
    }
    if let Some(l) = t.min_median_margin {
        checks.push(Check::at_least("median_margin", s.median_margin.unwrap_or(f64::NAN), l));
    }
    if let Some(l) = t.min_r2 {
        checks.push(Check::at_least("r2", s.r2.unwrap_or(f64::NAN), l));
    }
    checks
}

/// Evaluates a checkpoint on the validation split, writes the per-sample CSV
/// and a TOML summary, and applies thresholds when given.
pub fn cmd_eval(
    cfg: &HarnessConfig,
    mode: Mode,
    checkpoint: Option<&Path>,
    dataset: Option<&Path>,
    thresholds: Option<&Thresholds>,
) -> Result<(EvalSummary, EvalReport)> {
    let layout = Layout::new(cfg);
    let ckpt = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| layout.checkpoint(mode));
    let data = dataset.map(Path::to_path_buf).unwrap_or_else(|| layout.dataset(mode));
    let trainer = Trainer::load(&ckpt)?;
    let (train, val, manifest) = load_split(cfg, &data)?;
    check_compatible(&trainer, &manifest)?;
    let scale = trainer.meta.target_scale;
    let chunk = cfg.train.eval_chunk;
    let report = evaluate(&trainer.network, &val, scale, chunk)?;
    let train_mae = evaluate(&trainer.network, &train, scale, chunk)?.mae;
    fs::create_dir_all(&layout.root)?;
    report.write_csv(layout.eval_csv(manifest.mode), &manifest.materials)?;

    let mut summary = EvalSummary {
        mode: mode_name(manifest.mode).into(),
        checkpoint: ckpt,
        dataset: data,
        validation_samples: val.len(),
        train_samples: train.len(),
        mae: report.mae,
        rmse: report.rmse,
        max_error: report.max_error,
        r2: report.r2,
        label_range: report.label_range,
        mae_fraction_of_range: if report.label_range > 0.0 { report.mae / report.label_range } else { f64::INFINITY },
        train_mae,
        val_to_train_mae: if train_mae > 0.0 { report.mae / train_mae } else { f64::INFINITY },
        accuracy: report.accuracy,
        median_margin: report.median_margin,
        median_margin_db: report.median_margin_db,
        target_unit: manifest.target_unit.clone(),
        checks: Vec::new(),
    };
    if let Some(t) = thresholds {
        summary.checks = mode_checks(t.for_mode(manifest.mode), &summary);
    }
    fs::write(layout.eval_summary(manifest.mode), to_toml(&summary)?)?;
    Ok((summary, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub checkpoint: PathBuf,
    pub parameters: usize,
    pub latency: LatencyStats,
    pub checks: Vec<Check>,
}

impl BenchSummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Single-triplet latency of a checkpoint on a fixed mid-gray input.
pub fn cmd_bench(
    cfg: &HarnessConfig,
    checkpoint: Option<&Path>,
    mode: Mode,
    thresholds: Option<&Thresholds>,
) -> Result<BenchSummary> {
    let layout = Layout::new(cfg);
    let ckpt = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| layout.checkpoint(mode));
    let trainer = Trainer::load(&ckpt)?;
    let spec = trainer.network.spec();
    let input = NetInput::from_raw(
        spec.input_height,
        spec.input_width,
        (0..3 * spec.input_height * spec.input_width).map(|i| ((i * 7919) % 1000) as f32 / 999.0).collect(),
    )?;
    let latency = bench_latency(&trainer.network, &input, cfg.bench.iterations, cfg.bench.warmup)?;
    let mut checks = Vec::new();
    if let Some(l) = thresholds.and_then(|t| t.bench.max_p95_ms) {
        checks.push(Check::at_most("p95_ms", latency.p95_ms, l));
    }
    let summary = BenchSummary { checkpoint: ckpt, parameters: trainer.network.parameter_count(), latency, checks };
    fs::create_dir_all(&layout.root)?;
    fs::write(layout.bench(), to_toml(&summary)?)?;
    Ok(summary)
}

/// Consecutive network-ready frames (`height x width` values in `[0, 1]` each).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramesFile {
    pub height: usize,
    pub width: usize,
    pub frames: Vec<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPrediction {
    /// 1-based index of the window's last frame.
    pub last_frame: usize,
    pub value: f64,
    pub unit: String,
    pub material: String,
    pub class_logits: Vec<f64>,
    pub class_probs: Vec<f64>,
    pub logit_lp: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictOutput {
    pub predictions: Vec<WindowPrediction>,
}

/// Predicts every stride-1 window of three frames; writes and returns TOML text.
pub fn cmd_predict(cfg: &HarnessConfig, checkpoint: Option<&Path>, mode: Mode, frames: &Path) -> Result<String> {
    let layout = Layout::new(cfg);
    let ckpt = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| layout.checkpoint(mode));
    let trainer = Trainer::load(&ckpt)?;
    let file: FramesFile = serde_json::from_slice(&fs::read(frames)?)?;
    if file.frames.len() < 3 {
        return Err(Error::Config(format!(
            "{} holds {} frame(s); at least 3 consecutive frames are needed",
            frames.display(),
            file.frames.len()
        )));
    }
    let mut inputs = Vec::new();
    for w in file.frames.windows(3) {
        inputs.push(NetInput::from_raw(file.height, file.width, w.concat())?);
    }
    let refs: Vec<&NetInput> = inputs.iter().collect();
    let preds: Vec<Prediction> = predict_batch(&trainer.network, &refs, trainer.meta.target_scale)?;
    let out = PredictOutput {
        predictions: preds
            .into_iter()
            .enumerate()
            .map(|(i, p)| WindowPrediction {
                last_frame: i + 3,
                value: p.value,
                unit: trainer.meta.target_unit.clone(),
                material: trainer.meta.materials[p.material()].clone(),
                class_logits: p.class_logits,
                class_probs: p.class_probs,
                logit_lp: p.material_logit_lp,
            })
            .collect(),
    };
    let text = to_toml(&out)?;
    fs::create_dir_all(&layout.root)?;
    fs::write(layout.predictions(), &text)?;
    Ok(text)
}
