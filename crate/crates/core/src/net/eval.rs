use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::network::Network;
use crate::dataset::{LabeledSample, NetInput, FRAMES_PER_INPUT};
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before taking log-odds.
pub const PROB_CLAMP: f64 = 1e-7;

/// Log-odds `log p - log(1 - p)` of a clamped probability.
pub fn logit_lp(p: f64) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    p.ln() - (1.0 - p).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Depth in µm or volume in µm³.
    pub value: f64,
    pub class_logits: Vec<f64>,
    pub class_probs: Vec<f64>,
    pub material_logit_lp: Vec<f64>,
}

impl Prediction {
    fn from_raw(value: f32, logits: &[f32], target_scale: f64) -> Self {
        let class_logits: Vec<f64> = logits.iter().map(|&v| v as f64).collect();
        let max = class_logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = class_logits.iter().map(|v| (v - max).exp()).collect();
        let sum: f64 = exp.iter().sum();
        let class_probs: Vec<f64> = exp.iter().map(|e| e / sum).collect();
        let material_logit_lp = class_probs.iter().map(|&p| logit_lp(p)).collect();
        Self { value: value as f64 * target_scale, class_logits, class_probs, material_logit_lp }
    }

    /// Most probable class; the lowest index wins ties.
    pub fn material(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.class_probs.iter().enumerate() {
            if p > self.class_probs[best] {
                best = i;
            }
        }
        best
    }

    /// `logit_lp(true) - max over the other classes`; `None` with a single class.
    pub fn margin(&self, true_class: usize) -> Option<f64> {
        let others = self
            .material_logit_lp
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != true_class)
            .map(|(_, &v)| v)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))?;
        Some(self.material_logit_lp[true_class] - others)
    }

    /// `10 log10(lp_true / lp_next)`, defined only when the ratio is positive.
    pub fn margin_db(&self, true_class: usize) -> Option<f64> {
        let lp_true = self.material_logit_lp[true_class];
        let lp_next = lp_true - self.margin(true_class)?;
        let ratio = lp_true / lp_next;
        (ratio.is_finite() && ratio > 0.0).then(|| 10.0 * ratio.log10())
    }
}

fn input_tensor(inputs: &[&NetInput]) -> Result<Tensor<f32>> {
    let first = inputs.first().ok_or_else(|| Error::Shape("no inputs".into()))?;
    let (h, w) = (first.height(), first.width());
    let mut data = Vec::with_capacity(inputs.len() * FRAMES_PER_INPUT * h * w);
    for input in inputs {
        if input.height() != h || input.width() != w {
            return Err(Error::Shape("inputs differ in size".into()));
        }
        if let Some((index, &value)) = input.data().iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InputRange { index, value });
        }
        data.extend_from_slice(input.data());
    }
    Tensor::new(vec![inputs.len(), FRAMES_PER_INPUT, h, w], data)
}

pub fn predict(network: &Network<f32>, input: &NetInput, target_scale: f64) -> Result<Prediction> {
    Ok(predict_batch(network, &[input], target_scale)?.remove(0))
}

pub fn predict_batch(network: &Network<f32>, inputs: &[&NetInput], target_scale: f64) -> Result<Vec<Prediction>> {
    let out = network.forward(&input_tensor(inputs)?)?;
    let k = network.n_classes();
    Ok(out
        .value
        .data()
        .iter()
        .zip(out.logits.data().chunks_exact(k))
        .map(|(&v, l)| Prediction::from_raw(v, l, target_scale))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub iterations: usize,
    pub warmup: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub hardware: String,
}

/// Nearest-rank percentile of already sorted values.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Times single-triplet predictions; needs at least 100 timed iterations.
pub fn bench_latency(
    network: &Network<f32>,
    input: &NetInput,
    iterations: usize,
    warmup: usize,
) -> Result<LatencyStats> {
    if iterations < 100 {
        return Err(Error::Config(format!("latency needs at least 100 iterations, got {iterations}")));
    }
    for _ in 0..warmup {
        predict(network, input, 1.0)?;
    }
    let mut times = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let t = Instant::now();
        std::hint::black_box(predict(network, input, 1.0)?);
        times.push(t.elapsed().as_secs_f64() * 1e3);
    }
    let mean_ms = times.iter().sum::<f64>() / iterations as f64;
    times.sort_by(f64::total_cmp);
    Ok(LatencyStats {
        iterations,
        warmup,
        mean_ms,
        p50_ms: percentile(&times, 0.5),
        p95_ms: percentile(&times, 0.95),
        hardware: hardware_description(),
    })
}

pub fn hardware_description() -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|m| m.trim().to_string())
        })
        .unwrap_or_else(|| "unknown cpu".to_string());
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    format!("{cpu}; {threads} hardware threads; {}-{}", std::env::consts::OS, std::env::consts::ARCH)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub sample_id: usize,
    pub run_id: u32,
    pub pred_value: f64,
    pub true_value: f64,
    pub true_material: usize,
    pub pred_material: usize,
    pub logit_lp: Vec<f64>,
    pub margin: Option<f64>,
    pub margin_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub records: Vec<EvalRecord>,
    pub mae: f64,
    pub rmse: f64,
    pub max_error: f64,
    /// Coefficient of determination; `None` when the true values are constant.
    pub r2: Option<f64>,
    /// `max - min` of the true values.
    pub label_range: f64,
    pub accuracy: f64,
    pub median_margin: Option<f64>,
    pub median_margin_db: Option<f64>,
    pub latency: Option<LatencyStats>,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

impl EvalReport {
    /// Metrics from predictions paired index-by-index with `samples`.
    pub fn from_predictions(preds: &[Prediction], samples: &[LabeledSample]) -> Result<Self> {
        if preds.len() != samples.len() {
            return Err(Error::Shape(format!("{} predictions for {} samples", preds.len(), samples.len())));
        }
        if samples.is_empty() {
            return Err(Error::UndefinedStatistic("evaluation over an empty set"));
        }
        let records: Vec<EvalRecord> = preds
            .iter()
            .zip(samples)
            .enumerate()
            .map(|(i, (p, s))| {
                let true_material = s.material();
                EvalRecord {
                    sample_id: i,
                    run_id: s.run_id,
                    pred_value: p.value,
                    true_value: s.target_value as f64,
                    true_material,
                    pred_material: p.material(),
                    logit_lp: p.material_logit_lp.clone(),
                    margin: p.margin(true_material),
                    margin_db: p.margin_db(true_material),
                }
            })
            .collect();
        Ok(Self::from_records(records))
    }

    pub fn from_records(records: Vec<EvalRecord>) -> Self {
        let n = records.len() as f64;
        let errs: Vec<f64> = records.iter().map(|r| r.pred_value - r.true_value).collect();
        let mae = errs.iter().map(|e| e.abs()).sum::<f64>() / n;
        let rmse = (errs.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
        let max_error = errs.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        let mean_true = records.iter().map(|r| r.true_value).sum::<f64>() / n;
        let ss_tot: f64 = records.iter().map(|r| (r.true_value - mean_true).powi(2)).sum();
        let ss_res: f64 = errs.iter().map(|e| e * e).sum();
        let r2 = (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot);
        let (lo, hi) = records
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.true_value), hi.max(r.true_value)));
        let accuracy = records.iter().filter(|r| r.pred_material == r.true_material).count() as f64 / n;
        let median_margin = median(records.iter().filter_map(|r| r.margin).collect());
        let median_margin_db = median(records.iter().filter_map(|r| r.margin_db).collect());
        Self {
            records,
            mae,
            rmse,
            max_error,
            r2,
            label_range: hi - lo,
            accuracy,
            median_margin,
            median_margin_db,
            latency: None,
        }
    }

    /// Writes `sample_id,pred_value,true_value,true_material,pred_material,logit_0..logit_{K-1}`
    /// followed by the margin columns.
    pub fn write_csv(&self, path: impl AsRef<Path>, materials: &[String]) -> Result<()> {
        let k = self.records.first().map_or(materials.len(), |r| r.logit_lp.len());
        let name = |i: usize| materials.get(i).cloned().unwrap_or_else(|| i.to_string());
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> =
            ["sample_id", "pred_value", "true_value", "true_material", "pred_material"].map(String::from).to_vec();
        header.extend((0..k).map(|i| format!("logit_{i}")));
        header.extend(["margin".to_string(), "margin_db".to_string()]);
        w.write_record(&header)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            let mut row = vec![
                r.sample_id.to_string(),
                r.pred_value.to_string(),
                r.true_value.to_string(),
                name(r.true_material),
                name(r.pred_material),
            ];
            row.extend(r.logit_lp.iter().map(f64::to_string));
            row.extend([opt(r.margin), opt(r.margin_db)]);
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Predicts every sample (in chunks of `chunk`) and fills the report.
pub fn evaluate(
    network: &Network<f32>,
    samples: &[LabeledSample],
    target_scale: f64,
    chunk: usize,
) -> Result<EvalReport> {
    let mut preds = Vec::with_capacity(samples.len());
    for part in samples.chunks(chunk.max(1)) {
        let inputs: Vec<&NetInput> = part.iter().map(|s| &s.input).collect();
        preds.extend(predict_batch(network, &inputs, target_scale)?);
    }
    EvalReport::from_predictions(&preds, samples)
}

/// [`evaluate`] plus a latency measurement on the first sample.
pub fn evaluate_with_latency(
    network: &Network<f32>,
    samples: &[LabeledSample],
    target_scale: f64,
    chunk: usize,
    iterations: usize,
    warmup: usize,
) -> Result<EvalReport> {
    let mut report = evaluate(network, samples, target_scale, chunk)?;
    report.latency = Some(bench_latency(network, &samples[0].input, iterations, warmup)?);
    Ok(report)
}
