use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{joint_loss, make_batch};
use super::network::{build_network, Network, NetworkSpec};
use crate::dataset::{LabeledSample, Mode};
use crate::tensor::{read_checkpoint, write_checkpoint, AdamConfig, AdamState, CheckpointFile, NamedArray};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lambda_cls: f64,
    pub seed: u64,
    /// Fraction of runs held out for validation.
    pub validation_fraction: f64,
    /// Samples per inference chunk when computing validation loss.
    pub eval_chunk: usize,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 256,
            epochs: 30,
            lambda_cls: 1.0,
            seed: 7,
            validation_fraction: 0.2,
            eval_chunk: 64,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.batch_size == 0 {
            errs.push("train.batch_size must be at least 1".to_string());
        }
        if !(self.lambda_cls >= 0.0) {
            errs.push(format!("train.lambda_cls must be non-negative, got {}", self.lambda_cls));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            errs.push(format!("train.validation_fraction must lie in (0, 1), got {}", self.validation_fraction));
        }
        if self.eval_chunk == 0 {
            errs.push("train.eval_chunk must be at least 1".to_string());
        }
        let a = &self.adam;
        if !(a.lr > 0.0) || !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.epsilon > 0.0) {
            errs.push(format!("train.adam has invalid hyperparameters: {a:?}"));
        }
        errs
    }
}

/// What a trained model needs to turn raw outputs back into physical answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub mode: Mode,
    pub materials: Vec<String>,
    pub target_scale: f64,
    pub target_unit: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub rmse: f64,
    pub xent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Sample-weighted mean of the mini-batch losses seen during the epoch.
    pub train_loss: f64,
    pub val: Option<LossBreakdown>,
}

/// Network, optimizer state and training history; everything needed to resume.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub network: Network<f32>,
    pub adam: AdamState<f32>,
    pub meta: ModelMeta,
    pub history: Vec<EpochLog>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    network: NetworkSpec,
    meta: ModelMeta,
    adam: AdamConfig,
    adam_step: u64,
    history: Vec<EpochLog>,
}

impl Trainer {
    pub fn new(spec: &NetworkSpec, meta: ModelMeta, config: &TrainConfig) -> Result<Self> {
        if meta.materials.len() != spec.n_classes {
            return Err(Error::Incompatible(format!(
                "network has {} classes, model metadata lists {} materials",
                spec.n_classes,
                meta.materials.len()
            )));
        }
        let network = build_network::<f32>(spec, config.seed)?;
        let sizes: Vec<usize> = network.named_params().iter().map(|(_, p)| p.len()).collect();
        Ok(Self { adam: AdamState::new(config.adam, &sizes), network, meta, history: Vec::new() })
    }

    pub fn epochs_done(&self) -> usize {
        self.history.len()
    }

    /// Joint loss over a whole sample set: RMSE across all samples plus the mean cross-entropy.
    pub fn dataset_loss(&self, samples: &[LabeledSample], config: &TrainConfig) -> Result<LossBreakdown> {
        dataset_loss(&self.network, samples, self.meta.target_scale, config)
    }

    /// One pass over `train` in a shuffled order fixed by `(seed, epoch)`.
    pub fn run_epoch(
        &mut self,
        train: &[LabeledSample],
        val: &[LabeledSample],
        config: &TrainConfig,
    ) -> Result<EpochLog> {
        if train.is_empty() {
            return Err(Error::Config("training set is empty".into()));
        }
        let epoch = self.history.len() + 1;
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        order.shuffle(&mut rng);

        let mut weighted = 0.0;
        for (b, idx) in order.chunks(config.batch_size.max(1)).enumerate() {
            let refs: Vec<&LabeledSample> = idx.iter().map(|&i| &train[i]).collect();
            let batch = make_batch::<f32>(&refs, self.meta.target_scale)?;
            self.network.zero_grad();
            let out = self.network.forward_train(&batch.inputs)?;
            let loss = joint_loss(&out.value, &batch.targets, &out.logits, &batch.onehot, config.lambda_cls)?;
            if !loss.total.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b + 1 });
            }
            self.network.backward(&loss.grad_value, &loss.grad_logits)?;
            self.adam.step(&mut self.network.named_params_mut())?;
            weighted += loss.total as f64 * refs.len() as f64;
        }
        let val = if val.is_empty() { None } else { Some(self.dataset_loss(val, config)?) };
        let log = EpochLog { epoch, train_loss: weighted / train.len() as f64, val };
        log::info!(
            "epoch {epoch}: train {:.5}{}",
            log.train_loss,
            val.map(|v| format!(", val {:.5}", v.total)).unwrap_or_default()
        );
        self.history.push(log);
        Ok(log)
    }

    /// Runs epochs until `config.epochs` have been completed in total.
    pub fn fit(&mut self, train: &[LabeledSample], val: &[LabeledSample], config: &TrainConfig) -> Result<Vec<EpochLog>> {
        let mut logs = Vec::new();
        while self.epochs_done() < config.epochs {
            logs.push(self.run_epoch(train, val, config)?);
        }
        Ok(logs)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let header = CheckpointHeader {
            network: self.network.spec().clone(),
            meta: self.meta.clone(),
            adam: self.adam.config,
            adam_step: self.adam.step,
            history: self.history.clone(),
        };
        let params = self.network.named_params();
        let mut arrays: Vec<NamedArray> = params
            .iter()
            .map(|(n, p)| NamedArray { name: n.clone(), shape: p.shape().to_vec(), data: p.data().to_vec() })
            .collect();
        for (prefix, moments) in [("adam.m", &self.adam.m), ("adam.v", &self.adam.v)] {
            for ((n, p), m) in params.iter().zip(moments) {
                arrays.push(NamedArray { name: format!("{prefix}.{n}"), shape: p.shape().to_vec(), data: m.clone() });
            }
        }
        write_checkpoint(&CheckpointFile { architecture: serde_json::to_value(header)?, arrays }, path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = read_checkpoint(path)?;
        let header: CheckpointHeader = serde_json::from_value(file.architecture)?;
        let mut network = build_network::<f32>(&header.network, 0)?;
        let n = network.named_params().len();
        if file.arrays.len() != 3 * n {
            return Err(Error::Incompatible(format!(
                "checkpoint holds {} arrays, the declared network needs {}",
                file.arrays.len(),
                3 * n
            )));
        }
        let mut arrays = file.arrays.into_iter();
        let params: Vec<_> = arrays.by_ref().take(n).map(|a| (a.name, a.shape, a.data)).collect();
        network.load_params(&params)?;
        let mut adam = AdamState::new(header.adam, &[]);
        adam.step = header.adam_step;
        for (prefix, store) in [("adam.m", &mut adam.m), ("adam.v", &mut adam.v)] {
            for ((name, shape, _), a) in params.iter().zip(arrays.by_ref().take(n)) {
                if a.name != format!("{prefix}.{name}") || &a.shape != shape {
                    return Err(Error::Incompatible(format!("optimizer array `{}` does not match `{name}`", a.name)));
                }
                store.push(a.data);
            }
        }
        Ok(Self { network, adam, meta: header.meta, history: header.history })
    }
}

pub fn dataset_loss(
    network: &Network<f32>,
    samples: &[LabeledSample],
    target_scale: f64,
    config: &TrainConfig,
) -> Result<LossBreakdown> {
    if samples.is_empty() {
        return Err(Error::Config("cannot compute the loss of an empty set".into()));
    }
    let (mut sq, mut xent) = (0.0f64, 0.0f64);
    for chunk in samples.chunks(config.eval_chunk.max(1)) {
        let refs: Vec<&LabeledSample> = chunk.iter().collect();
        let batch = make_batch::<f32>(&refs, target_scale)?;
        let out = network.forward(&batch.inputs)?;
        let loss = joint_loss(&out.value, &batch.targets, &out.logits, &batch.onehot, config.lambda_cls)?;
        sq += out
            .value
            .data()
            .iter()
            .zip(batch.targets.data())
            .map(|(&p, &t)| (p as f64 - t as f64).powi(2))
            .sum::<f64>();
        xent += loss.xent as f64 * chunk.len() as f64;
    }
    let n = samples.len() as f64;
    let rmse = (sq / n + crate::tensor::RMSE_EPS).sqrt();
    let xent = xent / n;
    Ok(LossBreakdown { total: rmse + config.lambda_cls * xent, rmse, xent })
}

/// Builds a fresh network and trains it for `config.epochs` epochs.
pub fn train(
    train: &[LabeledSample],
    val: &[LabeledSample],
    spec: &NetworkSpec,
    meta: ModelMeta,
    config: &TrainConfig,
) -> Result<Trainer> {
    let errs = config.validate();
    if !errs.is_empty() {
        return Err(Error::Config(errs.join("; ")));
    }
    let mut trainer = Trainer::new(spec, meta, config)?;
    trainer.fit(train, val, config)?;
    Ok(trainer)
}
