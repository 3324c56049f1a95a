use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::metrics::iou_values;
use super::split::{check_ratios, DEFAULT_SPLIT};
use crate::error::{Error, Result};
use crate::reconnet::{forward, Model, ModelConfig, ModelParams};
use crate::tensor::checkpoint::Checkpoint;
use crate::tensor::{Graph, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub split_ratios: [f64; 3],
    /// Threshold of the per-epoch validation IoU.
    pub iou_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            learning_rate: 1e-3,
            batch_size: 4,
            seed: 0,
            split_ratios: DEFAULT_SPLIT,
            iou_threshold: 0.3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.into()));
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("betas must lie in [0, 1)");
        }
        if !(self.learning_rate > 0.0) || !(self.epsilon > 0.0) {
            return bad("learning rate and epsilon must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.iou_threshold > 0.0 && self.iou_threshold < 1.0) {
            return bad("IoU threshold must lie in (0, 1)");
        }
        check_ratios(self.split_ratios)
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.learning_rate, beta1: self.beta1, beta2: self.beta2, epsilon: self.epsilon }
    }
}

/// One training example: the input views in model order and the `[R, R, R]` target.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub images: Vec<Tensor>,
    pub target: Tensor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_iou: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub epochs: Vec<EpochMetrics>,
}

impl Metrics {
    pub fn best_val(&self) -> Option<&EpochMetrics> {
        self.epochs
            .iter()
            .filter(|e| e.val_iou.is_some())
            .fold(None, |best: Option<&EpochMetrics>, e| match best {
                Some(b) if b.val_iou >= e.val_iou => Some(b),
                _ => Some(e),
            })
    }

    pub fn last(&self) -> Option<&EpochMetrics> {
        self.epochs.last()
    }

    /// `epoch,train_loss,val_iou` rows; no header.
    pub fn csv_rows(&self) -> String {
        self.epochs.iter().map(epoch_row).collect()
    }
}

pub fn epoch_row(e: &EpochMetrics) -> String {
    let val = e.val_iou.map(|v| format!("{v:.9}")).unwrap_or_default();
    format!("{},{:.12},{}\n", e.epoch, e.train_loss, val)
}

pub const METRICS_HEADER: &str = "epoch,train_loss,val_iou";

/// Everything needed to continue a run: parameters, optimizer moments and progress.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub params: ModelParams,
    pub adam: AdamState,
    pub epochs_done: usize,
    /// Adam steps taken so far.
    pub step: u64,
}

impl TrainState {
    pub fn fresh(cfg: &ModelConfig) -> Result<Self> {
        Ok(TrainState { params: ModelParams::init(cfg)?, adam: AdamState::default(), epochs_done: 0, step: 0 })
    }

    /// Parameters plus `adam.m/*`, `adam.v/*` and `meta/*` records.
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = self.params.to_checkpoint();
        for (n, t) in &self.adam.m {
            ck.push(format!("adam.m/{n}"), t.clone());
        }
        for (n, t) in &self.adam.v {
            ck.push(format!("adam.v/{n}"), t.clone());
        }
        ck.push("meta/epoch", Tensor::scalar(self.epochs_done as f64));
        ck.push("meta/step", Tensor::scalar(self.step as f64));
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint, cfg: &ModelConfig) -> Result<Self> {
        let params = ModelParams::from_checkpoint(ck, cfg)?;
        let mut adam = AdamState::default();
        for (name, t) in &ck.tensors {
            if let Some(n) = name.strip_prefix("adam.m/") {
                adam.m.insert(n.to_string(), t.clone());
            } else if let Some(n) = name.strip_prefix("adam.v/") {
                adam.v.insert(n.to_string(), t.clone());
            }
        }
        let meta = |k: &str| ck.get(k).map(|t| t.item() as u64).unwrap_or(0);
        Ok(TrainState { params, adam, epochs_done: meta("meta/epoch") as usize, step: meta("meta/step") })
    }
}

fn non_finite(epoch: usize, step: u64, loss: f64) -> Error {
    Error::NonFiniteLoss { epoch, step, loss }
}

/// True when some prediction rounded to exactly 0 or 1 on the wrong side of its
/// label: the unclamped BCE is infinite there, which the clamp would otherwise hide.
pub fn saturated_wrong(pred: &Tensor, target: &Tensor) -> bool {
    pred.data().iter().zip(target.data()).any(|(&p, &t)| (p >= 1.0 && t < 0.5) || (p <= 0.0 && t >= 0.5))
}

/// Clamped-BCE loss and parameter gradients of one sample. The loss is reported
/// as infinite when [`saturated_wrong`] holds.
pub fn sample_gradients(cfg: &ModelConfig, params: &ModelParams, s: &Sample) -> Result<(f64, BTreeMap<String, Tensor>)> {
    let mut g = Graph::new();
    let p = params.bind(&mut g, true);
    let xs: Vec<Var> = s.images.iter().map(|t| g.constant(t.clone())).collect();
    let out = forward(&mut g, cfg, &p, &xs)?;
    let loss = g.bce(out, &s.target)?;
    let grads = g.backward(loss)?;
    let map = p.0.iter().map(|(n, &v)| (n.clone(), grads.get_or_zeros(v, g.shape(v)))).collect::<BTreeMap<_, _>>();
    let value = if saturated_wrong(g.value(out), &s.target) { f64::INFINITY } else { g.value(loss).item() };
    Ok((value, map))
}

/// Mean IoU of `model` over `samples` at threshold `t`.
pub fn mean_iou(model: &Model, samples: &[Sample], t: f64) -> Result<f64> {
    let ious = samples
        .par_iter()
        .map(|s| iou_values(model.predict(&s.images)?.data(), s.target.data(), t))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ious.iter().sum::<f64>() / ious.len().max(1) as f64)
}

fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mix = seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix));
    order
}

/// Minibatch Adam on mean voxel BCE, continuing from `state` until `tc.epochs`
/// epochs are done. `on_epoch` sees every finished epoch (e.g. to checkpoint).
pub fn train_from(
    cfg: &ModelConfig,
    tc: &TrainConfig,
    state: &mut TrainState,
    train_set: &[Sample],
    val_set: &[Sample],
    mut on_epoch: impl FnMut(&EpochMetrics, &TrainState) -> Result<()>,
) -> Result<Metrics> {
    cfg.validate()?;
    tc.validate()?;
    state.params.check(cfg)?;
    if train_set.is_empty() {
        return Err(Error::TooFewCases(0));
    }
    let adam = tc.adam();
    let mut metrics = Metrics::default();
    while state.epochs_done < tc.epochs {
        let epoch = state.epochs_done + 1;
        let order = epoch_order(train_set.len(), tc.seed, epoch);
        let mut loss_sum = 0.0;
        for batch in order.chunks(tc.batch_size) {
            let step = state.step + 1;
            let results: Vec<(f64, BTreeMap<String, Tensor>)> = batch
                .par_iter()
                .map(|&i| sample_gradients(cfg, &state.params, &train_set[i]))
                .collect::<Result<_>>()
                .map_err(|e| match e {
                    Error::NonFinite(_) => non_finite(epoch, step, f64::NAN),
                    other => other,
                })?;
            let scale = 1.0 / batch.len() as f64;
            let mut grads: BTreeMap<String, Tensor> = BTreeMap::new();
            let mut batch_loss = 0.0;
            for (loss, gs) in results {
                batch_loss += loss;
                for (n, g) in gs {
                    match grads.get_mut(&n) {
                        Some(acc) => acc.data_mut().iter_mut().zip(g.data()).for_each(|(a, b)| *a += b),
                        None => {
                            grads.insert(n, g);
                        }
                    }
                }
            }
            if !batch_loss.is_finite() || grads.values().any(|g| !g.all_finite()) {
                return Err(non_finite(epoch, step, batch_loss * scale));
            }
            grads.values_mut().for_each(|g| g.data_mut().iter_mut().for_each(|v| *v *= scale));
            adam_step(&mut state.params.tensors, &grads, &mut state.adam, step, &adam)?;
            if state.params.tensors.values().any(|t| !t.all_finite()) {
                return Err(non_finite(epoch, step, batch_loss * scale));
            }
            state.step = step;
            loss_sum += batch_loss;
        }
        let model = Model { config: cfg.clone(), params: state.params.clone() };
        let val_iou = if val_set.is_empty() { None } else { Some(mean_iou(&model, val_set, tc.iou_threshold)?) };
        state.epochs_done = epoch;
        let em = EpochMetrics { epoch, train_loss: loss_sum / train_set.len() as f64, val_iou };
        on_epoch(&em, state)?;
        metrics.epochs.push(em);
    }
    Ok(metrics)
}

/// Trains from a fresh seed-determined initialisation.
pub fn train(cfg: &ModelConfig, tc: &TrainConfig, train_set: &[Sample], val_set: &[Sample]) -> Result<(ModelParams, Metrics)> {
    let mut state = TrainState::fresh(cfg)?;
    let metrics = train_from(cfg, tc, &mut state, train_set, val_set, |_, _| Ok(()))?;
    Ok((state.params, metrics))
}
