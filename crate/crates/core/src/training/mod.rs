//! Optimization loop: losses, AdamW with linear warmup/decay, seeded
//! shuffling and dropout, best-epoch selection, and grid search.

mod grid;
mod loss;
mod optim;
mod seed;

use ndarray::Array1;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::encoder::Backend;
use crate::evaluation::{accuracy, weighted_f1};
use crate::heads::{Head, HeadError, OutputKind};

pub use grid::{apply_param, grid_search, GridEntry, GridOutcome, GridSpec, Leaderboard};
pub use loss::{binary_cross_entropy, cross_entropy, loss_and_grad, LossId, Target};
pub use optim::{AdamW, LinearSchedule};
pub use seed::{global_seed, set_global_seed, SeedStreams, Stream};

pub const HISTORY_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_BATCH_SIZE: usize = 28;
pub const DEFAULT_EPOCHS: usize = 10;
pub const DEFAULT_WARMUP: f64 = 0.15;
pub const DEFAULT_WEIGHT_DECAY: f64 = 0.01;
pub const DEFAULT_MAX_SEQ_LEN: usize = 128;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("no training examples")]
    EmptyData,
    #[error("training targets contain a single class")]
    SingleClass,
    #[error("loss diverged at epoch {epoch}, step {step}: {loss}")]
    Diverged {
        epoch: usize,
        step: usize,
        loss: f64,
    },
    #[error("loss {loss:?} does not match a {kind:?} head")]
    LossMismatch { loss: LossId, kind: OutputKind },
    #[error("example {index}: {reason}")]
    BadTarget { index: usize, reason: String },
    #[error(transparent)]
    Head(#[from] HeadError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    /// Exact-match accuracy.
    #[default]
    Accuracy,
    /// Support-weighted F1 over the classes of a softmax head.
    WeightedF1,
    /// Mean over outputs of the per-output yes/no weighted F1.
    MeanWeightedF1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_seq_len: usize,
    pub warmup: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub seed: u64,
    pub loss: LossId,
    pub metric: MetricId,
    /// Inverse-frequency loss weights.
    pub class_weights: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::for_backend(Backend::Mbert)
    }
}

impl TrainConfig {
    /// Defaults with the backend's peak learning rate.
    pub fn for_backend(backend: Backend) -> TrainConfig {
        TrainConfig {
            max_seq_len: DEFAULT_MAX_SEQ_LEN,
            warmup: DEFAULT_WARMUP,
            batch_size: DEFAULT_BATCH_SIZE,
            epochs: DEFAULT_EPOCHS,
            learning_rate: default_learning_rate(backend),
            weight_decay: DEFAULT_WEIGHT_DECAY,
            dropout: crate::heads::DEFAULT_DROPOUT,
            seed: 0,
            loss: LossId::CrossEntropy,
            metric: MetricId::Accuracy,
            class_weights: false,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !(0.0..1.0).contains(&self.warmup) {
            return Err(TrainError::Config(format!(
                "warmup {} not in [0, 1)",
                self.warmup
            )));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(TrainError::Config(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(TrainError::Config(format!(
                "dropout {} not in [0, 1)",
                self.dropout
            )));
        }
        if self.weight_decay < 0.0 || !self.weight_decay.is_finite() {
            return Err(TrainError::Config(
                "weight decay must be non-negative".into(),
            ));
        }
        if self.max_seq_len == 0 {
            return Err(TrainError::Config("max_seq_len must be positive".into()));
        }
        Ok(())
    }

    pub fn steps_per_epoch(&self, n: usize) -> usize {
        n.div_ceil(self.batch_size)
    }

    pub fn schedule(&self, n: usize) -> LinearSchedule {
        LinearSchedule::new(
            self.learning_rate,
            self.epochs * self.steps_per_epoch(n),
            self.warmup,
        )
    }
}

pub fn default_learning_rate(backend: Backend) -> f64 {
    match backend {
        Backend::Mbert => 2e-5,
        Backend::Xlmr => 5e-5,
        Backend::HashTest => 1e-3,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Example<I> {
    pub input: I,
    pub target: Target,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_metric: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub schema_version: u32,
    pub metric: MetricId,
    pub epochs: Vec<EpochRecord>,
    /// Learning rate used at every optimizer step.
    pub learning_rates: Vec<f64>,
    pub best_epoch: Option<usize>,
    pub best_metric: Option<f64>,
    pub checkpoint: Option<String>,
}

impl TrainHistory {
    fn new(metric: MetricId) -> TrainHistory {
        TrainHistory {
            schema_version: HISTORY_SCHEMA_VERSION,
            metric,
            epochs: Vec::new(),
            learning_rates: Vec::new(),
            best_epoch: None,
            best_metric: None,
            checkpoint: None,
        }
    }
}

fn validate_targets<I>(dim: usize, data: &[Example<I>], loss: LossId) -> Result<(), TrainError> {
    for (index, ex) in data.iter().enumerate() {
        let ok = match (&ex.target, loss) {
            (Target::Class(c), LossId::CrossEntropy) => *c < dim,
            (Target::MultiHot(y), LossId::BinaryCrossEntropy) => y.len() == dim,
            _ => false,
        };
        if !ok {
            return Err(TrainError::BadTarget {
                index,
                reason: format!("{:?} does not fit {loss:?} over {dim} outputs", ex.target),
            });
        }
    }
    let first = &data[0].target;
    if data.iter().all(|e| &e.target == first) {
        return Err(TrainError::SingleClass);
    }
    Ok(())
}

/// Inverse-frequency weights: `n / (K n_c)` per class, or `n_neg / n_pos` per
/// sigmoid output.
pub fn inverse_frequency_weights<I>(data: &[Example<I>], dim: usize) -> Vec<f64> {
    let n = data.len() as f64;
    let mut pos = vec![0usize; dim];
    for ex in data {
        match &ex.target {
            Target::Class(c) => pos[*c] += 1,
            Target::MultiHot(y) => {
                for (c, &b) in y.iter().enumerate() {
                    pos[c] += b as usize;
                }
            }
        }
    }
    let multilabel = matches!(data.first().map(|e| &e.target), Some(Target::MultiHot(_)));
    pos.iter()
        .map(|&p| match (multilabel, p) {
            (_, 0) => 1.0,
            (false, p) => n / (dim as f64 * p as f64),
            (true, p) => (n - p as f64) / p as f64,
        })
        .collect()
}

/// Thresholded predictions vs targets under `metric`.
pub fn score_predictions(outputs: &[Array1<f64>], targets: &[Target], metric: MetricId) -> f64 {
    if outputs.is_empty() {
        return 0.0;
    }
    match &targets[0] {
        Target::Class(_) => {
            let k = outputs[0].len();
            let pred: Vec<usize> = outputs
                .iter()
                .map(|p| (0..k).fold(0, |best, i| if p[i] > p[best] { i } else { best }))
                .collect();
            let gold: Vec<usize> = targets
                .iter()
                .map(|t| match t {
                    Target::Class(c) => *c,
                    Target::MultiHot(_) => usize::MAX,
                })
                .collect();
            let classes: Vec<usize> = (0..k).collect();
            match metric {
                MetricId::Accuracy => accuracy(&pred, &gold).unwrap_or(0.0),
                _ => weighted_f1(&pred, &gold, &classes).unwrap_or(0.0),
            }
        }
        Target::MultiHot(_) => {
            let k = outputs[0].len();
            let pred: Vec<Vec<bool>> = outputs
                .iter()
                .map(|p| p.iter().map(|&v| v >= 0.5).collect())
                .collect();
            let gold: Vec<Vec<bool>> = targets
                .iter()
                .map(|t| match t {
                    Target::MultiHot(y) => y.clone(),
                    Target::Class(_) => vec![],
                })
                .collect();
            match metric {
                MetricId::Accuracy => accuracy(&pred, &gold).unwrap_or(0.0),
                _ => {
                    (0..k)
                        .map(|c| {
                            let p: Vec<bool> = pred.iter().map(|v| v[c]).collect();
                            let g: Vec<bool> = gold.iter().map(|v| v[c]).collect();
                            weighted_f1(&p, &g, &[true, false]).unwrap_or(0.0)
                        })
                        .sum::<f64>()
                        / k as f64
                }
            }
        }
    }
}

pub fn evaluate_head<H: Head>(
    head: &H,
    data: &[Example<H::Input>],
    metric: MetricId,
) -> Result<f64, TrainError> {
    let outputs = data
        .iter()
        .map(|e| head.predict(&e.input))
        .collect::<Result<Vec<_>, _>>()?;
    let targets: Vec<Target> = data.iter().map(|e| e.target.clone()).collect();
    Ok(score_predictions(&outputs, &targets, metric))
}

fn snapshot<H: Head>(head: &mut H) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    head.visit_params(&mut |_, v, _, _| out.push(v.to_vec()));
    out
}

fn restore<H: Head>(head: &mut H, snap: &[Vec<f64>]) {
    let mut k = 0;
    head.visit_params(&mut |_, v, _, _| {
        v.copy_from_slice(&snap[k]);
        k += 1;
    });
}

/// Mini-batch training of one head. Dropout and shuffling draw from streams
/// of `config.seed`; with a dev set the parameters of the best epoch are kept.
pub fn train_head<H: Head>(
    head: &mut H,
    train: &[Example<H::Input>],
    dev: Option<&[Example<H::Input>]>,
    config: &TrainConfig,
) -> Result<TrainHistory, TrainError> {
    config.validate()?;
    let mut history = TrainHistory::new(config.metric);
    if config.epochs == 0 {
        return Ok(history);
    }
    if train.is_empty() {
        return Err(TrainError::EmptyData);
    }
    if LossId::for_output(head.output_kind()) != config.loss {
        return Err(TrainError::LossMismatch {
            loss: config.loss,
            kind: head.output_kind(),
        });
    }
    validate_targets(head.output_dim(), train, config.loss)?;
    let weights = config
        .class_weights
        .then(|| inverse_frequency_weights(train, head.output_dim()));

    let streams = SeedStreams::new(config.seed);
    let mut shuffle_rng = streams.rng(Stream::Shuffle);
    let mut dropout_rng = streams.rng(Stream::Dropout);
    let schedule = config.schedule(train.len());
    let mut optimizer = AdamW::new(config.weight_decay);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut step = 0;
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            head.zero_grad();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let ex = &train[i];
                let (logits, cache) = head.forward(&ex.input, Some(&mut dropout_rng))?;
                let (loss, mut dlogits) =
                    loss_and_grad(config.loss, logits.view(), &ex.target, weights.as_deref())
                        .map_err(|reason| TrainError::BadTarget { index: i, reason })?;
                if !loss.is_finite() {
                    return Err(TrainError::Diverged { epoch, step, loss });
                }
                epoch_loss += loss;
                dlogits *= scale;
                head.backward(&ex.input, &cache, dlogits.view());
            }
            let lr = schedule.lr(step);
            optimizer.step(head, lr);
            history.learning_rates.push(lr);
            step += 1;
        }
        let train_loss = epoch_loss / train.len() as f64;
        let dev_metric = match dev {
            Some(d) if !d.is_empty() => Some(evaluate_head(head, d, config.metric)?),
            _ => None,
        };
        log::info!("epoch {epoch}: train loss {train_loss:.6}, dev {dev_metric:?}");
        if let Some(m) = dev_metric {
            if best.as_ref().is_none_or(|(b, _)| m > *b) {
                best = Some((m, snapshot(head)));
                history.best_epoch = Some(epoch);
                history.best_metric = Some(m);
            }
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            dev_metric,
        });
    }
    match best {
        Some((_, snap)) => restore(head, &snap),
        None => history.best_epoch = Some(config.epochs),
    }
    head.zero_grad();
    Ok(history)
}

/// Result of comparing analytic and central-difference gradients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    pub checked: usize,
}

/// Checks every parameter entry of `head` on one example (dropout off)
/// against a five-point central difference.
/// Entries where both gradients are below `1e-8` count as agreeing.
pub fn gradient_check<H: Head>(
    head: &mut H,
    input: &H::Input,
    target: &Target,
    loss: LossId,
) -> Result<GradCheck, TrainError> {
    let loss_at = |head: &H| -> Result<f64, TrainError> {
        let (logits, _) = head.forward(input, None)?;
        loss_and_grad(loss, logits.view(), target, None)
            .map(|(l, _)| l)
            .map_err(|reason| TrainError::BadTarget { index: 0, reason })
    };
    head.zero_grad();
    let (logits, cache) = head.forward(input, None)?;
    let (_, dlogits) = loss_and_grad(loss, logits.view(), target, None)
        .map_err(|reason| TrainError::BadTarget { index: 0, reason })?;
    head.backward(input, &cache, dlogits.view());
    let mut analytic: Vec<Vec<f64>> = Vec::new();
    head.visit_params(&mut |_, _, g, _| analytic.push(g.to_vec()));

    let h = 1e-3;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (k, grads) in analytic.iter().enumerate() {
        for (j, &a) in grads.iter().enumerate() {
            let set = |head: &mut H, value: Option<f64>| -> f64 {
                let (mut idx, mut prev) = (0, 0.0);
                head.visit_params(&mut |_, v, _, _| {
                    if idx == k {
                        prev = v[j];
                        if let Some(x) = value {
                            v[j] = x;
                        }
                    }
                    idx += 1;
                });
                prev
            };
            let original = set(head, None);
            let at = |head: &mut H, offset: f64| -> Result<f64, TrainError> {
                set(head, Some(original + offset));
                let l = loss_at(head);
                set(head, Some(original));
                l
            };
            let numeric = (-at(head, 2.0 * h)? + 8.0 * at(head, h)? - 8.0 * at(head, -h)?
                + at(head, -2.0 * h)?)
                / (12.0 * h);
            let scale = a.abs().max(numeric.abs());
            if scale > 1e-8 {
                worst = worst.max((a - numeric).abs() / scale);
            }
            checked += 1;
        }
    }
    Ok(GradCheck {
        max_relative_error: worst,
        checked,
    })
}
