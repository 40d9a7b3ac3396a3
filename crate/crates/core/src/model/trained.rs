use std::collections::BTreeMap;

use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FeatureExtractor, ModelError, ModelKind, ModelSpec, PostFeatures, Task};
use crate::corpus::{Coarse, Corpus, FineLabel, FineSet};
use crate::encoder::{fit_pca, flatten_for_classical, PcaReducer};
use crate::evaluation::{
    coarse_report, fine_grained_report, EvalMode, EvaluationReport, PredictionRecord,
};
use crate::heads::classical::{classical_fit, ClassicalModel};
use crate::heads::{
    fuse, merge_scores, CellKind, Head, MlpConfig, MlpHead, OvrEnsemble, OvrMode, RecurrentConfig,
    RecurrentHead,
};
use crate::textprep::{PrepConfig, Preprocessor};
use crate::training::{
    grid_search, train_head, Example, GridOutcome, GridSpec, LossId, MetricId, SeedStreams, Stream,
    Target, TrainConfig, TrainHistory, HISTORY_SCHEMA_VERSION,
};

/// A corpus with its frozen features, aligned by position.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub corpus: Corpus,
    pub features: Vec<PostFeatures>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.corpus.posts().iter().map(|p| p.id.clone()).collect()
    }
}

pub fn prepare(extractor: &FeatureExtractor, corpus: &Corpus) -> Result<Dataset, ModelError> {
    Ok(Dataset {
        features: extractor.extract_all(corpus.posts())?,
        corpus: corpus.clone(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainedHead {
    Mlp(MlpHead),
    Recurrent(RecurrentHead),
    Classical {
        model: ClassicalModel,
        pca: Option<PcaReducer>,
    },
    Ovr(OvrEnsemble),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub prep: PrepConfig,
    pub config: TrainConfig,
    pub head: TrainedHead,
}

/// Per-head training histories of one run; OvR runs have one per member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunHistory {
    pub schema_version: u32,
    pub model: String,
    pub heads: BTreeMap<String, TrainHistory>,
}

/// Preprocesses, encodes and trains in one call.
pub fn train(
    spec: &ModelSpec,
    prep: PrepConfig,
    train: &Corpus,
    dev: Option<&Corpus>,
    config: &TrainConfig,
) -> Result<(TrainedModel, RunHistory), ModelError> {
    let extractor = FeatureExtractor::new(spec, Preprocessor::new(prep))?;
    let train = prepare(&extractor, train)?;
    let dev = dev.map(|d| prepare(&extractor, d)).transpose()?;
    train_on(spec, prep, &train, dev.as_ref(), config)
}

fn pooled_input(kind: ModelKind, f: &PostFeatures) -> Result<Array1<f64>, ModelError> {
    Ok(match kind {
        ModelKind::Coghm => fuse(f.pooled[0].view(), f.pooled[1].view())?,
        _ => f.pooled[0].clone(),
    })
}

fn sequence_of(f: &PostFeatures) -> Result<&Array2<f64>, ModelError> {
    f.sequence
        .as_ref()
        .ok_or_else(|| ModelError::Spec("features were extracted without sequences".into()))
}

fn classical_row(
    f: &PostFeatures,
    pca: Option<&PcaReducer>,
    flatten_len: usize,
) -> Result<Vec<f64>, ModelError> {
    let seq = sequence_of(f)?;
    Ok(match pca {
        Some(r) => flatten_for_classical(r.transform(seq.view())?.view(), flatten_len),
        None => flatten_for_classical(seq.view(), flatten_len),
    })
}

fn classical_matrix(
    data: &Dataset,
    pca: Option<&PcaReducer>,
    flatten_len: usize,
) -> Result<Array2<f64>, ModelError> {
    let rows = data
        .features
        .par_iter()
        .map(|f| classical_row(f, pca, flatten_len))
        .collect::<Result<Vec<_>, _>>()?;
    let width = rows.first().map_or(0, Vec::len);
    Ok(Array2::from_shape_vec((rows.len(), width), rows.concat()).expect("equal widths"))
}

fn recurrent_cell(kind: ModelKind) -> CellKind {
    match kind {
        ModelKind::Bigru => CellKind::Gru,
        _ => CellKind::Lstm,
    }
}

fn coarse_target(data: &Dataset, i: usize) -> Target {
    Target::Class(data.corpus.posts()[i].labels.coarse().index())
}

fn hostile_rows(data: &Dataset) -> Vec<usize> {
    (0..data.len())
        .filter(|&i| data.corpus.posts()[i].labels.is_hostile())
        .collect()
}

fn pooled_examples(
    spec: &ModelSpec,
    data: &Dataset,
    rows: &[usize],
    target: impl Fn(usize) -> Target,
) -> Result<Vec<Example<Array1<f64>>>, ModelError> {
    rows.iter()
        .map(|&i| {
            Ok(Example {
                input: pooled_input(spec.kind, &data.features[i])?,
                target: target(i),
            })
        })
        .collect()
}

fn mlp_config(spec: &ModelSpec, base: MlpConfig, config: &TrainConfig) -> MlpConfig {
    MlpConfig {
        dropout: config.dropout,
        ..base.with_hidden(spec.mlp_hidden)
    }
}

fn history_map(
    entries: impl IntoIterator<Item = (String, TrainHistory)>,
) -> BTreeMap<String, TrainHistory> {
    entries.into_iter().collect()
}

/// Trains the head described by `spec` on precomputed features. The loss is
/// fixed by the head: cross-entropy for softmax heads, binary cross-entropy
/// for the multi-label head.
pub fn train_on(
    spec: &ModelSpec,
    prep: PrepConfig,
    train: &Dataset,
    dev: Option<&Dataset>,
    config: &TrainConfig,
) -> Result<(TrainedModel, RunHistory), ModelError> {
    spec.validate()?;
    config.validate()?;
    if train.is_empty() {
        return Err(crate::training::TrainError::EmptyData.into());
    }
    let streams = SeedStreams::new(config.seed);
    let mut cfg = config.clone();
    let all: Vec<usize> = (0..train.len()).collect();
    let dev_all: Vec<usize> = dev.map_or(vec![], |d| (0..d.len()).collect());

    let (head, heads) = match spec.kind {
        ModelKind::Fmbert | ModelKind::Fxlmr | ModelKind::Coghm => {
            cfg.loss = LossId::CrossEntropy;
            let tr = pooled_examples(spec, train, &all, |i| coarse_target(train, i))?;
            let dv = dev
                .map(|d| pooled_examples(spec, d, &dev_all, |i| coarse_target(d, i)))
                .transpose()?;
            let mc = mlp_config(spec, MlpConfig::binary(spec.pooled_width()), &cfg);
            let mut head = MlpHead::new(mc, &mut streams.rng(Stream::Init));
            let h = train_head(&mut head, &tr, dv.as_deref(), &cfg)?;
            (
                TrainedHead::Mlp(head),
                history_map([("head".to_string(), h)]),
            )
        }
        ModelKind::Bilstm | ModelKind::Bigru => {
            cfg.loss = LossId::CrossEntropy;
            let seq_examples = |d: &Dataset| -> Result<Vec<Example<Array2<f64>>>, ModelError> {
                (0..d.len())
                    .map(|i| {
                        Ok(Example {
                            input: sequence_of(&d.features[i])?.clone(),
                            target: coarse_target(d, i),
                        })
                    })
                    .collect()
            };
            let tr = seq_examples(train)?;
            let dv = dev.map(seq_examples).transpose()?;
            let rc = RecurrentConfig {
                dropout: cfg.dropout,
                ..RecurrentConfig::new(recurrent_cell(spec.kind), spec.encoders[0].d)
                    .with_hidden(spec.rnn_hidden, spec.mlp_hidden)
            };
            let mut head = RecurrentHead::new(rc, &mut streams.rng(Stream::Init));
            let h = train_head(&mut head, &tr, dv.as_deref(), &cfg)?;
            (
                TrainedHead::Recurrent(head),
                history_map([("head".to_string(), h)]),
            )
        }
        ModelKind::Dmlmc => {
            cfg.loss = LossId::BinaryCrossEntropy;
            let multi_hot = |d: &Dataset, i: usize| {
                Target::MultiHot(d.corpus.posts()[i].labels.fine().to_multi_hot().to_vec())
            };
            let tr = pooled_examples(spec, train, &hostile_rows(train), |i| multi_hot(train, i))?;
            let dv = dev
                .map(|d| pooled_examples(spec, d, &hostile_rows(d), |i| multi_hot(d, i)))
                .transpose()?;
            let mc = mlp_config(spec, MlpConfig::multilabel(spec.pooled_width()), &cfg);
            let mut head = MlpHead::new(mc, &mut streams.rng(Stream::Init));
            let h = train_head(&mut head, &tr, dv.as_deref(), &cfg)?;
            (
                TrainedHead::Mlp(head),
                history_map([("head".to_string(), h)]),
            )
        }
        ModelKind::Ovr => {
            cfg.loss = LossId::CrossEntropy;
            let members = FineLabel::ALL
                .into_par_iter()
                .map(|label| train_ovr_member(spec, train, dev, &cfg, label))
                .collect::<Result<Vec<_>, _>>()?;
            let mut ensemble = OvrEnsemble::new(spec.threshold);
            let mut hist = BTreeMap::new();
            for (label, head, h) in members {
                ensemble.set_member(label, head);
                hist.insert(label.as_str().to_string(), h);
            }
            (TrainedHead::Ovr(ensemble), hist)
        }
        ModelKind::Classical { .. } => {
            let params = spec.classical.expect("validated");
            let pca = if params.use_pca {
                let rows: Vec<ArrayView2<f64>> = train
                    .features
                    .iter()
                    .map(|f| sequence_of(f).map(|s| s.view()))
                    .collect::<Result<_, _>>()?;
                let stacked = concatenate(Axis(0), &rows)
                    .map_err(|e| ModelError::Spec(format!("stacking subword vectors: {e}")))?;
                Some(fit_pca(stacked.view(), spec.pca_k.min(stacked.ncols()))?)
            } else {
                None
            };
            let x = classical_matrix(train, pca.as_ref(), spec.flatten_len)?;
            let y: Vec<bool> = train
                .corpus
                .posts()
                .iter()
                .map(|p| p.labels.is_hostile())
                .collect();
            let head = params.with_seed(streams.derive_u64(Stream::Bootstrap));
            let model = classical_fit(x.view(), &y, &head)?;
            (TrainedHead::Classical { model, pca }, BTreeMap::new())
        }
    };
    let model = TrainedModel {
        spec: spec.clone(),
        prep,
        config: cfg,
        head,
    };
    let history = RunHistory {
        schema_version: HISTORY_SCHEMA_VERSION,
        model: spec.kind.to_string(),
        heads,
    };
    Ok((model, history))
}

/// One OvR member on the hostile posts, yes = output 0. Each member draws
/// from its own seed family so retraining one leaves the others unchanged.
pub fn train_ovr_member(
    spec: &ModelSpec,
    train: &Dataset,
    dev: Option<&Dataset>,
    config: &TrainConfig,
    label: FineLabel,
) -> Result<(FineLabel, MlpHead, TrainHistory), ModelError> {
    let mut cfg = config.clone();
    cfg.seed = SeedStreams::new(config.seed)
        .child(label.index() as u64)
        .seed();
    let yes_no = |d: &Dataset, i: usize| {
        Target::Class(if d.corpus.posts()[i].labels.fine().contains(label) {
            0
        } else {
            1
        })
    };
    let tr = pooled_examples(spec, train, &hostile_rows(train), |i| yes_no(train, i))?;
    let dv = dev
        .map(|d| pooled_examples(spec, d, &hostile_rows(d), |i| yes_no(d, i)))
        .transpose()?;
    let mc = mlp_config(spec, MlpConfig::binary(spec.pooled_width()), &cfg);
    let mut head = MlpHead::new(mc, &mut SeedStreams::new(cfg.seed).rng(Stream::Init));
    let h = train_head(&mut head, &tr, dv.as_deref(), &cfg)?;
    Ok((label, head, h))
}

fn coarse_scores(p_hostile: f64) -> BTreeMap<String, f64> {
    BTreeMap::from([
        (Coarse::Hostile.as_str().to_string(), p_hostile),
        (Coarse::NonHostile.as_str().to_string(), 1.0 - p_hostile),
    ])
}

fn ovr_mode(mode: EvalMode) -> OvrMode {
    match mode {
        EvalMode::GoldHostile => OvrMode::GoldHostile,
        EvalMode::Pipeline => OvrMode::Pipeline,
    }
}

impl TrainedModel {
    pub fn task(&self) -> Task {
        self.spec.kind.task()
    }

    /// `(is_hostile, p_hostile)` for a coarse model.
    fn coarse_one(&self, f: &PostFeatures) -> Result<(bool, f64), ModelError> {
        match &self.head {
            TrainedHead::Mlp(h) => {
                let p = h.predict(&pooled_input(self.spec.kind, f)?)?;
                Ok((p[0] >= p[1], p[0]))
            }
            TrainedHead::Recurrent(h) => {
                let p = h.predict(sequence_of(f)?)?;
                Ok((p[0] >= p[1], p[0]))
            }
            TrainedHead::Classical { model, pca } => {
                let x = Array1::from(classical_row(f, pca.as_ref(), self.spec.flatten_len)?);
                Ok((model.predict(x.view())?, model.score(x.view())?))
            }
            TrainedHead::Ovr(_) => Err(ModelError::Spec("OvR is a fine-grained model".into())),
        }
    }

    /// Yes-probabilities of the four fine classes.
    pub fn fine_scores(&self, f: &PostFeatures) -> Result<[f64; 4], ModelError> {
        let pooled = pooled_input(self.spec.kind, f)?;
        match &self.head {
            TrainedHead::Mlp(h) if self.task() == Task::Fine => {
                let p = h.predict(&pooled)?;
                Ok([p[0], p[1], p[2], p[3]])
            }
            TrainedHead::Ovr(e) => Ok(e.scores(pooled.view())?),
            _ => Err(ModelError::Spec(format!(
                "{} is a coarse model",
                self.spec.kind
            ))),
        }
    }

    /// Predictions for every post of `data`, in order. Coarse models leave
    /// the fine set empty. Fine models predict the thresholded set; under
    /// gold-hostile evaluation every post is treated as hostile and an empty
    /// set falls back to the top class, while in pipeline mode a post with
    /// no fine label is non-hostile.
    pub fn predict(
        &self,
        data: &Dataset,
        mode: EvalMode,
    ) -> Result<Vec<PredictionRecord>, ModelError> {
        let posts = data.corpus.posts();
        data.features
            .par_iter()
            .zip(posts.par_iter())
            .map(|(f, post)| match self.task() {
                Task::Coarse => {
                    let (hostile, p) = self.coarse_one(f)?;
                    Ok(PredictionRecord {
                        id: post.id.clone(),
                        coarse: if hostile {
                            Coarse::Hostile
                        } else {
                            Coarse::NonHostile
                        },
                        fine: FineSet::default(),
                        scores: coarse_scores(p),
                    })
                }
                Task::Fine => {
                    let scores = self.fine_scores(f)?;
                    let fine = merge_scores(scores, self.spec.threshold, ovr_mode(mode));
                    let coarse = if mode == EvalMode::GoldHostile || !fine.is_empty() {
                        Coarse::Hostile
                    } else {
                        Coarse::NonHostile
                    };
                    Ok(PredictionRecord {
                        id: post.id.clone(),
                        coarse,
                        fine,
                        scores: FineLabel::ALL
                            .iter()
                            .map(|l| (l.as_str().to_string(), scores[l.index()]))
                            .collect(),
                    })
                }
            })
            .collect()
    }
}

/// Combines a coarse model's verdicts with fine predictions made in
/// gold-hostile mode: posts judged hostile keep their (non-empty) fine set,
/// the rest get none.
pub fn gate_predictions(
    coarse: &[PredictionRecord],
    fine: &[PredictionRecord],
) -> Result<Vec<PredictionRecord>, ModelError> {
    if coarse.len() != fine.len() {
        return Err(ModelError::Spec(format!(
            "{} coarse vs {} fine predictions",
            coarse.len(),
            fine.len()
        )));
    }
    coarse
        .iter()
        .zip(fine)
        .map(|(c, f)| {
            if c.id != f.id {
                return Err(ModelError::Spec(format!(
                    "prediction ids {} and {} differ",
                    c.id, f.id
                )));
            }
            let mut scores = c.scores.clone();
            scores.extend(f.scores.iter().map(|(k, v)| (k.clone(), *v)));
            Ok(PredictionRecord {
                id: c.id.clone(),
                coarse: c.coarse,
                fine: if c.coarse == Coarse::Hostile {
                    f.fine
                } else {
                    FineSet::default()
                },
                scores,
            })
        })
        .collect()
}

pub fn evaluate_model(
    model: &TrainedModel,
    data: &Dataset,
    mode: EvalMode,
) -> Result<EvaluationReport, ModelError> {
    let preds = model.predict(data, mode)?;
    Ok(match model.task() {
        Task::Coarse => EvaluationReport::new(Some(coarse_report(&preds, &data.corpus)?), None),
        Task::Fine => {
            EvaluationReport::new(None, Some(fine_grained_report(&preds, &data.corpus, mode)?))
        }
    })
}

/// The dev-set figure used for model selection.
pub fn selection_metric(report: &EvaluationReport, metric: MetricId) -> Option<f64> {
    match (&report.coarse, &report.fine, metric) {
        (Some(c), _, MetricId::Accuracy) => Some(c.accuracy),
        (Some(c), _, _) => Some(c.weighted_f1),
        (None, Some(f), _) => Some(f.average),
        _ => None,
    }
}

/// Trains one model per grid point on `train` and ranks the points by the
/// grid metric on `dev`.
pub fn grid_search_model(
    spec: &ModelSpec,
    prep: PrepConfig,
    train: &Dataset,
    dev: &Dataset,
    grid: &GridSpec,
    base: &TrainConfig,
) -> Result<GridOutcome, ModelError> {
    let outcome = grid_search(grid, base, |config| {
        let (model, _) =
            train_on(spec, prep, train, Some(dev), config).map_err(|e| e.to_string())?;
        let report =
            evaluate_model(&model, dev, EvalMode::GoldHostile).map_err(|e| e.to_string())?;
        selection_metric(&report, grid.metric).ok_or_else(|| "no metric".to_string())
    })?;
    Ok(outcome)
}
