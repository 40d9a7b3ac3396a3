//! Declarative model descriptions, end-to-end training over a corpus,
//! prediction, and on-disk checkpoints.

mod checkpoint;
mod features;
mod trained;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoder::{Backend, EncoderError, EncoderSpec, PcaError, DEFAULT_FLATTEN_LEN};
use crate::heads::classical::{ClassicalAlgorithm, ClassicalError, ClassicalHead};
use crate::heads::{HeadError, DEFAULT_HIDDEN, DEFAULT_RNN_HIDDEN, DEFAULT_THRESHOLD};
use crate::textprep::PrepError;
use crate::training::{MetricId, TrainError};

pub use checkpoint::{
    load_checkpoint, save_checkpoint, CheckpointManifest, HeadManifest, ParamEntry,
    CHECKPOINT_SCHEMA_VERSION,
};
pub use features::{FeatureExtractor, PostFeatures};
pub use trained::{
    evaluate_model, gate_predictions, grid_search_model, prepare, selection_metric, train,
    train_on, train_ovr_member, Dataset, RunHistory, TrainedHead, TrainedModel,
};

/// Default PCA target dimension per subword for classical heads.
pub const DEFAULT_PCA_K: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model spec: {0}")]
    Spec(String),
    #[error("post {0}: no text left to encode")]
    DegenerateInput(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Prep(#[from] PrepError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Head(#[from] HeadError),
    #[error(transparent)]
    Classical(#[from] ClassicalError),
    #[error(transparent)]
    Pca(#[from] PcaError),
    #[error(transparent)]
    Eval(#[from] crate::evaluation::EvalError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Task {
    /// Hostile vs non-hostile.
    Coarse,
    /// Multi-label over the four hostile classes.
    Fine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Binary MLP over mBERT pooled vectors.
    Fmbert,
    /// Binary MLP over XLM-R pooled vectors.
    Fxlmr,
    /// Binary MLP over the concatenated pooled vectors of two backends.
    Coghm,
    Bilstm,
    Bigru,
    Classical {
        algorithm: ClassicalAlgorithm,
        pca: bool,
    },
    /// Four-way sigmoid head trained on hostile posts.
    Dmlmc,
    /// Four independent binary heads.
    Ovr,
}

impl ModelKind {
    pub fn task(self) -> Task {
        match self {
            ModelKind::Dmlmc | ModelKind::Ovr => Task::Fine,
            _ => Task::Coarse,
        }
    }

    pub fn default_backends(self) -> Vec<Backend> {
        match self {
            ModelKind::Fxlmr => vec![Backend::Xlmr],
            ModelKind::Coghm => vec![Backend::Mbert, Backend::Xlmr],
            _ => vec![Backend::Mbert],
        }
    }

    pub fn default_metric(self) -> MetricId {
        match self.task() {
            Task::Coarse => MetricId::Accuracy,
            Task::Fine => MetricId::MeanWeightedF1,
        }
    }

    /// Whether the head consumes per-subword sequences.
    pub fn needs_sequence(self) -> bool {
        matches!(
            self,
            ModelKind::Bilstm | ModelKind::Bigru | ModelKind::Classical { .. }
        )
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Fmbert => f.write_str("fmbert"),
            ModelKind::Fxlmr => f.write_str("fxlmr"),
            ModelKind::Coghm => f.write_str("coghm"),
            ModelKind::Bilstm => f.write_str("bilstm"),
            ModelKind::Bigru => f.write_str("bigru"),
            ModelKind::Dmlmc => f.write_str("dmlmc"),
            ModelKind::Ovr => f.write_str("ovr"),
            ModelKind::Classical { algorithm, pca } => {
                write!(f, "classical:{algorithm}")?;
                if *pca {
                    f.write_str(":pca")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let mut parts = lower.split(':');
        let kind = match parts.next().unwrap_or_default() {
            "fmbert" => ModelKind::Fmbert,
            "fxlmr" => ModelKind::Fxlmr,
            "coghm" => ModelKind::Coghm,
            "bilstm" => ModelKind::Bilstm,
            "bigru" => ModelKind::Bigru,
            "dmlmc" => ModelKind::Dmlmc,
            "ovr" => ModelKind::Ovr,
            "classical" => {
                let alg = parts
                    .next()
                    .ok_or_else(|| ModelError::Spec("classical needs an algorithm".into()))?;
                let algorithm = alg.parse()?;
                let pca = match parts.next() {
                    None => false,
                    Some("pca") => true,
                    Some(other) => {
                        return Err(ModelError::Spec(format!(
                            "unknown classical option {other:?}"
                        )))
                    }
                };
                ModelKind::Classical { algorithm, pca }
            }
            other => return Err(ModelError::Spec(format!("unknown model kind {other:?}"))),
        };
        if parts.next().is_some() {
            return Err(ModelError::Spec(format!(
                "trailing options in model kind {s:?}"
            )));
        }
        Ok(kind)
    }
}

impl Serialize for ModelKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModelKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One architecture: head type, encoder backend(s) and head hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// One backend, or two for the fusion head (mBERT first).
    pub encoders: Vec<EncoderSpec>,
    pub mlp_hidden: [usize; 3],
    pub rnn_hidden: usize,
    /// Yes-probability threshold for fine labels.
    pub threshold: f64,
    pub pca_k: usize,
    pub flatten_len: usize,
    /// Present for classical kinds only.
    pub classical: Option<ClassicalHead>,
}

impl ModelSpec {
    /// The kind with its pretrained backends.
    pub fn new(kind: ModelKind) -> ModelSpec {
        let encoders = kind
            .default_backends()
            .into_iter()
            .map(|b| match b {
                Backend::Xlmr => EncoderSpec::xlmr(),
                _ => EncoderSpec::mbert(),
            })
            .collect();
        ModelSpec::with_encoders(kind, encoders)
    }

    /// The kind over hash-test encoders of width `d`; each backend position
    /// gets its own seed so fused representations differ.
    pub fn hash_test(kind: ModelKind, d: usize, seed: u64) -> ModelSpec {
        let encoders = (0..kind.default_backends().len() as u64)
            .map(|i| EncoderSpec::hash_test(d, seed.wrapping_add(i)))
            .collect();
        ModelSpec::with_encoders(kind, encoders)
    }

    pub fn with_encoders(kind: ModelKind, encoders: Vec<EncoderSpec>) -> ModelSpec {
        let classical = match kind {
            ModelKind::Classical { algorithm, pca } => {
                Some(ClassicalHead::new(algorithm).with_pca(pca))
            }
            _ => None,
        };
        ModelSpec {
            kind,
            encoders,
            mlp_hidden: DEFAULT_HIDDEN,
            rnn_hidden: DEFAULT_RNN_HIDDEN,
            threshold: DEFAULT_THRESHOLD,
            pca_k: DEFAULT_PCA_K,
            flatten_len: DEFAULT_FLATTEN_LEN,
            classical,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let expected = self.kind.default_backends().len();
        if self.encoders.len() != expected {
            return Err(ModelError::Spec(format!(
                "{} needs {expected} encoder(s), got {}",
                self.kind,
                self.encoders.len()
            )));
        }
        for e in &self.encoders {
            e.validate()?;
            if e.trainable {
                return Err(ModelError::Spec(format!(
                    "{} is used as a frozen feature extractor; trainable = true is not supported",
                    e.backend
                )));
            }
        }
        if let [a, b] = self.encoders.as_slice() {
            if a.d != b.d {
                return Err(HeadError::FusionMismatch(a.d, b.d).into());
            }
        }
        if self.mlp_hidden.contains(&0) || self.rnn_hidden == 0 {
            return Err(ModelError::Spec("layer widths must be positive".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(ModelError::Spec(format!(
                "threshold {} not in (0, 1)",
                self.threshold
            )));
        }
        if self.pca_k == 0 || self.flatten_len == 0 {
            return Err(ModelError::Spec(
                "pca_k and flatten_len must be positive".into(),
            ));
        }
        match (self.kind, &self.classical) {
            (ModelKind::Classical { algorithm, pca }, Some(c))
                if c.algorithm == algorithm && c.use_pca == pca => {}
            (ModelKind::Classical { .. }, _) => {
                return Err(ModelError::Spec(
                    "classical parameters do not match the model kind".into(),
                ))
            }
            (_, Some(_)) => {
                return Err(ModelError::Spec(
                    "classical parameters on a neural model".into(),
                ))
            }
            _ => {}
        }
        Ok(())
    }

    /// Input width of the pooled-vector heads.
    pub fn pooled_width(&self) -> usize {
        self.encoders.iter().map(|e| e.d).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for s in [
            "fmbert",
            "fxlmr",
            "coghm",
            "bilstm",
            "bigru",
            "dmlmc",
            "ovr",
            "classical:svm_rbf",
            "classical:random_forest:pca",
            "classical:gbdt",
            "classical:xgboost:pca",
        ] {
            let k: ModelKind = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
        assert_eq!(
            "classical:rf".parse::<ModelKind>().unwrap(),
            ModelKind::Classical {
                algorithm: ClassicalAlgorithm::RandomForest,
                pca: false
            }
        );
        for bad in ["bert", "classical", "classical:svm:zip", "ovr:pca"] {
            assert!(bad.parse::<ModelKind>().is_err(), "{bad}");
        }
    }

    #[test]
    fn fusion_uses_two_backends_of_768() {
        let spec = ModelSpec::new(ModelKind::Coghm);
        let backends: Vec<Backend> = spec.encoders.iter().map(|e| e.backend).collect();
        assert_eq!(backends, [Backend::Mbert, Backend::Xlmr]);
        assert_eq!(spec.pooled_width(), 1536);
        spec.validate().unwrap();
    }

    #[test]
    fn hash_fusion_gets_distinct_seeds() {
        let spec = ModelSpec::hash_test(ModelKind::Coghm, 8, 3);
        assert_eq!(spec.encoders.len(), 2);
        assert_ne!(spec.encoders[0].seed, spec.encoders[1].seed);
        assert_eq!(spec.pooled_width(), 16);
    }

    #[test]
    fn trainable_backbone_is_rejected() {
        let mut spec = ModelSpec::new(ModelKind::Fmbert);
        spec.encoders[0].trainable = true;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn mismatched_fusion_dims_are_rejected() {
        let mut spec = ModelSpec::hash_test(ModelKind::Coghm, 8, 0);
        spec.encoders[1].d = 12;
        assert!(matches!(
            spec.validate(),
            Err(ModelError::Head(HeadError::FusionMismatch(8, 12)))
        ));
    }

    #[test]
    fn spec_serializes() {
        let spec = ModelSpec::hash_test(
            ModelKind::Classical {
                algorithm: ClassicalAlgorithm::Gbdt,
                pca: true,
            },
            8,
            0,
        );
        let back: ModelSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }
}
