//! Sentence and subword representations from pluggable encoder backends.
//!
//! Every backend yields, per post, a pooled sentence vector (the
//! representation at the sentence-start position) and one row per subword.
//! The `hash-test` backend is a seeded, dependency-free stand-in used for
//! offline tests; `mbert` and `xlmr` load real multilingual checkpoints when
//! the crate is built with the `transformers` feature.

mod hash;
mod pca;
mod tensor_file;
#[cfg(feature = "transformers")]
mod transformer;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

pub use hash::HashEncoder;
pub use pca::{fit_pca, flatten_for_classical, reduce, PcaError, PcaReducer, DEFAULT_FLATTEN_LEN};
pub use tensor_file::{read_encodings, write_encodings, EncodingTensor};

pub const MAX_SEQUENCE_LENGTH: usize = 128;
pub const TRANSFORMER_DIM: usize = 768;

#[derive(Debug, thiserror::Error)]
pub enum EncoderError {
    #[error("text is empty after preprocessing")]
    EmptyInput,
    #[error("checkpoint {0:?} cannot be resolved to a local directory with config.json, tokenizer.json and model.safetensors")]
    CheckpointNotFound(String),
    #[error("backend {0} requires building with the `transformers` feature")]
    BackendUnavailable(Backend),
    #[error("configuration: {0}")]
    Config(String),
    #[error("model load: {0}")]
    Load(String),
    #[error("inference: {0}")]
    Inference(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Backend {
    #[serde(rename = "mbert")]
    Mbert,
    #[serde(rename = "xlmr")]
    Xlmr,
    #[serde(rename = "hash-test")]
    HashTest,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Mbert => "mbert",
            Backend::Xlmr => "xlmr",
            Backend::HashTest => "hash-test",
        }
    }

    pub fn default_checkpoint(self) -> &'static str {
        match self {
            Backend::Mbert => "bert-base-multilingual-cased",
            Backend::Xlmr => "xlm-roberta-base",
            Backend::HashTest => "hash-test",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mbert" => Ok(Backend::Mbert),
            "xlmr" => Ok(Backend::Xlmr),
            "hash-test" => Ok(Backend::HashTest),
            other => Err(format!("unknown encoder backend {other:?}")),
        }
    }
}

/// Which vector stands for the whole post.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Last-layer hidden state at the sentence-start token.
    #[default]
    Cls,
    /// The checkpoint's pooler transform (dense + tanh) of that state.
    Pooler,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub backend: Backend,
    pub d: usize,
    #[serde(default)]
    pub trainable: bool,
    pub checkpoint: String,
    #[serde(default)]
    pub pooling: Pooling,
    /// Seed of the hash-test backend; ignored by real checkpoints.
    #[serde(default)]
    pub seed: u64,
}

impl EncoderSpec {
    pub fn mbert() -> EncoderSpec {
        EncoderSpec::transformer(Backend::Mbert)
    }

    pub fn xlmr() -> EncoderSpec {
        EncoderSpec::transformer(Backend::Xlmr)
    }

    fn transformer(backend: Backend) -> EncoderSpec {
        EncoderSpec {
            backend,
            d: TRANSFORMER_DIM,
            trainable: false,
            checkpoint: backend.default_checkpoint().into(),
            pooling: Pooling::Cls,
            seed: 0,
        }
    }

    pub fn hash_test(d: usize, seed: u64) -> EncoderSpec {
        EncoderSpec {
            backend: Backend::HashTest,
            d,
            trainable: false,
            checkpoint: Backend::HashTest.default_checkpoint().into(),
            pooling: Pooling::Cls,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        match self.backend {
            Backend::Mbert | Backend::Xlmr if self.d != TRANSFORMER_DIM => {
                Err(EncoderError::Config(format!(
                    "{} produces {TRANSFORMER_DIM}-dimensional vectors, spec says d = {}",
                    self.backend, self.d
                )))
            }
            Backend::HashTest if self.d < 4 => Err(EncoderError::Config(format!(
                "hash-test needs d >= 4, got {}",
                self.d
            ))),
            _ => Ok(()),
        }
    }
}

/// Subword ids and attention mask of one post, at most
/// [`MAX_SEQUENCE_LENGTH`] long and never empty.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedPost {
    pub ids: Vec<u32>,
    pub mask: Vec<u8>,
}

impl TokenizedPost {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Number of non-padding positions.
    pub fn active_len(&self) -> usize {
        self.mask.iter().filter(|&&m| m == 1).count()
    }
}

/// Representation of one post: pooled vector (d) and subword rows (m x d).
#[derive(Clone, Debug, PartialEq)]
pub struct Encoding {
    pub pooled: Array1<f32>,
    pub sequence: Array2<f32>,
}

impl Encoding {
    pub fn dim(&self) -> usize {
        self.pooled.len()
    }

    pub fn is_finite(&self) -> bool {
        self.pooled
            .iter()
            .chain(self.sequence.iter())
            .all(|x| x.is_finite())
    }

    pub fn pooled_f64(&self) -> Array1<f64> {
        self.pooled.mapv(f64::from)
    }

    pub fn sequence_f64(&self) -> Array2<f64> {
        self.sequence.mapv(f64::from)
    }
}

/// A loaded backend. Read-only after construction, so shareable across
/// threads for inference.
pub trait Encoder: Send + Sync {
    fn spec(&self) -> &EncoderSpec;
    fn tokenize(&self, text: &str) -> Result<TokenizedPost, EncoderError>;
    fn encode(&self, batch: &[TokenizedPost]) -> Result<Vec<Encoding>, EncoderError>;

    fn encode_texts(&self, texts: &[&str]) -> Result<Vec<Encoding>, EncoderError> {
        let tokenized = texts
            .iter()
            .map(|t| self.tokenize(t))
            .collect::<Result<Vec<_>, _>>()?;
        self.encode(&tokenized)
    }
}

pub fn load_encoder(spec: &EncoderSpec) -> Result<Box<dyn Encoder>, EncoderError> {
    spec.validate()?;
    match spec.backend {
        Backend::HashTest => Ok(Box::new(HashEncoder::new(spec.clone()))),
        Backend::Mbert | Backend::Xlmr => {
            let dir = resolve_checkpoint(&spec.checkpoint)?;
            load_transformer(spec, dir)
        }
    }
}

#[cfg(feature = "transformers")]
fn load_transformer(spec: &EncoderSpec, dir: PathBuf) -> Result<Box<dyn Encoder>, EncoderError> {
    Ok(Box::new(transformer::TransformerEncoder::load(
        spec.clone(),
        &dir,
    )?))
}

#[cfg(not(feature = "transformers"))]
fn load_transformer(spec: &EncoderSpec, _dir: PathBuf) -> Result<Box<dyn Encoder>, EncoderError> {
    Err(EncoderError::BackendUnavailable(spec.backend))
}

const CHECKPOINT_FILES: [&str; 3] = ["config.json", "tokenizer.json", "model.safetensors"];

fn has_checkpoint_files(dir: &std::path::Path) -> bool {
    CHECKPOINT_FILES.iter().all(|f| dir.join(f).is_file())
}

/// Resolves a checkpoint locator: either a local directory, or a named
/// checkpoint found in the local Hugging Face hub cache.
pub fn resolve_checkpoint(locator: &str) -> Result<PathBuf, EncoderError> {
    let direct = PathBuf::from(locator);
    if direct.is_dir() && has_checkpoint_files(&direct) {
        return Ok(direct);
    }
    let hub = std::env::var_os("HF_HUB_CACHE")
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("HF_HOME").map(|h| PathBuf::from(h).join("hub")))
        .or_else(|| {
            std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".cache/huggingface/hub"))
        });
    if let Some(hub) = hub {
        let snapshots = hub
            .join(format!("models--{}", locator.replace('/', "--")))
            .join("snapshots");
        if let Ok(entries) = std::fs::read_dir(&snapshots) {
            let mut dirs: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| has_checkpoint_files(p))
                .collect();
            dirs.sort();
            if let Some(dir) = dirs.pop() {
                return Ok(dir);
            }
        }
    }
    Err(EncoderError::CheckpointNotFound(locator.to_string()))
}

/// One-shot tokenization: loads the backend described by `spec`.
pub fn tokenize(text: &str, spec: &EncoderSpec) -> Result<TokenizedPost, EncoderError> {
    load_encoder(spec)?.tokenize(text)
}

/// One-shot encoding: loads the backend described by `spec`.
pub fn encode(posts: &[TokenizedPost], spec: &EncoderSpec) -> Result<Vec<Encoding>, EncoderError> {
    load_encoder(spec)?.encode(posts)
}
