use ndarray::{Array1, Array2};
use rayon::prelude::*;

use super::{ModelError, ModelSpec};
use crate::corpus::Post;
use crate::encoder::{load_encoder, Encoder, EncoderError};
use crate::textprep::Preprocessor;

/// Frozen representations of one post: one pooled vector per backend, and
/// the first backend's subword sequence when the head needs it.
#[derive(Clone, Debug, PartialEq)]
pub struct PostFeatures {
    pub pooled: Vec<Array1<f64>>,
    pub sequence: Option<Array2<f64>>,
}

pub struct FeatureExtractor {
    prep: Preprocessor,
    encoders: Vec<Box<dyn Encoder>>,
    keep_sequence: bool,
}

impl FeatureExtractor {
    /// Loads every backend of `spec`.
    pub fn new(spec: &ModelSpec, prep: Preprocessor) -> Result<FeatureExtractor, ModelError> {
        spec.validate()?;
        let encoders = spec
            .encoders
            .iter()
            .map(load_encoder)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FeatureExtractor::with_encoders(
            prep,
            encoders,
            spec.kind.needs_sequence(),
        ))
    }

    pub fn with_encoders(
        prep: Preprocessor,
        encoders: Vec<Box<dyn Encoder>>,
        keep_sequence: bool,
    ) -> FeatureExtractor {
        FeatureExtractor {
            prep,
            encoders,
            keep_sequence,
        }
    }

    pub fn preprocessor(&self) -> &Preprocessor {
        &self.prep
    }

    /// Preprocessed text; when cleaning leaves nothing, the trimmed raw text
    /// is used instead.
    pub fn text_for(&self, id: &str, text: &str) -> Result<String, ModelError> {
        let cleaned = self.prep.apply(id, text)?;
        if !cleaned.trim().is_empty() {
            return Ok(cleaned);
        }
        let raw = text.trim();
        if raw.is_empty() {
            return Err(ModelError::DegenerateInput(id.to_string()));
        }
        log::warn!("post {id}: preprocessing removed all text, encoding the raw post");
        Ok(raw.to_string())
    }

    pub fn extract(&self, id: &str, text: &str) -> Result<PostFeatures, ModelError> {
        let text = self.text_for(id, text)?;
        let mut pooled = Vec::with_capacity(self.encoders.len());
        let mut sequence = None;
        for (i, enc) in self.encoders.iter().enumerate() {
            let tokens = enc.tokenize(&text).map_err(|e| match e {
                EncoderError::EmptyInput => ModelError::DegenerateInput(id.to_string()),
                other => other.into(),
            })?;
            let encoding = enc
                .encode(std::slice::from_ref(&tokens))?
                .pop()
                .expect("one encoding per post");
            if !encoding.is_finite() {
                return Err(ModelError::Encoder(EncoderError::Inference(format!(
                    "non-finite encoding for post {id}"
                ))));
            }
            pooled.push(encoding.pooled_f64());
            if i == 0 && self.keep_sequence {
                sequence = Some(encoding.sequence_f64());
            }
        }
        Ok(PostFeatures { pooled, sequence })
    }

    /// Features for every post, in order.
    pub fn extract_all(&self, posts: &[Post]) -> Result<Vec<PostFeatures>, ModelError> {
        posts
            .par_iter()
            .map(|p| self.extract(&p.id, &p.text))
            .collect()
    }
}
