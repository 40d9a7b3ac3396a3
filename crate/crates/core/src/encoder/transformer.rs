//! mBERT / XLM-R feature extraction through candle. Weights stay frozen.

use std::path::Path;

use candle_core::{DType, Device, Module, Tensor};
use candle_nn::{Linear, VarBuilder};
use candle_transformers::models::bert::{BertModel, Config as BertConfig};
use candle_transformers::models::xlm_roberta::{Config as XlmrConfig, XLMRobertaModel};
use ndarray::{Array1, Array2};
use tokenizers::{Tokenizer, TruncationParams};

use super::{
    Backend, Encoder, EncoderError, EncoderSpec, Encoding, Pooling, TokenizedPost,
    MAX_SEQUENCE_LENGTH,
};

enum Model {
    Bert(BertModel),
    Xlmr(XLMRobertaModel),
}

pub struct TransformerEncoder {
    spec: EncoderSpec,
    tokenizer: Tokenizer,
    model: Model,
    pooler: Option<Linear>,
    device: Device,
}

fn load_err<E: std::fmt::Display>(e: E) -> EncoderError {
    EncoderError::Load(e.to_string())
}

fn infer_err<E: std::fmt::Display>(e: E) -> EncoderError {
    EncoderError::Inference(e.to_string())
}

fn load_pooler(vb: &VarBuilder, hidden: usize, prefix: &str) -> Option<Linear> {
    [format!("{prefix}.pooler.dense"), "pooler.dense".to_string()]
        .iter()
        .find_map(|p| candle_nn::linear(hidden, hidden, vb.pp(p)).ok())
}

impl TransformerEncoder {
    pub fn load(spec: EncoderSpec, dir: &Path) -> Result<TransformerEncoder, EncoderError> {
        let device = Device::Cpu;
        let config = std::fs::read_to_string(dir.join("config.json"))?;
        let mut tokenizer = Tokenizer::from_file(dir.join("tokenizer.json")).map_err(load_err)?;
        tokenizer
            .with_truncation(Some(TruncationParams {
                max_length: MAX_SEQUENCE_LENGTH,
                ..Default::default()
            }))
            .map_err(load_err)?;
        tokenizer.with_padding(None);
        let weights = dir.join("model.safetensors");
        // SAFETY: the weights file is memory-mapped read-only for the lifetime
        // of the encoder and not modified while loaded.
        let vb = unsafe { VarBuilder::from_mmaped_safetensors(&[weights], DType::F32, &device) }
            .map_err(load_err)?;
        let (model, hidden, prefix) = match spec.backend {
            Backend::Mbert => {
                let cfg: BertConfig = serde_json::from_str(&config).map_err(load_err)?;
                let model = BertModel::load(vb.clone(), &cfg)
                    .or_else(|_| BertModel::load(vb.pp("bert"), &cfg))
                    .map_err(load_err)?;
                (Model::Bert(model), cfg.hidden_size, "bert")
            }
            Backend::Xlmr => {
                let cfg: XlmrConfig = serde_json::from_str(&config).map_err(load_err)?;
                let model = XLMRobertaModel::new(&cfg, vb.clone())
                    .or_else(|_| XLMRobertaModel::new(&cfg, vb.pp("roberta")))
                    .map_err(load_err)?;
                (Model::Xlmr(model), cfg.hidden_size, "roberta")
            }
            Backend::HashTest => unreachable!("hash-test is not a transformer backend"),
        };
        if hidden != spec.d {
            return Err(EncoderError::Config(format!(
                "checkpoint hidden size {hidden} differs from spec d = {}",
                spec.d
            )));
        }
        let pooler = match spec.pooling {
            Pooling::Cls => None,
            Pooling::Pooler => Some(
                load_pooler(&vb, hidden, prefix)
                    .ok_or_else(|| EncoderError::Load("checkpoint has no pooler weights".into()))?,
            ),
        };
        Ok(TransformerEncoder {
            spec,
            tokenizer,
            model,
            pooler,
            device,
        })
    }

    fn forward_one(&self, post: &TokenizedPost) -> Result<Encoding, EncoderError> {
        let m = post.active_len();
        let ids: Vec<u32> = post.ids[..m].to_vec();
        let input = Tensor::new(ids.as_slice(), &self.device)
            .and_then(|t| t.unsqueeze(0))
            .map_err(infer_err)?;
        let types = input.zeros_like().map_err(infer_err)?;
        let mask = input.ones_like().map_err(infer_err)?;
        let hidden = match &self.model {
            Model::Bert(b) => b.forward(&input, &types, Some(&mask)),
            Model::Xlmr(x) => x.forward(&input, &mask, &types, None, None, None),
        }
        .and_then(|h| h.squeeze(0))
        .map_err(infer_err)?;
        let rows: Vec<Vec<f32>> = hidden.to_vec2().map_err(infer_err)?;
        let d = self.spec.d;
        let sequence = Array2::from_shape_vec((rows.len(), d), rows.concat())
            .map_err(|e| EncoderError::Inference(e.to_string()))?;
        let cls = sequence.row(0).to_owned();
        let pooled = match &self.pooler {
            None => cls,
            Some(linear) => {
                let t = Tensor::new(cls.as_slice().expect("contiguous"), &self.device)
                    .and_then(|t| t.unsqueeze(0))
                    .and_then(|t| linear.forward(&t))
                    .and_then(|t| t.tanh())
                    .and_then(|t| t.squeeze(0))
                    .and_then(|t| t.to_vec1::<f32>())
                    .map_err(infer_err)?;
                Array1::from(t)
            }
        };
        Ok(Encoding { pooled, sequence })
    }
}

impl Encoder for TransformerEncoder {
    fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    fn tokenize(&self, text: &str) -> Result<TokenizedPost, EncoderError> {
        if text.trim().is_empty() {
            return Err(EncoderError::EmptyInput);
        }
        let enc = self.tokenizer.encode(text, true).map_err(infer_err)?;
        let ids = enc.get_ids().to_vec();
        let mask = enc.get_attention_mask().iter().map(|&m| m as u8).collect();
        Ok(TokenizedPost { ids, mask })
    }

    fn encode(&self, batch: &[TokenizedPost]) -> Result<Vec<Encoding>, EncoderError> {
        batch.iter().map(|p| self.forward_one(p)).collect()
    }
}
