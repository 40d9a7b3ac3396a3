use ndarray::{Array1, ArrayView1};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{dropout_mask, gelu, gelu_grad, Linear};
use super::{Head, HeadError, OutputKind, ParamVisitor};

pub const DEFAULT_HIDDEN: [usize; 3] = [512, 256, 64];
pub const DEFAULT_DROPOUT: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input: usize,
    pub hidden: [usize; 3],
    pub output: usize,
    pub output_kind: OutputKind,
    pub dropout: f64,
}

impl MlpConfig {
    /// Two-way softmax classifier.
    pub fn binary(input: usize) -> MlpConfig {
        MlpConfig {
            input,
            hidden: DEFAULT_HIDDEN,
            output: 2,
            output_kind: OutputKind::Softmax,
            dropout: DEFAULT_DROPOUT,
        }
    }

    /// Four independent sigmoid outputs.
    pub fn multilabel(input: usize) -> MlpConfig {
        MlpConfig {
            input,
            hidden: DEFAULT_HIDDEN,
            output: 4,
            output_kind: OutputKind::Sigmoid,
            dropout: DEFAULT_DROPOUT,
        }
    }

    pub fn with_hidden(mut self, hidden: [usize; 3]) -> Self {
        self.hidden = hidden;
        self
    }
}

/// Three GeLU hidden layers with dropout, then the output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpHead {
    config: MlpConfig,
    /// Three hidden transformations followed by the output layer.
    layers: [Linear; 4],
}

pub struct MlpCache {
    /// Input to each layer (post-activation, post-dropout of the previous).
    inputs: Vec<Array1<f64>>,
    /// Pre-activation of each hidden layer.
    pre: Vec<Array1<f64>>,
    masks: Vec<Option<Array1<f64>>>,
}

impl MlpHead {
    pub fn new(config: MlpConfig, rng: &mut ChaCha8Rng) -> MlpHead {
        let [h1, h2, h3] = config.hidden;
        let layers = [
            Linear::new(config.input, h1, rng),
            Linear::new(h1, h2, rng),
            Linear::new(h2, h3, rng),
            Linear::new(h3, config.output, rng),
        ];
        MlpHead { config, layers }
    }

    /// Builds a head from explicit layers; shapes must chain.
    pub fn from_layers(
        layers: [Linear; 4],
        output_kind: OutputKind,
        dropout: f64,
    ) -> Result<MlpHead, HeadError> {
        for w in layers.windows(2) {
            if w[0].output_dim() != w[1].input_dim() {
                return Err(HeadError::Dimension {
                    expected: w[0].output_dim(),
                    got: w[1].input_dim(),
                });
            }
        }
        let config = MlpConfig {
            input: layers[0].input_dim(),
            hidden: [
                layers[0].output_dim(),
                layers[1].output_dim(),
                layers[2].output_dim(),
            ],
            output: layers[3].output_dim(),
            output_kind,
            dropout,
        };
        Ok(MlpHead { config, layers })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Linear; 4] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Linear; 4] {
        &mut self.layers
    }

    pub fn forward_vec(
        &self,
        x: ArrayView1<f64>,
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<(Array1<f64>, MlpCache), HeadError> {
        if x.len() != self.config.input {
            return Err(HeadError::Dimension {
                expected: self.config.input,
                got: x.len(),
            });
        }
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(4),
            pre: Vec::with_capacity(3),
            masks: Vec::with_capacity(3),
        };
        let mut h = x.to_owned();
        for layer in &self.layers[..3] {
            let z = layer.forward(h.view());
            let mut a = z.mapv(gelu);
            let mask = match dropout.as_deref_mut() {
                Some(rng) if self.config.dropout > 0.0 => {
                    let m = dropout_mask(a.len(), self.config.dropout, rng);
                    a *= &m;
                    Some(m)
                }
                _ => None,
            };
            cache.inputs.push(h);
            cache.pre.push(z);
            cache.masks.push(mask);
            h = a;
        }
        let logits = self.layers[3].forward(h.view());
        cache.inputs.push(h);
        Ok((logits, cache))
    }

    /// Backpropagates `dlogits`; returns the gradient w.r.t. the head input.
    pub fn backward_vec(&mut self, cache: &MlpCache, dlogits: ArrayView1<f64>) -> Array1<f64> {
        let mut g = self.layers[3].backward(cache.inputs[3].view(), dlogits);
        for i in (0..3).rev() {
            if let Some(m) = &cache.masks[i] {
                g *= m;
            }
            g *= &cache.pre[i].mapv(gelu_grad);
            g = self.layers[i].backward(cache.inputs[i].view(), g.view());
        }
        g
    }

    pub fn visit_layers(&mut self, prefix: &str, f: &mut ParamVisitor) {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            layer.visit(&format!("{prefix}.{i}"), f);
        }
    }
}

impl Head for MlpHead {
    type Input = Array1<f64>;
    type Cache = MlpCache;

    fn output_kind(&self) -> OutputKind {
        self.config.output_kind
    }

    fn output_dim(&self) -> usize {
        self.config.output
    }

    fn forward(
        &self,
        input: &Array1<f64>,
        dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<(Array1<f64>, MlpCache), HeadError> {
        self.forward_vec(input.view(), dropout)
    }

    fn backward(&mut self, _input: &Array1<f64>, cache: &MlpCache, dlogits: ArrayView1<f64>) {
        self.backward_vec(cache, dlogits);
    }

    fn zero_grad(&mut self) {
        self.layers.iter_mut().for_each(Linear::zero_grad);
    }

    fn visit_params(&mut self, f: &mut ParamVisitor) {
        self.visit_layers("mlp", f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::SeedableRng;

    #[test]
    fn exactly_three_hidden_layers() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let head = MlpHead::new(MlpConfig::binary(10), &mut rng);
        assert_eq!(head.layers().len(), 4);
        assert_eq!(head.layers()[0].input_dim(), 10);
        assert_eq!(head.layers()[3].output_dim(), 2);
        assert_eq!(head.config().hidden, DEFAULT_HIDDEN);
    }

    #[test]
    fn dropout_only_in_training_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let head = MlpHead::new(MlpConfig::binary(6).with_hidden([8, 8, 8]), &mut rng);
        let x = array![0.1, -0.2, 0.3, 0.4, -0.5, 0.6];
        let (a, _) = head.forward_vec(x.view(), None).unwrap();
        let (b, _) = head.forward_vec(x.view(), None).unwrap();
        assert_eq!(a, b);
        let mut drop_rng = ChaCha8Rng::seed_from_u64(2);
        let (c, cache) = head.forward_vec(x.view(), Some(&mut drop_rng)).unwrap();
        assert!(cache.masks.iter().all(Option::is_some));
        assert_ne!(a, c);
    }

    #[test]
    fn from_layers_rejects_broken_chain() {
        let l = |i, o| Linear::from_weights(Array2::zeros((o, i)), Array1::zeros(o));
        assert!(MlpHead::from_layers(
            [l(2, 3), l(4, 3), l(3, 3), l(3, 2)],
            OutputKind::Softmax,
            0.1
        )
        .is_err());
    }
}
