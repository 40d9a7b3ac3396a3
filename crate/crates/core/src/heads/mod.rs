//! Classifier heads: MLP heads over pooled vectors (binary, fusion,
//! multi-label), bidirectional recurrent heads over subword sequences,
//! classical learners over flattened features, and the one-vs-rest ensemble.

pub mod classical;
pub mod layers;
mod mlp;
mod ovr;
mod recurrent;

use ndarray::{concatenate, Array1, ArrayView1, Axis};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use self::layers::{sigmoid, softmax};

pub use mlp::{MlpCache, MlpConfig, MlpHead, DEFAULT_DROPOUT, DEFAULT_HIDDEN};
pub use ovr::{merge_scores, ovr_predict, OvrEnsemble, OvrMode, DEFAULT_THRESHOLD};
pub use recurrent::{CellKind, RecurrentCache, RecurrentConfig, RecurrentHead, DEFAULT_RNN_HIDDEN};

#[derive(Debug, thiserror::Error)]
pub enum HeadError {
    #[error("expected input dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("backends disagree on dimension: {0} vs {1}")]
    FusionMismatch(usize, usize),
    #[error("empty subword sequence")]
    EmptySequence,
    #[error("head has {got} outputs with {kind:?}, operation needs {expected}")]
    WrongOutput {
        expected: usize,
        got: usize,
        kind: OutputKind,
    },
    #[error("one-vs-rest member {0} is not trained")]
    UntrainedMember(crate::corpus::FineLabel),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Softmax,
    Sigmoid,
}

/// Callback over `(name, value, grad, apply_weight_decay)`.
pub type ParamVisitor<'a> = dyn FnMut(&str, &mut [f64], &[f64], bool) + 'a;

/// A trainable neural head. Forward passes are pure given the parameters;
/// gradients accumulate into internal buffers until `zero_grad`.
pub trait Head: Send + Sync {
    type Input: Sync;
    type Cache;

    fn output_kind(&self) -> OutputKind;
    fn output_dim(&self) -> usize;

    /// Returns pre-activation logits. Dropout is applied only when an RNG is
    /// supplied (training mode).
    fn forward(
        &self,
        input: &Self::Input,
        dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<(Array1<f64>, Self::Cache), HeadError>;

    fn backward(&mut self, input: &Self::Input, cache: &Self::Cache, dlogits: ArrayView1<f64>);

    fn zero_grad(&mut self);

    /// Visits `(name, value, grad, apply_weight_decay)` for every parameter
    /// tensor in a fixed order.
    fn visit_params(&mut self, f: &mut ParamVisitor);

    /// Output probabilities in inference mode.
    fn predict(&self, input: &Self::Input) -> Result<Array1<f64>, HeadError> {
        let (logits, _) = self.forward(input, None)?;
        Ok(activate(self.output_kind(), logits.view()))
    }

    fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, v, _, _| n += v.len());
        n
    }
}

/// Softmax, or component-wise sigmoid kept strictly inside (0, 1).
pub fn activate(kind: OutputKind, logits: ArrayView1<f64>) -> Array1<f64> {
    match kind {
        OutputKind::Softmax => softmax(logits),
        OutputKind::Sigmoid => logits.mapv(|z| sigmoid(z).clamp(f64::EPSILON, 1.0 - f64::EPSILON)),
    }
}

fn require_output(head: &MlpHead, dim: usize, kind: OutputKind) -> Result<(), HeadError> {
    if head.output_dim() != dim || head.output_kind() != kind {
        return Err(HeadError::WrongOutput {
            expected: dim,
            got: head.output_dim(),
            kind: head.output_kind(),
        });
    }
    Ok(())
}

/// Probability pair `(hostile, non_hostile)` from a pooled vector.
pub fn forward_binary(pooled: ArrayView1<f64>, head: &MlpHead) -> Result<[f64; 2], HeadError> {
    require_output(head, 2, OutputKind::Softmax)?;
    let p = head.predict(&pooled.to_owned())?;
    Ok([p[0], p[1]])
}

/// Concatenates two backends' pooled vectors (first backend first) and
/// classifies the result.
pub fn fuse(
    pooled_a: ArrayView1<f64>,
    pooled_b: ArrayView1<f64>,
) -> Result<Array1<f64>, HeadError> {
    if pooled_a.len() != pooled_b.len() {
        return Err(HeadError::FusionMismatch(pooled_a.len(), pooled_b.len()));
    }
    Ok(concatenate(Axis(0), &[pooled_a, pooled_b]).expect("1-d concatenation"))
}

pub fn forward_fusion(
    pooled_a: ArrayView1<f64>,
    pooled_b: ArrayView1<f64>,
    head: &MlpHead,
) -> Result<[f64; 2], HeadError> {
    let joint = fuse(pooled_a, pooled_b)?;
    forward_binary(joint.view(), head)
}

/// Independent probabilities in `(fake, hate, defamation, offensive)` order.
pub fn forward_multilabel(pooled: ArrayView1<f64>, head: &MlpHead) -> Result<[f64; 4], HeadError> {
    require_output(head, 4, OutputKind::Sigmoid)?;
    let p = head.predict(&pooled.to_owned())?;
    Ok([p[0], p[1], p[2], p[3]])
}

pub fn forward_recurrent(
    sequence: &ndarray::Array2<f64>,
    head: &RecurrentHead,
) -> Result<[f64; 2], HeadError> {
    let p = head.predict(sequence)?;
    Ok([p[0], p[1]])
}

#[cfg(test)]
mod tests {
    use super::layers::Linear;
    use super::*;
    use ndarray::{array, Array2};
    use rand::SeedableRng;

    fn linear(w: Array2<f64>, b: Array1<f64>) -> Linear {
        Linear::from_weights(w, b)
    }

    /// Identity-like hidden layers over a 2-d input so the head reduces to a
    /// single affine map followed by GeLU three times.
    fn hand_head(out: Array2<f64>, bias: Array1<f64>, kind: OutputKind) -> MlpHead {
        let eye = Array2::eye(2);
        MlpHead::from_layers(
            [
                linear(eye.clone(), Array1::zeros(2)),
                linear(eye.clone(), Array1::zeros(2)),
                linear(eye, Array1::zeros(2)),
                linear(out, bias),
            ],
            kind,
            0.1,
        )
        .unwrap()
    }

    #[test]
    fn zero_weights_give_uniform_pair() {
        let head = hand_head(Array2::zeros((2, 2)), Array1::zeros(2), OutputKind::Softmax);
        let p = forward_binary(array![3.0, -1.0].view(), &head).unwrap();
        assert_eq!(p, [0.5, 0.5]);
    }

    #[test]
    fn hand_computed_softmax() {
        // x = (1, 2) through three identity layers, GeLU after each
        // (values from a calculator with erf):
        //   g1 = [0.841344746, 1.954499736]
        //   g2 = [0.673010664, 1.905009706]
        //   g3 = [0.504441513, 1.850927614]
        // out weights I, bias (0, 0.5)
        // logits = (0.504441513, 2.350927614); p0 = 1 / (1 + e^1.846486101)
        let head = hand_head(Array2::eye(2), array![0.0, 0.5], OutputKind::Softmax);
        let p = forward_binary(array![1.0, 2.0].view(), &head).unwrap();
        let expected0 = 1.0 / (1.0 + (1.846_486_101f64).exp());
        assert!((p[0] - expected0).abs() < 1e-8, "{p:?} vs {expected0}");
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_sigmoids() {
        let out = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.0, 0.0]];
        let head = hand_head(out, array![0.0, 0.0, 0.0, -1.0], OutputKind::Sigmoid);
        let p = forward_multilabel(array![1.0, 2.0].view(), &head).unwrap();
        let s = |z: f64| 1.0 / (1.0 + (-z).exp());
        let (g1, g2) = (0.504_441_513, 1.850_927_614);
        let want = [s(g1), s(g2), s(g1 + g2), s(-1.0)];
        for (a, b) in p.iter().zip(want) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_output_layer_gives_half_sigmoids() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut head = MlpHead::new(MlpConfig::multilabel(5).with_hidden([4, 4, 4]), &mut rng);
        head.layers_mut()[3].w.fill(0.0);
        head.layers_mut()[3].b.fill(0.0);
        let p = forward_multilabel(array![1.0, -2.0, 0.3, 4.0, 0.0].view(), &head).unwrap();
        assert_eq!(p, [0.5; 4]);
    }

    #[test]
    fn fusion_concatenates_in_order() {
        let a = array![1.0, 2.0];
        let b = array![3.0, 4.0];
        assert_eq!(
            fuse(a.view(), b.view()).unwrap(),
            array![1.0, 2.0, 3.0, 4.0]
        );
        assert!(matches!(
            fuse(a.view(), array![1.0].view()),
            Err(HeadError::FusionMismatch(2, 1))
        ));
    }

    #[test]
    fn fusion_equals_binary_on_manual_concatenation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let head = MlpHead::new(MlpConfig::binary(16).with_hidden([8, 8, 8]), &mut rng);
        let a = Array1::from_shape_fn(8, |i| i as f64 * 0.1);
        let b = Array1::from_shape_fn(8, |i| 1.0 - i as f64 * 0.2);
        let mut joint = a.to_vec();
        joint.extend(b.iter());
        let manual = forward_binary(Array1::from(joint).view(), &head).unwrap();
        assert_eq!(forward_fusion(a.view(), b.view(), &head).unwrap(), manual);
    }

    #[test]
    fn fusion_symmetric_weights_ignore_order() {
        // first layer [W W] sees a + b either way
        let w = array![[0.5, -0.25], [0.1, 0.3]];
        let first = ndarray::concatenate(Axis(1), &[w.view(), w.view()]).unwrap();
        let eye = Array2::eye(2);
        let head = MlpHead::from_layers(
            [
                Linear::from_weights(first, Array1::zeros(2)),
                Linear::from_weights(eye.clone(), Array1::zeros(2)),
                Linear::from_weights(eye.clone(), Array1::zeros(2)),
                Linear::from_weights(array![[1.0, -1.0], [0.5, 2.0]], Array1::zeros(2)),
            ],
            OutputKind::Softmax,
            0.1,
        )
        .unwrap();
        let a = array![0.3, -1.2];
        let b = array![2.0, 0.7];
        assert_eq!(
            forward_fusion(a.view(), b.view(), &head).unwrap(),
            forward_fusion(b.view(), a.view(), &head).unwrap()
        );
    }

    #[test]
    fn wrong_head_shape_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let multi = MlpHead::new(MlpConfig::multilabel(3).with_hidden([4, 4, 4]), &mut rng);
        assert!(forward_binary(array![1.0, 2.0, 3.0].view(), &multi).is_err());
        let bin = MlpHead::new(MlpConfig::binary(3).with_hidden([4, 4, 4]), &mut rng);
        assert!(matches!(
            forward_binary(array![1.0, 2.0].view(), &bin),
            Err(HeadError::Dimension {
                expected: 3,
                got: 2
            })
        ));
    }
}
