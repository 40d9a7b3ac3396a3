use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::heads::layers::{sigmoid, softmax};
use crate::heads::OutputKind;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossId {
    /// Categorical cross-entropy over a softmax.
    #[default]
    CrossEntropy,
    /// Sum of per-output binary cross-entropies over sigmoids.
    BinaryCrossEntropy,
}

impl LossId {
    pub fn for_output(kind: OutputKind) -> LossId {
        match kind {
            OutputKind::Softmax => LossId::CrossEntropy,
            OutputKind::Sigmoid => LossId::BinaryCrossEntropy,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Class(usize),
    MultiHot(Vec<bool>),
}

/// `-w_y log softmax(z)_y` and its gradient `w_y (p - onehot(y))`.
pub fn cross_entropy(
    logits: ArrayView1<f64>,
    class: usize,
    weights: Option<&[f64]>,
) -> (f64, Array1<f64>) {
    let p = softmax(logits);
    let w = weights.map_or(1.0, |w| w[class]);
    let max = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lse = max + logits.mapv(|z| (z - max).exp()).sum().ln();
    let loss = w * (lse - logits[class]);
    let mut grad = p;
    grad[class] -= 1.0;
    grad *= w;
    (loss, grad)
}

/// `sum_c -[pw_c y_c log s(z_c) + (1 - y_c) log(1 - s(z_c))]` in a
/// numerically stable form.
pub fn binary_cross_entropy(
    logits: ArrayView1<f64>,
    targets: &[bool],
    pos_weight: Option<&[f64]>,
) -> (f64, Array1<f64>) {
    let mut loss = 0.0;
    let mut grad = Array1::zeros(logits.len());
    for (c, (&z, &y)) in logits.iter().zip(targets).enumerate() {
        let pw = pos_weight.map_or(1.0, |w| w[c]);
        // log(1 + e^-|z|) + max(-z, 0) = -log s(z)
        let softplus_neg = (-z.abs()).exp().ln_1p() + (-z).max(0.0);
        let softplus_pos = softplus_neg + z; // -log(1 - s(z))
        let s = sigmoid(z);
        if y {
            loss += pw * softplus_neg;
            grad[c] = pw * (s - 1.0);
        } else {
            loss += softplus_pos;
            grad[c] = s;
        }
    }
    (loss, grad)
}

pub fn loss_and_grad(
    loss: LossId,
    logits: ArrayView1<f64>,
    target: &Target,
    weights: Option<&[f64]>,
) -> Result<(f64, Array1<f64>), String> {
    match (loss, target) {
        (LossId::CrossEntropy, Target::Class(c)) if *c < logits.len() => {
            Ok(cross_entropy(logits, *c, weights))
        }
        (LossId::BinaryCrossEntropy, Target::MultiHot(y)) if y.len() == logits.len() => {
            Ok(binary_cross_entropy(logits, y, weights))
        }
        _ => Err(format!(
            "target {target:?} does not fit {loss:?} over {} outputs",
            logits.len()
        )),
    }
}
