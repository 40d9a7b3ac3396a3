use super::ParamVisitor;
use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Fully connected layer `y = W x + b` with gradient buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    /// out x in
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub gw: Array2<f64>,
    pub gb: Array1<f64>,
}

impl Linear {
    /// Glorot-uniform weights, zero bias.
    pub fn new(input: usize, output: usize, rng: &mut ChaCha8Rng) -> Linear {
        let limit = (6.0 / (input + output) as f64).sqrt();
        let w = Array2::from_shape_fn((output, input), |_| rng.gen_range(-limit..limit));
        Linear::from_weights(w, Array1::zeros(output))
    }

    pub fn from_weights(w: Array2<f64>, b: Array1<f64>) -> Linear {
        let gw = Array2::zeros(w.raw_dim());
        let gb = Array1::zeros(b.raw_dim());
        Linear { w, b, gw, gb }
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn forward(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.w.dot(&x) + &self.b
    }

    /// Accumulates parameter gradients and returns dL/dx.
    pub fn backward(&mut self, x: ArrayView1<f64>, dy: ArrayView1<f64>) -> Array1<f64> {
        let dy2 = dy.insert_axis(Axis(1));
        let x2 = x.insert_axis(Axis(0));
        self.gw += &dy2.dot(&x2);
        self.gb += &dy;
        self.w.t().dot(&dy)
    }

    pub fn zero_grad(&mut self) {
        self.gw.fill(0.0);
        self.gb.fill(0.0);
    }

    pub fn visit(&mut self, prefix: &str, f: &mut ParamVisitor) {
        f(
            &format!("{prefix}.w"),
            self.w.as_slice_mut().expect("standard layout"),
            self.gw.as_slice().expect("standard layout"),
            true,
        );
        f(
            &format!("{prefix}.b"),
            self.b.as_slice_mut().expect("standard layout"),
            self.gb.as_slice().expect("standard layout"),
            false,
        );
    }
}

/// Exact GeLU: `x * Phi(x)`.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

pub fn gelu_grad(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    cdf + x * pdf
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exp = logits.mapv(|z| (z - max).exp());
    let sum = exp.sum();
    exp / sum
}

/// Inverted dropout mask: kept units scaled by `1 / (1 - rate)`.
pub fn dropout_mask(len: usize, rate: f64, rng: &mut ChaCha8Rng) -> Array1<f64> {
    let keep = 1.0 - rate;
    Array1::from_shape_fn(len, |_| {
        if rng.gen::<f64>() < keep {
            1.0 / keep
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn gelu_reference_points() {
        assert_eq!(gelu(0.0), 0.0);
        // x * Phi(x) at x = 1: Phi(1) = 0.8413447460685429
        assert!((gelu(1.0) - 0.841_344_746_068_542_9).abs() < 1e-12);
        let h = 1e-6;
        for x in [-2.0, -0.3, 0.0, 0.7, 3.0] {
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let a = softmax(array![1.0, 2.0, 3.0].view());
        let b = softmax(array![1001.0, 1002.0, 1003.0].view());
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_extremes_stay_finite() {
        assert!(sigmoid(-800.0) >= 0.0);
        assert!(sigmoid(800.0) <= 1.0);
        assert_eq!(sigmoid(0.0), 0.5);
    }
}
