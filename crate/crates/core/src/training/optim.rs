use serde::{Deserialize, Serialize};

use crate::heads::Head;

/// Linear warmup to `peak` over the first `ceil(warmup * total)` steps, then
/// linear decay reaching 0 at the final step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSchedule {
    pub peak: f64,
    pub total_steps: usize,
    pub warmup_steps: usize,
}

impl LinearSchedule {
    pub fn new(peak: f64, total_steps: usize, warmup: f64) -> LinearSchedule {
        let warmup_steps = (warmup * total_steps as f64).ceil() as usize;
        LinearSchedule {
            peak,
            total_steps,
            warmup_steps,
        }
    }

    pub fn lr(&self, step: usize) -> f64 {
        let (t, w) = (self.total_steps, self.warmup_steps);
        if step < w {
            return self.peak * step as f64 / w as f64;
        }
        let last = t.saturating_sub(1);
        if last <= w {
            return if step >= last { 0.0 } else { self.peak };
        }
        self.peak * last.saturating_sub(step) as f64 / (last - w) as f64
    }
}

/// Adam with decoupled weight decay. Decay applies only to tensors the head
/// flags (weights, not biases).
#[derive(Clone, Debug)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: i32,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl AdamW {
    pub fn new(weight_decay: f64) -> AdamW {
        AdamW {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn step<H: Head + ?Sized>(&mut self, head: &mut H, lr: f64) {
        self.step += 1;
        let (b1, b2, eps, wd) = (self.beta1, self.beta2, self.eps, self.weight_decay);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let moments = &mut self.moments;
        let mut k = 0;
        head.visit_params(&mut |_, value, grad, decay| {
            if moments.len() <= k {
                moments.push((vec![0.0; value.len()], vec![0.0; value.len()]));
            }
            let (m, v) = &mut moments[k];
            for i in 0..value.len() {
                let g = grad[i];
                m[i] = b1 * m[i] + (1.0 - b1) * g;
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                if decay {
                    value[i] *= 1.0 - lr * wd;
                }
                value[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
            k += 1;
        });
    }
}
