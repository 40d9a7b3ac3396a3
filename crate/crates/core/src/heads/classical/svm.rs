//! C-SVC with a Gaussian kernel, solved by SMO with second-order working-set
//! selection.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gamma {
    /// `1 / (F * Var(X))` over all feature values.
    Scale,
    Value(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: Gamma,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            gamma: Gamma::Scale,
            tolerance: 1e-3,
            max_iter: 10_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Svm {
    gamma: f64,
    /// Support vectors, one per row.
    support: Array2<f64>,
    /// `alpha_i * y_i` per support vector.
    coef: Array1<f64>,
    rho: f64,
}

const TAU: f64 = 1e-12;

fn rbf(gamma: f64, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

fn scale_gamma(x: ArrayView2<f64>) -> f64 {
    let n = x.len() as f64;
    let mean = x.sum() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var > 0.0 {
        1.0 / (x.ncols() as f64 * var)
    } else {
        1.0
    }
}

/// Rows of `Q_ij = y_i y_j K(x_i, x_j)`, cached up to a memory budget.
struct QMatrix<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [f64],
    gamma: f64,
    rows: Vec<Option<Vec<f64>>>,
    cached: usize,
    limit: usize,
}

impl<'a> QMatrix<'a> {
    fn new(x: ArrayView2<'a, f64>, y: &'a [f64], gamma: f64) -> Self {
        let n = x.nrows();
        QMatrix {
            x,
            y,
            gamma,
            rows: vec![None; n],
            cached: 0,
            limit: (1usize << 28) / (8 * n.max(1)),
        }
    }

    fn compute(&self, i: usize) -> Vec<f64> {
        let xi = self.x.row(i);
        (0..self.x.nrows())
            .map(|j| self.y[i] * self.y[j] * rbf(self.gamma, xi, self.x.row(j)))
            .collect()
    }

    fn row(&mut self, i: usize) -> std::borrow::Cow<'_, [f64]> {
        if self.rows[i].is_none() && self.cached < self.limit {
            self.rows[i] = Some(self.compute(i));
            self.cached += 1;
        }
        match &self.rows[i] {
            Some(r) => std::borrow::Cow::Borrowed(r.as_slice()),
            None => std::borrow::Cow::Owned(self.compute(i)),
        }
    }
}

impl Svm {
    pub fn fit(x: ArrayView2<f64>, labels: &[bool], params: &SvmParams) -> Svm {
        let n = x.nrows();
        let gamma = match params.gamma {
            Gamma::Scale => scale_gamma(x),
            Gamma::Value(g) => g,
        };
        let c = params.c;
        let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
        let mut q = QMatrix::new(x, &y, gamma);
        let qd = vec![1.0; n];
        let mut alpha = vec![0.0; n];
        let mut grad = vec![-1.0; n];
        let up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
        let low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

        for _ in 0..params.max_iter {
            let mut gmax = f64::NEG_INFINITY;
            let mut i = usize::MAX;
            for t in 0..n {
                if up(alpha[t], y[t]) && -y[t] * grad[t] >= gmax {
                    gmax = -y[t] * grad[t];
                    i = t;
                }
            }
            if i == usize::MAX {
                break;
            }
            let qi = q.row(i).into_owned();
            let mut gmax2 = f64::NEG_INFINITY;
            let mut j = usize::MAX;
            let mut obj_min = f64::INFINITY;
            for t in 0..n {
                if !low(alpha[t], y[t]) {
                    continue;
                }
                let yg = y[t] * grad[t];
                gmax2 = gmax2.max(yg);
                let b = gmax + yg;
                if b > 0.0 {
                    let a = qd[i] + qd[t] - 2.0 * y[i] * y[t] * qi[t];
                    let obj = -b * b / if a > 0.0 { a } else { TAU };
                    if obj <= obj_min {
                        obj_min = obj;
                        j = t;
                    }
                }
            }
            if gmax + gmax2 < params.tolerance || j == usize::MAX {
                break;
            }
            let qj = q.row(j).into_owned();
            let (old_i, old_j) = (alpha[i], alpha[j]);
            if y[i] != y[j] {
                let quad = (qd[i] + qd[j] + 2.0 * qi[j]).max(TAU);
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let quad = (qd[i] + qd[j] - 2.0 * qi[j]).max(TAU);
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            for t in 0..n {
                grad[t] += qi[t] * di + qj[t] * dj;
            }
        }

        let rho = {
            let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
            let (mut sum, mut free) = (0.0, 0usize);
            for t in 0..n {
                let yg = y[t] * grad[t];
                if alpha[t] >= c {
                    if y[t] < 0.0 {
                        ub = ub.min(yg);
                    } else {
                        lb = lb.max(yg);
                    }
                } else if alpha[t] <= 0.0 {
                    if y[t] > 0.0 {
                        ub = ub.min(yg);
                    } else {
                        lb = lb.max(yg);
                    }
                } else {
                    free += 1;
                    sum += yg;
                }
            }
            if free > 0 {
                sum / free as f64
            } else {
                (ub + lb) / 2.0
            }
        };

        let sv: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
        let mut support = Array2::zeros((sv.len(), x.ncols()));
        for (r, &t) in sv.iter().enumerate() {
            support.row_mut(r).assign(&x.row(t));
        }
        let coef = sv.iter().map(|&t| alpha[t] * y[t]).collect();
        Svm {
            gamma,
            support,
            coef,
            rho,
        }
    }

    pub fn support_count(&self) -> usize {
        self.coef.len()
    }

    /// Signed distance-like score; positive means the positive class.
    pub fn decision(&self, x: ArrayView1<f64>) -> f64 {
        self.support
            .rows()
            .into_iter()
            .zip(&self.coef)
            .map(|(s, &a)| a * rbf(self.gamma, s, x))
            .sum::<f64>()
            - self.rho
    }
}
