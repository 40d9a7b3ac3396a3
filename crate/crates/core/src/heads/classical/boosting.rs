use ndarray::{ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow, Binned, Tree, TreeParams};
use crate::heads::layers::sigmoid;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    /// Minimum hessian sum per child.
    pub min_child_weight: f64,
    pub max_bins: usize,
}

impl BoostParams {
    /// Classic gradient boosting: shallow trees, small steps, no leaf penalty.
    pub fn gbdt() -> BoostParams {
        BoostParams {
            n_estimators: 100,
            learning_rate: 0.1,
            max_depth: 3,
            lambda: 0.0,
            min_child_weight: 1e-3,
            max_bins: 64,
        }
    }

    /// Regularized boosting with deeper trees.
    pub fn xgboost() -> BoostParams {
        BoostParams {
            n_estimators: 100,
            learning_rate: 0.3,
            max_depth: 6,
            lambda: 1.0,
            min_child_weight: 1.0,
            max_bins: 256,
        }
    }
}

/// Logistic-loss boosted trees with Newton leaf values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Boosted {
    base_margin: f64,
    learning_rate: f64,
    trees: Vec<Tree>,
}

impl Boosted {
    pub fn fit(x: ArrayView2<f64>, y: &[bool], params: &BoostParams) -> Boosted {
        let n = x.nrows();
        let pos = y.iter().filter(|&&v| v).count() as f64;
        let base_margin = (pos / (n as f64 - pos)).ln();
        let binned = Binned::new(x, params.max_bins);
        let tree_params = TreeParams {
            max_depth: Some(params.max_depth),
            lambda: params.lambda,
            min_child_weight: params.min_child_weight,
            min_samples_leaf: 1,
            max_features: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut margin = vec![base_margin; n];
        let mut trees = Vec::with_capacity(params.n_estimators);
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        for _ in 0..params.n_estimators {
            for i in 0..n {
                let p = sigmoid(margin[i]);
                grad[i] = p - if y[i] { 1.0 } else { 0.0 };
                hess[i] = (p * (1.0 - p)).max(1e-16);
            }
            let tree = grow(
                &binned,
                &grad,
                &hess,
                (0..n).collect(),
                &tree_params,
                &mut rng,
            );
            for (i, row) in x.rows().into_iter().enumerate() {
                margin[i] += params.learning_rate * tree.predict(row);
            }
            trees.push(tree);
        }
        Boosted {
            base_margin,
            learning_rate: params.learning_rate,
            trees,
        }
    }

    pub fn n_estimators(&self) -> usize {
        self.trees.len()
    }

    pub fn margin(&self, x: ArrayView1<f64>) -> f64 {
        self.base_margin + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn proba(&self, x: ArrayView1<f64>) -> f64 {
        sigmoid(self.margin(x))
    }
}
