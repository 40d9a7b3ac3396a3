use ndarray::{ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, Binned, Tree, TreeParams};

pub const DEFAULT_ESTIMATORS: usize = 80;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    /// `None` grows trees until leaves are pure.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    pub max_bins: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: DEFAULT_ESTIMATORS,
            max_depth: None,
            min_samples_leaf: 1,
            bootstrap: true,
            max_bins: 64,
        }
    }
}

/// Bagged Gini trees, `sqrt(F)` candidate features per split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<Tree>,
}

impl Forest {
    pub fn fit(x: ArrayView2<f64>, y: &[bool], params: &ForestParams, seed: u64) -> Forest {
        let n = x.nrows();
        let f = x.ncols();
        let binned = Binned::new(x, params.max_bins);
        let grad: Vec<f64> = y.iter().map(|&v| if v { -1.0 } else { 0.0 }).collect();
        let hess = vec![1.0; n];
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            lambda: 0.0,
            min_child_weight: 0.0,
            min_samples_leaf: params.min_samples_leaf.max(1),
            max_features: Some(((f as f64).sqrt().floor() as usize).max(1)),
        };
        let trees = (0..params.n_estimators)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64 + 1);
                let samples: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                grow(&binned, &grad, &hess, samples, &tree_params, &mut rng)
            })
            .collect();
        Forest { trees }
    }

    pub fn n_estimators(&self) -> usize {
        self.trees.len()
    }

    /// Mean of per-tree class-1 frequencies.
    pub fn proba(&self, x: ArrayView1<f64>) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}
