//! Histogram-binned regression trees driven by per-sample gradient and
//! hessian. With `g = -y, h = 1, lambda = 0` the split gain is the Gini
//! (variance) reduction and leaves hold class-1 frequencies; with logistic
//! gradients it is the second-order boosting gain.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const MIN_GAIN: f64 = 1e-12;

/// Per-feature bin edges and the binned training matrix (feature-major).
pub(crate) struct Binned {
    edges: Vec<Vec<f64>>,
    bins: Vec<Vec<u16>>,
}

impl Binned {
    /// Candidate thresholds are midpoints between distinct values, thinned to
    /// at most `max_bins - 1` by quantile when a feature has many values.
    pub fn new(x: ArrayView2<f64>, max_bins: usize) -> Binned {
        let max_edges = max_bins.max(2) - 1;
        let mut edges = Vec::with_capacity(x.ncols());
        let mut bins = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let mut values: Vec<f64> = col.to_vec();
            values.sort_by(f64::total_cmp);
            values.dedup();
            let mids: Vec<f64> = values.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
            let e = if mids.len() <= max_edges {
                mids
            } else {
                let mut picked: Vec<f64> = (1..=max_edges)
                    .map(|k| mids[k * mids.len() / (max_edges + 1)])
                    .collect();
                picked.dedup();
                picked
            };
            bins.push(col.iter().map(|&v| bin_of(&e, v)).collect());
            edges.push(e);
        }
        Binned { edges, bins }
    }

    pub fn features(&self) -> usize {
        self.edges.len()
    }
}

fn bin_of(edges: &[f64], v: f64) -> u16 {
    edges.partition_point(|&e| e < v) as u16
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) enum Node {
    Leaf(f64),
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: ArrayView1<f64>) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    #[cfg(test)]
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct TreeParams {
    pub max_depth: Option<usize>,
    pub lambda: f64,
    pub min_child_weight: f64,
    pub min_samples_leaf: usize,
    /// Features examined per split; the search continues past this count
    /// until some valid split is found.
    pub max_features: Option<usize>,
}

struct Best {
    gain: f64,
    feature: usize,
    edge: usize,
}

pub(crate) fn grow(
    data: &Binned,
    grad: &[f64],
    hess: &[f64],
    samples: Vec<usize>,
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let mut nodes = Vec::new();
    // (node slot, samples, depth)
    let mut stack = vec![(0usize, samples, 0usize)];
    nodes.push(Node::Leaf(0.0));
    let mut order: Vec<usize> = (0..data.features()).collect();
    while let Some((slot, idx, depth)) = stack.pop() {
        let (g, h) = idx
            .iter()
            .fold((0.0, 0.0), |(g, h), &i| (g + grad[i], h + hess[i]));
        let leaf = if h + params.lambda > 0.0 {
            -g / (h + params.lambda)
        } else {
            0.0
        };
        nodes[slot] = Node::Leaf(leaf);
        if params.max_depth.is_some_and(|d| depth >= d) || idx.len() < 2 * params.min_samples_leaf {
            continue;
        }
        if params.max_features.is_some() {
            order.shuffle(rng);
        }
        let parent = g * g / (h + params.lambda).max(f64::MIN_POSITIVE);
        let mut best: Option<Best> = None;
        for (examined, &f) in order.iter().enumerate() {
            if let Some(k) = params.max_features {
                if examined >= k && best.is_some() {
                    break;
                }
            }
            let n_bins = data.edges[f].len() + 1;
            if n_bins < 2 {
                continue;
            }
            let mut hg = vec![0.0; n_bins];
            let mut hh = vec![0.0; n_bins];
            let mut hc = vec![0usize; n_bins];
            let col = &data.bins[f];
            for &i in &idx {
                let b = col[i] as usize;
                hg[b] += grad[i];
                hh[b] += hess[i];
                hc[b] += 1;
            }
            let (mut gl, mut hl, mut cl) = (0.0, 0.0, 0usize);
            for e in 0..n_bins - 1 {
                gl += hg[e];
                hl += hh[e];
                cl += hc[e];
                let (gr, hr, cr) = (g - gl, h - hl, idx.len() - cl);
                if cl < params.min_samples_leaf || cr < params.min_samples_leaf {
                    continue;
                }
                if hl < params.min_child_weight || hr < params.min_child_weight {
                    continue;
                }
                let gain = gl * gl / (hl + params.lambda) + gr * gr / (hr + params.lambda) - parent;
                if gain > MIN_GAIN && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Best {
                        gain,
                        feature: f,
                        edge: e,
                    });
                }
            }
        }
        let Some(best) = best else { continue };
        let col = &data.bins[best.feature];
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| (col[i] as usize) <= best.edge);
        let left = nodes.len();
        nodes.push(Node::Leaf(0.0));
        nodes.push(Node::Leaf(0.0));
        nodes[slot] = Node::Split {
            feature: best.feature,
            threshold: data.edges[best.feature][best.edge],
            left,
            right: left + 1,
        };
        stack.push((left + 1, right_idx, depth + 1));
        stack.push((left, left_idx, depth + 1));
    }
    Tree { nodes }
}
