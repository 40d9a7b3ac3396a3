use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::linalg::symmetric_eigen;

use super::{Encoding, MAX_SEQUENCE_LENGTH};

/// Relative eigenvalue floor below which a direction counts as zero variance.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum PcaError {
    #[error("need at least k = {k} samples, got {n}")]
    TooFewSamples { n: usize, k: usize },
    #[error("k must be between 1 and d = {d}, got {k}")]
    BadDimension { k: usize, d: usize },
    #[error("data has zero variance")]
    ZeroVariance,
    #[error("reducer expects {expected}-dimensional rows, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Fitted projection onto the top principal directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaReducer {
    pub mean: Array1<f64>,
    /// k x d, orthonormal rows.
    pub components: Array2<f64>,
    /// Sample variance (n - 1 denominator) along each component.
    pub explained_variance: Array1<f64>,
    pub total_variance: f64,
}

impl PcaReducer {
    pub fn k(&self) -> usize {
        self.components.nrows()
    }

    pub fn d(&self) -> usize {
        self.components.ncols()
    }

    pub fn transform(&self, rows: ArrayView2<f64>) -> Result<Array2<f64>, PcaError> {
        if rows.ncols() != self.d() {
            return Err(PcaError::DimensionMismatch {
                expected: self.d(),
                got: rows.ncols(),
            });
        }
        let centered = &rows - &self.mean;
        Ok(centered.dot(&self.components.t()))
    }

    pub fn inverse_transform(&self, reduced: ArrayView2<f64>) -> Array2<f64> {
        reduced.dot(&self.components) + &self.mean
    }
}

/// Fits PCA on the rows of `vectors` (n x d).
///
/// Works on whichever of the covariance (d x d) or Gram (n x n) matrix is
/// smaller. When the data has rank below `k` the reducer is clipped to the
/// rank and a warning is logged.
pub fn fit_pca(vectors: ArrayView2<f64>, k: usize) -> Result<PcaReducer, PcaError> {
    let (n, d) = vectors.dim();
    if k == 0 || k > d {
        return Err(PcaError::BadDimension { k, d });
    }
    if n < k || n < 2 {
        return Err(PcaError::TooFewSamples { n, k });
    }
    let mean = vectors.mean_axis(Axis(0)).expect("n >= 2");
    let centered = &vectors - &mean;
    let denom = (n - 1) as f64;
    let total_variance = centered.iter().map(|x| x * x).sum::<f64>() / denom;

    let (values, directions) = if d <= n {
        let cov = centered.t().dot(&centered);
        let eig = symmetric_eigen(&cov);
        (eig.values, eig.vectors)
    } else {
        // right singular vectors from the left ones: v = X^T u / sqrt(lambda)
        let gram = centered.dot(&centered.t());
        let eig = symmetric_eigen(&gram);
        let mut dirs = centered.t().dot(&eig.vectors);
        for (j, mut col) in dirs.axis_iter_mut(Axis(1)).enumerate() {
            let lambda = eig.values[j];
            if lambda > 0.0 {
                col /= lambda.sqrt();
            }
        }
        (eig.values, dirs)
    };

    let top = values.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return Err(PcaError::ZeroVariance);
    }
    let rank = values
        .iter()
        .take_while(|&&v| v > RANK_TOLERANCE * top)
        .count();
    let kept = if rank < k {
        log::warn!("data rank {rank} is below requested k = {k}; keeping {rank} components");
        rank
    } else {
        k
    };

    let mut components = directions.slice(s![.., ..kept]).t().to_owned();
    for mut row in components.axis_iter_mut(Axis(0)) {
        let norm = row.dot(&row).sqrt();
        row /= norm;
        // sign convention: largest-magnitude entry positive
        let pivot = row
            .iter()
            .copied()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            row.mapv_inplace(|x| -x);
        }
    }
    let explained_variance = values.slice(s![..kept]).mapv(|v| v.max(0.0) / denom);
    Ok(PcaReducer {
        mean,
        components,
        explained_variance,
        total_variance,
    })
}

/// Projects every subword row of `encoding` onto the reducer: m x k.
pub fn reduce(encoding: &Encoding, reducer: &PcaReducer) -> Result<Array2<f64>, PcaError> {
    reducer.transform(encoding.sequence_f64().view())
}

/// Concatenates the reduced rows into a fixed-size vector of
/// `fixed_len * k` entries, zero-padding short posts and truncating long ones.
pub fn flatten_for_classical(reduced: ArrayView2<f64>, fixed_len: usize) -> Vec<f64> {
    let k = reduced.ncols();
    let mut out = vec![0.0; fixed_len * k];
    for (i, row) in reduced.outer_iter().take(fixed_len).enumerate() {
        out[i * k..(i + 1) * k].copy_from_slice(row.as_slice().unwrap_or(&row.to_vec()));
    }
    out
}

/// Default flattening length, equal to the maximum sequence length.
pub const DEFAULT_FLATTEN_LEN: usize = MAX_SEQUENCE_LENGTH;
