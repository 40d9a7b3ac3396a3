//! Classical learners over flattened frozen features.

mod boosting;
mod forest;
mod svm;
mod tree;

use std::fmt;
use std::str::FromStr;

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

pub use boosting::{BoostParams, Boosted};
pub use forest::{Forest, ForestParams, DEFAULT_ESTIMATORS};
pub use svm::{Gamma, Svm, SvmParams};

use super::layers::sigmoid;

#[derive(Debug, thiserror::Error)]
pub enum ClassicalError {
    #[error("need at least 2 training rows, got {0}")]
    TooFewSamples(usize),
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("{rows} feature rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("expected {expected} features, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite feature value")]
    NonFinite,
    #[error("unknown classical algorithm `{0}`")]
    UnknownAlgorithm(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassicalAlgorithm {
    SvmRbf,
    RandomForest,
    Gbdt,
    Xgboost,
}

impl ClassicalAlgorithm {
    pub const ALL: [ClassicalAlgorithm; 4] = [
        ClassicalAlgorithm::SvmRbf,
        ClassicalAlgorithm::RandomForest,
        ClassicalAlgorithm::Gbdt,
        ClassicalAlgorithm::Xgboost,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassicalAlgorithm::SvmRbf => "svm_rbf",
            ClassicalAlgorithm::RandomForest => "random_forest",
            ClassicalAlgorithm::Gbdt => "gbdt",
            ClassicalAlgorithm::Xgboost => "xgboost",
        }
    }
}

impl fmt::Display for ClassicalAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassicalAlgorithm {
    type Err = ClassicalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "svm" | "svm_rbf" | "svm-rbf" => Ok(ClassicalAlgorithm::SvmRbf),
            "rf" | "random_forest" | "random-forest" => Ok(ClassicalAlgorithm::RandomForest),
            "gbdt" => Ok(ClassicalAlgorithm::Gbdt),
            "xgb" | "xgboost" => Ok(ClassicalAlgorithm::Xgboost),
            _ => Err(ClassicalError::UnknownAlgorithm(s.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalHead {
    pub algorithm: ClassicalAlgorithm,
    /// Reduce each subword vector with PCA before flattening.
    pub use_pca: bool,
    pub svm: SvmParams,
    pub forest: ForestParams,
    pub gbdt: BoostParams,
    pub xgboost: BoostParams,
    pub seed: u64,
}

impl ClassicalHead {
    pub fn new(algorithm: ClassicalAlgorithm) -> ClassicalHead {
        ClassicalHead {
            algorithm,
            use_pca: false,
            svm: SvmParams::default(),
            forest: ForestParams::default(),
            gbdt: BoostParams::gbdt(),
            xgboost: BoostParams::xgboost(),
            seed: 0,
        }
    }

    pub fn with_pca(mut self, use_pca: bool) -> Self {
        self.use_pca = use_pca;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassicalLearner {
    Svm(Svm),
    Forest(Forest),
    Boosted(Boosted),
}

/// A fitted classical model. Label `true` is the positive class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalModel {
    pub algorithm: ClassicalAlgorithm,
    pub features: usize,
    pub learner: ClassicalLearner,
}

impl ClassicalModel {
    /// Positive-class score in `[0, 1]`; 0.5 is the decision boundary.
    pub fn score(&self, x: ArrayView1<f64>) -> Result<f64, ClassicalError> {
        if x.len() != self.features {
            return Err(ClassicalError::Dimension {
                expected: self.features,
                got: x.len(),
            });
        }
        Ok(match &self.learner {
            ClassicalLearner::Svm(m) => sigmoid(m.decision(x)),
            ClassicalLearner::Forest(m) => m.proba(x),
            ClassicalLearner::Boosted(m) => m.proba(x),
        })
    }

    pub fn predict(&self, x: ArrayView1<f64>) -> Result<bool, ClassicalError> {
        let s = self.score(x)?;
        Ok(match &self.learner {
            ClassicalLearner::Svm(m) => m.decision(x) > 0.0,
            _ => s > 0.5,
        })
    }

    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Vec<bool>, ClassicalError> {
        x.rows().into_iter().map(|r| self.predict(r)).collect()
    }

    pub fn n_estimators(&self) -> Option<usize> {
        match &self.learner {
            ClassicalLearner::Svm(_) => None,
            ClassicalLearner::Forest(m) => Some(m.n_estimators()),
            ClassicalLearner::Boosted(m) => Some(m.n_estimators()),
        }
    }
}

pub fn classical_fit(
    features: ArrayView2<f64>,
    labels: &[bool],
    head: &ClassicalHead,
) -> Result<ClassicalModel, ClassicalError> {
    let n = features.nrows();
    if n != labels.len() {
        return Err(ClassicalError::LabelCount {
            rows: n,
            labels: labels.len(),
        });
    }
    if n < 2 {
        return Err(ClassicalError::TooFewSamples(n));
    }
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(ClassicalError::SingleClass);
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(ClassicalError::NonFinite);
    }
    let learner = match head.algorithm {
        ClassicalAlgorithm::SvmRbf => ClassicalLearner::Svm(Svm::fit(features, labels, &head.svm)),
        ClassicalAlgorithm::RandomForest => {
            ClassicalLearner::Forest(Forest::fit(features, labels, &head.forest, head.seed))
        }
        ClassicalAlgorithm::Gbdt => {
            ClassicalLearner::Boosted(Boosted::fit(features, labels, &head.gbdt))
        }
        ClassicalAlgorithm::Xgboost => {
            ClassicalLearner::Boosted(Boosted::fit(features, labels, &head.xgboost))
        }
    };
    Ok(ClassicalModel {
        algorithm: head.algorithm,
        features: features.ncols(),
        learner,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn accuracy(model: &ClassicalModel, x: &Array2<f64>, y: &[bool]) -> f64 {
        let p = model.predict_batch(x.view()).unwrap();
        p.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
    }

    fn separable() -> (Array2<f64>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let pos = i % 2 == 0;
            let cx = if pos { 2.0 } else { -2.0 };
            rows.push([cx + rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
            y.push(pos);
        }
        (Array2::from(rows), y)
    }

    /// 20 points on the four XOR quadrants.
    fn xor() -> (Array2<f64>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let (sx, sy) = [(1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)][i % 4];
            rows.push([sx * rng.gen_range(0.2..1.0), sy * rng.gen_range(0.2..1.0)]);
            y.push(sx * sy < 0.0);
        }
        (Array2::from(rows), y)
    }

    #[test]
    fn svm_separates_linearly_separable_data() {
        let (x, y) = separable();
        let m = classical_fit(
            x.view(),
            &y,
            &ClassicalHead::new(ClassicalAlgorithm::SvmRbf),
        )
        .unwrap();
        assert_eq!(accuracy(&m, &x, &y), 1.0);
    }

    #[test]
    fn forest_has_eighty_trees() {
        let (x, y) = separable();
        let m = classical_fit(
            x.view(),
            &y,
            &ClassicalHead::new(ClassicalAlgorithm::RandomForest),
        )
        .unwrap();
        assert_eq!(m.n_estimators(), Some(80));
        assert!(accuracy(&m, &x, &y) >= 0.95);
    }

    #[test]
    fn gbdt_fits_xor() {
        let (x, y) = xor();
        let m = classical_fit(x.view(), &y, &ClassicalHead::new(ClassicalAlgorithm::Gbdt)).unwrap();
        assert!(accuracy(&m, &x, &y) > 0.9);
    }

    #[test]
    fn xgboost_fits_xor() {
        let (x, y) = xor();
        let m = classical_fit(
            x.view(),
            &y,
            &ClassicalHead::new(ClassicalAlgorithm::Xgboost),
        )
        .unwrap();
        assert!(accuracy(&m, &x, &y) > 0.9);
    }

    #[test]
    fn svm_fits_xor() {
        let (x, y) = xor();
        let mut head = ClassicalHead::new(ClassicalAlgorithm::SvmRbf);
        head.svm.c = 100.0;
        let m = classical_fit(x.view(), &y, &head).unwrap();
        assert!(accuracy(&m, &x, &y) > 0.9);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = array![[0.0], [1.0], [2.0]];
        for alg in ClassicalAlgorithm::ALL {
            assert!(matches!(
                classical_fit(x.view(), &[true, true, true], &ClassicalHead::new(alg)),
                Err(ClassicalError::SingleClass)
            ));
        }
    }

    #[test]
    fn forest_is_deterministic_per_seed() {
        let (x, y) = separable();
        let head = ClassicalHead::new(ClassicalAlgorithm::RandomForest).with_seed(3);
        let a = classical_fit(x.view(), &y, &head).unwrap();
        let b = classical_fit(x.view(), &y, &head).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn algorithm_names_round_trip() {
        for alg in ClassicalAlgorithm::ALL {
            assert_eq!(alg.as_str().parse::<ClassicalAlgorithm>().unwrap(), alg);
        }
        assert_eq!(
            "rf".parse::<ClassicalAlgorithm>().unwrap(),
            ClassicalAlgorithm::RandomForest
        );
        assert!("knn".parse::<ClassicalAlgorithm>().is_err());
    }

    #[test]
    fn model_serializes() {
        let (x, y) = xor();
        let m = classical_fit(x.view(), &y, &ClassicalHead::new(ClassicalAlgorithm::Gbdt)).unwrap();
        let back: ClassicalModel =
            serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(
            back.predict_batch(x.view()).unwrap(),
            m.predict_batch(x.view()).unwrap()
        );
    }
}
