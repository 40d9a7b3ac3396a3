use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use super::{forward_binary, HeadError, MlpHead};
use crate::corpus::{FineLabel, FineSet};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OvrMode {
    /// Coarse verdict came from a model; an empty set is a valid answer.
    Pipeline,
    /// Posts are known hostile; an empty set falls back to the top class.
    #[default]
    GoldHostile,
}

/// Four independent two-way softmax members indexed by [`FineLabel::index`].
/// Output index 0 of each member is the "yes" class.
#[derive(Clone, Debug, PartialEq)]
pub struct OvrEnsemble {
    members: [Option<MlpHead>; 4],
    threshold: f64,
}

impl Default for OvrEnsemble {
    fn default() -> Self {
        OvrEnsemble::new(DEFAULT_THRESHOLD)
    }
}

impl OvrEnsemble {
    pub fn new(threshold: f64) -> OvrEnsemble {
        OvrEnsemble {
            members: [None, None, None, None],
            threshold,
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn set_threshold(&mut self, threshold: f64) {
        self.threshold = threshold;
    }

    pub fn set_member(&mut self, class: FineLabel, head: MlpHead) {
        self.members[class.index()] = Some(head);
    }

    pub fn member(&self, class: FineLabel) -> Option<&MlpHead> {
        self.members[class.index()].as_ref()
    }

    pub fn member_mut(&mut self, class: FineLabel) -> Option<&mut MlpHead> {
        self.members[class.index()].as_mut()
    }

    pub fn is_complete(&self) -> bool {
        self.members.iter().all(Option::is_some)
    }

    /// Positive-class probability from every member.
    pub fn scores(&self, pooled: ArrayView1<f64>) -> Result<[f64; 4], HeadError> {
        let mut out = [0.0; 4];
        for class in FineLabel::ALL {
            let head = self
                .member(class)
                .ok_or(HeadError::UntrainedMember(class))?;
            out[class.index()] = forward_binary(pooled, head)?[0];
        }
        Ok(out)
    }
}

/// Thresholds member scores into a label set. In gold-hostile mode an empty
/// result is replaced by the single best-scoring class (lowest index on ties).
pub fn merge_scores(scores: [f64; 4], threshold: f64, mode: OvrMode) -> FineSet {
    let mut set = FineSet::default();
    for class in FineLabel::ALL {
        if scores[class.index()] >= threshold {
            set.insert(class);
        }
    }
    if set.is_empty() && mode == OvrMode::GoldHostile {
        let mut best = 0;
        for i in 1..4 {
            if scores[i] > scores[best] {
                best = i;
            }
        }
        set.insert(FineLabel::from_index(best).expect("index below 4"));
    }
    set
}

pub fn ovr_predict(
    pooled: ArrayView1<f64>,
    ensemble: &OvrEnsemble,
    mode: OvrMode,
) -> Result<FineSet, HeadError> {
    let scores = ensemble.scores(pooled)?;
    Ok(merge_scores(scores, ensemble.threshold, mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heads::layers::Linear;
    use crate::heads::OutputKind;
    use ndarray::{array, Array1, Array2};
    use proptest::prelude::*;

    fn set(labels: &[FineLabel]) -> FineSet {
        let mut s = FineSet::default();
        labels.iter().for_each(|&l| s.insert(l));
        s
    }

    /// A member whose yes-probability is `p` for every input.
    fn constant_member(p: f64) -> MlpHead {
        let logit = (p / (1.0 - p)).ln();
        let l = |i, o| Linear::from_weights(Array2::zeros((o, i)), Array1::zeros(o));
        let out = Linear::from_weights(Array2::zeros((2, 2)), array![logit, 0.0]);
        MlpHead::from_layers([l(3, 2), l(2, 2), l(2, 2), out], OutputKind::Softmax, 0.1).unwrap()
    }

    fn ensemble(ps: [f64; 4]) -> OvrEnsemble {
        let mut e = OvrEnsemble::default();
        for c in FineLabel::ALL {
            e.set_member(c, constant_member(ps[c.index()]));
        }
        e
    }

    #[test]
    fn thresholding_picks_members_above_tau() {
        let x = array![0.0, 0.0, 0.0];
        let e = ensemble([0.9, 0.7, 0.2, 0.1]);
        let got = ovr_predict(x.view(), &e, OvrMode::GoldHostile).unwrap();
        assert_eq!(got, set(&[FineLabel::Fake, FineLabel::Hate]));
    }

    #[test]
    fn gold_hostile_falls_back_to_argmax() {
        let x = array![1.0, 2.0, 3.0];
        // order (fake, hate, defamation, offensive); offensive is the largest
        let e = ensemble([0.1, 0.2, 0.3, 0.4]);
        let got = ovr_predict(x.view(), &e, OvrMode::GoldHostile).unwrap();
        assert_eq!(got, set(&[FineLabel::Offensive]));
        let got = ovr_predict(x.view(), &e, OvrMode::Pipeline).unwrap();
        assert!(got.is_empty());
    }

    #[test]
    fn untrained_member_is_an_error() {
        let mut e = OvrEnsemble::default();
        e.set_member(FineLabel::Fake, constant_member(0.6));
        assert!(matches!(
            ovr_predict(array![0.0, 0.0, 0.0].view(), &e, OvrMode::Pipeline),
            Err(HeadError::UntrainedMember(FineLabel::Hate))
        ));
    }

    #[test]
    fn ties_choose_lowest_index() {
        let got = merge_scores([0.2, 0.3, 0.3, 0.1], 0.5, OvrMode::GoldHostile);
        assert_eq!(got, set(&[FineLabel::Hate]));
    }

    proptest! {
        #[test]
        fn gold_hostile_never_empty(
            scores in proptest::array::uniform4(0.0f64..1.0),
            tau in 0.0f64..1.0,
        ) {
            prop_assert!(!merge_scores(scores, tau, OvrMode::GoldHostile).is_empty());
        }

        #[test]
        fn pipeline_is_pure_thresholding(
            scores in proptest::array::uniform4(0.0f64..1.0),
            tau in 0.0f64..1.0,
        ) {
            let got = merge_scores(scores, tau, OvrMode::Pipeline);
            for c in FineLabel::ALL {
                prop_assert_eq!(got.contains(c), scores[c.index()] >= tau);
            }
        }
    }
}
