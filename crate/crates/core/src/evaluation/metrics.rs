use std::fmt::{Debug, Display};

use serde::{Deserialize, Serialize};

use super::EvalError;

fn check_lengths<L>(pred: &[L], gold: &[L]) -> Result<(), EvalError> {
    if pred.len() != gold.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            gold: gold.len(),
        });
    }
    if gold.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

fn index_of<L: PartialEq + Debug>(classes: &[L], label: &L) -> Result<usize, EvalError> {
    classes
        .iter()
        .position(|c| c == label)
        .ok_or_else(|| EvalError::UnknownLabel(format!("{label:?}")))
}

/// Fraction of exact matches.
pub fn accuracy<L: PartialEq>(pred: &[L], gold: &[L]) -> Result<f64, EvalError> {
    check_lengths(pred, gold)?;
    let hits = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / gold.len() as f64)
}

/// Counts indexed `[gold][pred]` in the order of `classes`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn gold_support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }

    /// Header row of predicted labels, then one row per gold label.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gold\\pred");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.counts) {
            out.push_str(l);
            for c in row {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn confusion_matrix<L: PartialEq + Debug + Display>(
    pred: &[L],
    gold: &[L],
    classes: &[L],
) -> Result<ConfusionMatrix, EvalError> {
    check_lengths(pred, gold)?;
    let k = classes.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (p, g) in pred.iter().zip(gold) {
        counts[index_of(classes, g)?][index_of(classes, p)?] += 1;
    }
    Ok(ConfusionMatrix {
        labels: classes.iter().map(|c| c.to_string()).collect(),
        counts,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1Breakdown {
    pub per_class: Vec<ClassScore>,
    pub weighted_f1: f64,
    /// Classes whose precision, recall or F1 hit a zero denominator.
    pub zero_division: Vec<String>,
}

fn ratio(num: u64, den: u64, flagged: &mut bool) -> f64 {
    if den == 0 {
        *flagged = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class precision, recall and F1 with support-weighted average.
/// Undefined ratios are 0 and the class is listed in `zero_division`.
pub fn f1_breakdown(matrix: &ConfusionMatrix) -> F1Breakdown {
    let n = matrix.total();
    let mut per_class = Vec::with_capacity(matrix.labels.len());
    let mut zero_division = Vec::new();
    let mut weighted = 0.0;
    for (c, label) in matrix.labels.iter().enumerate() {
        let tp = matrix.counts[c][c];
        let support = matrix.gold_support(c);
        let mut flagged = false;
        let precision = ratio(tp, matrix.predicted(c), &mut flagged);
        let recall = ratio(tp, support, &mut flagged);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            flagged = true;
            0.0
        };
        if flagged {
            zero_division.push(label.clone());
        }
        weighted += support as f64 / n as f64 * f1;
        per_class.push(ClassScore {
            label: label.clone(),
            precision,
            recall,
            f1,
            support,
        });
    }
    F1Breakdown {
        per_class,
        weighted_f1: weighted,
        zero_division,
    }
}

pub fn weighted_f1<L: PartialEq + Debug + Display>(
    pred: &[L],
    gold: &[L],
    classes: &[L],
) -> Result<f64, EvalError> {
    let breakdown = f1_breakdown(&confusion_matrix(pred, gold, classes)?);
    for label in &breakdown.zero_division {
        log::warn!("zero denominator in F1 for class {label}; scored as 0");
    }
    Ok(breakdown.weighted_f1)
}
