use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::metrics::{accuracy, confusion_matrix, f1_breakdown, ConfusionMatrix, F1Breakdown};
use super::EvalError;
use crate::corpus::{Coarse, Corpus, FineLabel, FineSet, Post};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One model output for one post.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub coarse: Coarse,
    pub fine: FineSet,
    /// Probability per class name (`hostile`, `non_hostile`, fine classes).
    #[serde(default)]
    pub scores: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Only gold-hostile posts are scored.
    #[default]
    GoldHostile,
    /// Every post is scored.
    Pipeline,
}

impl std::str::FromStr for EvalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gold_hostile" | "gold-hostile" => Ok(EvalMode::GoldHostile),
            "pipeline" => Ok(EvalMode::Pipeline),
            _ => Err(format!("unknown evaluation mode {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoarseReport {
    pub population: usize,
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub breakdown: F1Breakdown,
    pub confusion: ConfusionMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FineClassReport {
    pub label: FineLabel,
    pub weighted_f1: f64,
    pub breakdown: F1Breakdown,
    pub confusion: ConfusionMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FineReport {
    pub mode: EvalMode,
    pub population: usize,
    pub per_class: Vec<FineClassReport>,
    /// Arithmetic mean of the four per-class scores.
    pub average: f64,
}

impl FineReport {
    pub fn score(&self, label: FineLabel) -> f64 {
        self.per_class[label.index()].weighted_f1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub coarse: Option<CoarseReport>,
    pub fine: Option<FineReport>,
    pub warnings: Vec<String>,
    /// Provenance: model spec, seed, preprocessing, config hash.
    pub metadata: serde_json::Value,
}

impl EvaluationReport {
    pub fn new(coarse: Option<CoarseReport>, fine: Option<FineReport>) -> EvaluationReport {
        let mut warnings = Vec::new();
        if let Some(c) = &coarse {
            for l in &c.breakdown.zero_division {
                warnings.push(format!("coarse: zero denominator for {l}, scored 0"));
            }
        }
        if let Some(f) = &fine {
            for c in &f.per_class {
                for l in &c.breakdown.zero_division {
                    warnings.push(format!("{}: zero denominator for {l}, scored 0", c.label));
                }
            }
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        EvaluationReport {
            schema_version: REPORT_SCHEMA_VERSION,
            coarse,
            fine,
            warnings,
            metadata: serde_json::Value::Null,
        }
    }

    /// Headline scores keyed by metric name: `coarse` (accuracy) and one
    /// weighted F1 per fine class.
    pub fn summary(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        if let Some(c) = &self.coarse {
            out.insert("coarse".to_string(), c.accuracy);
        }
        if let Some(f) = &self.fine {
            for c in &f.per_class {
                out.insert(c.label.as_str().to_string(), c.weighted_f1);
            }
        }
        out
    }

    /// `(file stem, csv)` for every confusion matrix in the report.
    pub fn confusion_csvs(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if let Some(c) = &self.coarse {
            out.push(("confusion_coarse".to_string(), c.confusion.to_csv()));
        }
        if let Some(f) = &self.fine {
            for c in &f.per_class {
                out.push((format!("confusion_{}", c.label), c.confusion.to_csv()));
            }
        }
        out
    }
}

fn align<'a>(
    predictions: &'a [PredictionRecord],
    posts: impl Iterator<Item = &'a Post>,
) -> Result<Vec<(&'a Post, &'a PredictionRecord)>, EvalError> {
    let by_id: HashMap<&str, &PredictionRecord> =
        predictions.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut pairs = Vec::new();
    let mut missing = Vec::new();
    for post in posts {
        match by_id.get(post.id.as_str()) {
            Some(p) => pairs.push((post, *p)),
            None => missing.push(post.id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(EvalError::MissingPredictions(missing));
    }
    if pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(pairs)
}

/// Hostile / non-hostile accuracy, weighted F1 and confusion over every post.
pub fn coarse_report(
    predictions: &[PredictionRecord],
    corpus: &Corpus,
) -> Result<CoarseReport, EvalError> {
    let pairs = align(predictions, corpus.posts().iter())?;
    let gold: Vec<Coarse> = pairs.iter().map(|(p, _)| p.labels.coarse()).collect();
    let pred: Vec<Coarse> = pairs.iter().map(|(_, r)| r.coarse).collect();
    let confusion = confusion_matrix(&pred, &gold, &[Coarse::Hostile, Coarse::NonHostile])?;
    let breakdown = f1_breakdown(&confusion);
    Ok(CoarseReport {
        population: gold.len(),
        accuracy: accuracy(&pred, &gold)?,
        weighted_f1: breakdown.weighted_f1,
        breakdown,
        confusion,
    })
}

/// Per-class binary (yes/no) weighted F1 for each fine class.
pub fn fine_grained_report(
    predictions: &[PredictionRecord],
    corpus: &Corpus,
    mode: EvalMode,
) -> Result<FineReport, EvalError> {
    let population = corpus
        .posts()
        .iter()
        .filter(|p| mode == EvalMode::Pipeline || p.labels.is_hostile());
    let pairs = align(predictions, population)?;
    let mut per_class = Vec::with_capacity(4);
    for label in FineLabel::ALL {
        let yn = |b: bool| if b { "yes" } else { "no" };
        let gold: Vec<&str> = pairs
            .iter()
            .map(|(p, _)| yn(p.labels.fine().contains(label)))
            .collect();
        let pred: Vec<&str> = pairs
            .iter()
            .map(|(_, r)| yn(r.fine.contains(label)))
            .collect();
        let confusion = confusion_matrix(&pred, &gold, &["yes", "no"])?;
        let breakdown = f1_breakdown(&confusion);
        per_class.push(FineClassReport {
            label,
            weighted_f1: breakdown.weighted_f1,
            breakdown,
            confusion,
        });
    }
    let average = per_class.iter().map(|c| c.weighted_f1).sum::<f64>() / 4.0;
    Ok(FineReport {
        mode,
        population: pairs.len(),
        per_class,
        average,
    })
}
