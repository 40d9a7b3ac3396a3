use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::EvalError;

const SHIPPED: &str = include_str!("../../resources/baseline_scores.csv");

/// Rows of published scores in percent, keyed by model then metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineTable {
    pub metrics: Vec<String>,
    pub rows: BTreeMap<String, BTreeMap<String, f64>>,
}

/// Name of the row holding the reference system's own scores; it is never
/// used as a baseline.
pub const REFERENCE_ROW: &str = "ours";

impl BaselineTable {
    pub fn shipped() -> BaselineTable {
        BaselineTable::parse(SHIPPED.as_bytes()).expect("shipped baseline table is valid")
    }

    /// CSV with a `model` column followed by metric columns; `#` lines are
    /// comments.
    pub fn parse<R: Read>(reader: R) -> Result<BaselineTable, EvalError> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| EvalError::Baseline(e.to_string()))?
            .clone();
        if headers.get(0) != Some("model") || headers.len() < 2 {
            return Err(EvalError::Baseline(
                "first column must be `model` followed by metrics".into(),
            ));
        }
        let metrics: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut rows = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| EvalError::Baseline(e.to_string()))?;
            let mut scores = BTreeMap::new();
            for (m, v) in metrics.iter().zip(rec.iter().skip(1)) {
                let v: f64 = v
                    .parse()
                    .map_err(|_| EvalError::Baseline(format!("bad score {v:?} for {m}")))?;
                scores.insert(m.clone(), v);
            }
            rows.insert(rec[0].to_string(), scores);
        }
        Ok(BaselineTable { metrics, rows })
    }

    /// Highest baseline score per metric and the model that achieved it.
    pub fn best(&self, metric: &str) -> Option<(&str, f64)> {
        self.rows
            .iter()
            .filter(|(m, _)| m.as_str() != REFERENCE_ROW)
            .filter_map(|(m, s)| s.get(metric).map(|&v| (m.as_str(), v)))
            .fold(None, |acc: Option<(&str, f64)>, (m, v)| match acc {
                Some((_, b)) if b >= v => acc,
                _ => Some((m, v)),
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub metric: String,
    /// Our score in percent.
    pub ours: f64,
    pub baseline_model: String,
    pub baseline: f64,
    /// `ours - baseline` in percentage points.
    pub delta: f64,
    pub below_baseline: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineChoice<'a> {
    /// Strongest baseline per metric.
    Best,
    Model(&'a str),
}

/// Signed deltas of `scores` (fractions in `[0, 1]`) against the baseline in
/// percentage points.
pub fn compare_to_baseline(
    scores: &BTreeMap<String, f64>,
    table: &BaselineTable,
    choice: BaselineChoice<'_>,
) -> Result<Vec<DeltaRow>, EvalError> {
    let mut out = Vec::new();
    for (metric, &ours) in scores {
        if !table.metrics.contains(metric) {
            return Err(EvalError::MetricMismatch(metric.clone()));
        }
        let (model, base) = match choice {
            BaselineChoice::Best => table
                .best(metric)
                .ok_or_else(|| EvalError::Baseline(format!("no baseline rows for {metric}")))?,
            BaselineChoice::Model(name) => {
                let row = table
                    .rows
                    .get(name)
                    .ok_or_else(|| EvalError::Baseline(format!("no baseline row {name:?}")))?;
                (name, row[metric])
            }
        };
        let ours_pct = ours * 100.0;
        let delta = ours_pct - base;
        out.push(DeltaRow {
            metric: metric.clone(),
            ours: ours_pct,
            baseline_model: model.to_string(),
            baseline: base,
            delta,
            below_baseline: delta < 0.0,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_scores(table: &BaselineTable) -> BTreeMap<String, f64> {
        table.rows[REFERENCE_ROW]
            .iter()
            .map(|(k, v)| (k.clone(), v / 100.0))
            .collect()
    }

    #[test]
    fn shipped_table_parses() {
        let t = BaselineTable::shipped();
        assert_eq!(
            t.metrics,
            ["coarse", "fake", "hate", "offensive", "defamation"]
        );
        assert_eq!(t.rows.len(), 5);
        assert_eq!(t.best("coarse"), Some(("svm", 84.11)));
    }

    #[test]
    fn reference_margins() {
        let t = BaselineTable::shipped();
        let rows = compare_to_baseline(&reference_scores(&t), &t, BaselineChoice::Best).unwrap();
        let get = |m: &str| rows.iter().find(|r| r.metric == m).unwrap();
        assert!((get("coarse").delta - 8.49).abs() < 1e-9);
        assert!((get("fake").delta - 33.65).abs() < 1e-9);
        assert!((get("hate").delta - 1.44).abs() < 1e-9);
        assert_eq!(get("hate").baseline_model, "lr");
        assert!(rows.iter().all(|r| !r.below_baseline));
    }

    #[test]
    fn self_comparison_is_zero() {
        let t = BaselineTable::shipped();
        let svm: BTreeMap<String, f64> = t.rows["svm"]
            .iter()
            .map(|(k, v)| (k.clone(), v / 100.0))
            .collect();
        for r in compare_to_baseline(&svm, &t, BaselineChoice::Model("svm")).unwrap() {
            assert!(r.delta.abs() < 1e-9);
        }
    }

    #[test]
    fn unknown_metric_is_an_error() {
        let t = BaselineTable::shipped();
        let scores = BTreeMap::from([("macro".to_string(), 0.5)]);
        assert!(matches!(
            compare_to_baseline(&scores, &t, BaselineChoice::Best),
            Err(EvalError::MetricMismatch(_))
        ));
    }
}
