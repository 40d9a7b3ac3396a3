use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{MetricId, TrainConfig, TrainError};

pub const LEADERBOARD_SCHEMA_VERSION: u32 = 1;

/// Candidate values per [`TrainConfig`] field; points are the cartesian
/// product in key order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub params: BTreeMap<String, Vec<Value>>,
    pub metric: MetricId,
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.params.is_empty() || self.params.values().any(Vec::is_empty) {
            return Err(TrainError::Config("grid has no points".into()));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<BTreeMap<String, Value>> {
        let mut points = vec![BTreeMap::new()];
        for (name, values) in &self.params {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.insert(name.clone(), v.clone());
                        q
                    })
                })
                .collect();
        }
        points
    }
}

/// Sets one field of `config` by its serialized name.
pub fn apply_param(config: &mut TrainConfig, name: &str, value: &Value) -> Result<(), TrainError> {
    let mut doc = serde_json::to_value(&*config).expect("config serializes");
    let obj = doc.as_object_mut().expect("config is an object");
    if !obj.contains_key(name) {
        return Err(TrainError::Config(format!(
            "unknown grid parameter {name:?}"
        )));
    }
    obj.insert(name.to_string(), value.clone());
    *config = serde_json::from_value(doc)
        .map_err(|e| TrainError::Config(format!("grid value for {name}: {e}")))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub point: BTreeMap<String, Value>,
    pub config: TrainConfig,
    pub metric: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub schema_version: u32,
    pub metric: MetricId,
    pub best: Option<usize>,
    pub entries: Vec<GridEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridOutcome {
    pub best_config: TrainConfig,
    pub leaderboard: Leaderboard,
}

/// Runs `run` on every grid point (same seed as `base`) and picks the highest
/// dev metric; ties keep the earlier point. Failing points are recorded and
/// skipped.
pub fn grid_search<F>(
    grid: &GridSpec,
    base: &TrainConfig,
    run: F,
) -> Result<GridOutcome, TrainError>
where
    F: Fn(&TrainConfig) -> Result<f64, String> + Sync,
{
    grid.validate()?;
    let mut prepared = Vec::new();
    for point in grid.points() {
        let mut config = base.clone();
        config.metric = grid.metric;
        for (name, value) in &point {
            apply_param(&mut config, name, value)?;
        }
        prepared.push((point, config));
    }
    let entries: Vec<GridEntry> = prepared
        .into_par_iter()
        .map(|(point, config)| {
            let result = config
                .validate()
                .map_err(|e| e.to_string())
                .and_then(|_| run(&config));
            let (metric, error) = match result {
                Ok(m) if m.is_finite() => (Some(m), None),
                Ok(m) => (None, Some(format!("non-finite metric {m}"))),
                Err(e) => {
                    log::warn!("grid point {point:?} failed: {e}");
                    (None, Some(e))
                }
            };
            GridEntry {
                point,
                config,
                metric,
                error,
            }
        })
        .collect();
    let mut best: Option<usize> = None;
    for (i, e) in entries.iter().enumerate() {
        if let Some(m) = e.metric {
            if best.is_none_or(|b| m > entries[b].metric.unwrap()) {
                best = Some(i);
            }
        }
    }
    let leaderboard = Leaderboard {
        schema_version: LEADERBOARD_SCHEMA_VERSION,
        metric: grid.metric,
        best,
        entries,
    };
    let Some(b) = best else {
        return Err(TrainError::Config("every grid point failed".into()));
    };
    Ok(GridOutcome {
        best_config: leaderboard.entries[b].config.clone(),
        leaderboard,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn grid(params: &[(&str, Vec<Value>)]) -> GridSpec {
        GridSpec {
            params: params
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
            metric: MetricId::Accuracy,
        }
    }

    #[test]
    fn cartesian_product() {
        let g = grid(&[
            ("learning_rate", vec![json!(1e-3), json!(1e-4)]),
            ("batch_size", vec![json!(8), json!(16), json!(28)]),
        ]);
        assert_eq!(g.points().len(), 6);
    }

    #[test]
    fn single_point_wins() {
        let g = grid(&[("epochs", vec![json!(3)])]);
        let out = grid_search(&g, &TrainConfig::default(), |_| Ok(0.4)).unwrap();
        assert_eq!(out.best_config.epochs, 3);
        assert_eq!(out.leaderboard.entries.len(), 1);
    }

    #[test]
    fn failures_are_recorded_and_skipped() {
        let g = grid(&[("learning_rate", vec![json!(0.0), json!(1e-3), json!(2e-3)])]);
        let out = grid_search(&g, &TrainConfig::default(), |c| {
            if c.learning_rate > 1.5e-3 {
                Err("boom".into())
            } else {
                Ok(c.learning_rate * 100.0)
            }
        })
        .unwrap();
        let e = &out.leaderboard.entries;
        assert_eq!(e.len(), 3);
        assert!(e[0].error.is_some(), "lr = 0 fails config validation");
        assert_eq!(e[2].error.as_deref(), Some("boom"));
        assert_eq!(out.best_config.learning_rate, 1e-3);
    }

    #[test]
    fn unknown_parameter_is_rejected() {
        let g = grid(&[("momentum", vec![json!(0.9)])]);
        assert!(grid_search(&g, &TrainConfig::default(), |_| Ok(1.0)).is_err());
        let empty = grid(&[]);
        assert!(grid_search(&empty, &TrainConfig::default(), |_| Ok(1.0)).is_err());
    }
}
