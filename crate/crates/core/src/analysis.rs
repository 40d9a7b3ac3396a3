//! Named-entity frequencies per predicted class, exported as ranked tables.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Coarse, Corpus, FineLabel, Post};
use crate::evaluation::PredictionRecord;
use crate::textprep::{NeTagger, TaggerError};

pub const ANALYSIS_SCHEMA_VERSION: u32 = 1;
pub const COMBINED_FILE: &str = "ne_frequencies.json";
pub const DEFAULT_TOP_K: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("no prediction for posts: {}", .0.join(", "))]
    MissingPredictions(Vec<String>),
    #[error("predictions for posts not in the corpus: {}", .0.join(", "))]
    UnknownPosts(Vec<String>),
    #[error("duplicate prediction for post {0}")]
    DuplicatePrediction(String),
    #[error("nothing to export")]
    EmptyTables,
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error(transparent)]
    Tagger(#[from] TaggerError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Counting unit for entity frequencies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    /// Every mention counts.
    #[default]
    Occurrences,
    /// A post counts once per entity.
    Documents,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityCount {
    pub entity: String,
    pub count: u64,
}

/// Ranked entities of the posts predicted as one class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeFrequencyTable {
    pub class: String,
    /// Posts predicted as this class.
    pub posts: usize,
    pub entries: Vec<EntityCount>,
}

impl NeFrequencyTable {
    pub fn to_csv(&self) -> Result<String, AnalysisError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["rank", "entity", "count"])?;
        for (i, e) in self.entries.iter().enumerate() {
            w.write_record([(i + 1).to_string(), e.entity.clone(), e.count.to_string()])?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv of strings is utf-8"))
    }

    /// Parses a table written by [`NeFrequencyTable::to_csv`]; the post count
    /// is not part of the CSV and comes back as 0.
    pub fn from_csv(class: &str, text: &str) -> Result<NeFrequencyTable, AnalysisError> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let bad = |message: String| AnalysisError::Format {
            path: class.to_string(),
            message,
        };
        if r.headers()?.iter().collect::<Vec<_>>() != ["rank", "entity", "count"] {
            return Err(bad("expected header rank,entity,count".into()));
        }
        let mut entries = Vec::new();
        for (i, row) in r.records().enumerate() {
            let row = row?;
            let rank: usize = row[0]
                .parse()
                .map_err(|_| bad(format!("bad rank {:?}", &row[0])))?;
            if rank != i + 1 {
                return Err(bad(format!("rank {rank} out of order")));
            }
            let count = row[2]
                .parse()
                .map_err(|_| bad(format!("bad count {:?}", &row[2])))?;
            entries.push(EntityCount {
                entity: row[1].to_string(),
                count,
            });
        }
        Ok(NeFrequencyTable {
            class: class.to_string(),
            posts: 0,
            entries,
        })
    }
}

/// Class names analyzed: the four fine classes, then the two coarse ones.
pub fn analysis_classes() -> Vec<String> {
    FineLabel::ALL
        .iter()
        .map(|l| l.as_str().to_string())
        .chain([Coarse::Hostile, Coarse::NonHostile].map(|c| c.as_str().to_string()))
        .collect()
}

fn predicted_classes(r: &PredictionRecord) -> Vec<String> {
    r.fine
        .iter()
        .map(|l| l.as_str().to_string())
        .chain(std::iter::once(r.coarse.as_str().to_string()))
        .collect()
}

/// Pairs each corpus post with its prediction; every post needs exactly one
/// and no prediction may name an unknown post.
fn align<'a>(
    corpus: &'a Corpus,
    predictions: &'a [PredictionRecord],
) -> Result<Vec<(&'a Post, &'a PredictionRecord)>, AnalysisError> {
    let mut by_id: HashMap<&str, &PredictionRecord> = HashMap::new();
    for r in predictions {
        if by_id.insert(r.id.as_str(), r).is_some() {
            return Err(AnalysisError::DuplicatePrediction(r.id.clone()));
        }
    }
    let unknown: Vec<String> = predictions
        .iter()
        .filter(|r| corpus.get(&r.id).is_none())
        .map(|r| r.id.clone())
        .collect();
    if !unknown.is_empty() {
        return Err(AnalysisError::UnknownPosts(unknown));
    }
    let missing: Vec<String> = corpus
        .posts()
        .iter()
        .filter(|p| !by_id.contains_key(p.id.as_str()))
        .map(|p| p.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(AnalysisError::MissingPredictions(missing));
    }
    Ok(corpus
        .posts()
        .iter()
        .map(|p| (p, by_id[p.id.as_str()]))
        .collect())
}

/// Entity counts over the posts predicted as each class. A multi-label post
/// adds to every predicted fine class and to its coarse class. Entities are
/// keyed by [`crate::textprep::EntitySpan::key`]; ranking is by count, then
/// entity.
pub fn ne_frequency_by_class(
    corpus: &Corpus,
    predictions: &[PredictionRecord],
    tagger: &dyn NeTagger,
    top_k: usize,
    mode: CountMode,
) -> Result<BTreeMap<String, NeFrequencyTable>, AnalysisError> {
    let pairs = align(corpus, predictions)?;
    let tagged: Vec<Vec<String>> = pairs
        .par_iter()
        .map(|(post, _)| {
            let mut keys: Vec<String> = tagger.tag(&post.text)?.iter().map(|s| s.key()).collect();
            if mode == CountMode::Documents {
                let mut seen = HashSet::new();
                keys.retain(|k| seen.insert(k.clone()));
            }
            Ok(keys)
        })
        .collect::<Result<_, TaggerError>>()?;

    let mut counts: BTreeMap<String, (usize, HashMap<String, u64>)> = analysis_classes()
        .into_iter()
        .map(|c| (c, (0, HashMap::new())))
        .collect();
    for ((_, record), keys) in pairs.iter().zip(&tagged) {
        for class in predicted_classes(record) {
            let (posts, table) = counts.get_mut(&class).expect("known class");
            *posts += 1;
            for k in keys {
                *table.entry(k.clone()).or_default() += 1;
            }
        }
    }
    Ok(counts
        .into_iter()
        .map(|(class, (posts, table))| {
            let mut entries: Vec<EntityCount> = table
                .into_iter()
                .map(|(entity, count)| EntityCount { entity, count })
                .collect();
            entries.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.entity.cmp(&b.entity)));
            entries.truncate(top_k);
            (
                class.clone(),
                NeFrequencyTable {
                    class,
                    posts,
                    entries,
                },
            )
        })
        .collect())
}

#[derive(Serialize)]
struct Combined<'a> {
    schema_version: u32,
    tables: Vec<&'a NeFrequencyTable>,
}

pub fn csv_file_name(class: &str) -> String {
    format!("ne_{class}.csv")
}

/// Writes `ne_<class>.csv` per table and the combined JSON into `dir`.
pub fn export_plot_data(
    tables: &BTreeMap<String, NeFrequencyTable>,
    dir: &Path,
) -> Result<Vec<PathBuf>, AnalysisError> {
    if tables.is_empty() {
        return Err(AnalysisError::EmptyTables);
    }
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for table in tables.values() {
        let path = dir.join(csv_file_name(&table.class));
        fs::write(&path, table.to_csv()?)?;
        written.push(path);
    }
    let combined = Combined {
        schema_version: ANALYSIS_SCHEMA_VERSION,
        tables: tables.values().collect(),
    };
    let path = dir.join(COMBINED_FILE);
    fs::write(&path, serde_json::to_string_pretty(&combined)?)?;
    written.push(path);
    Ok(written)
}

pub fn import_csv(path: &Path, class: &str) -> Result<NeFrequencyTable, AnalysisError> {
    NeFrequencyTable::from_csv(class, &fs::read_to_string(path)?)
}
