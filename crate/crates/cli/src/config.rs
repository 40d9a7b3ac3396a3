//! Run configuration: a TOML file with nested sections, overridden by flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hostility_core::corpus::Split;
use hostility_core::encoder::Backend;
use hostility_core::evaluation::EvalMode;
use hostility_core::model::{ModelKind, ModelSpec};
use hostility_core::textprep::PrepConfig;
use hostility_core::training::{apply_param, GridSpec, MetricId, TrainConfig};

pub const DEFAULT_HASH_DIM: usize = 64;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusPaths {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
}

impl CorpusPaths {
    pub fn get(&self, split: Split) -> Option<&PathBuf> {
        match split {
            Split::Train => self.train.as_ref(),
            Split::Dev => self.dev.as_ref(),
            Split::Test => self.test.as_ref(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: String,
    /// Backend override for kinds whose backend is not fixed, or `hash-test`.
    pub encoder: Option<Backend>,
    pub hash_dim: usize,
    pub hash_seed: u64,
    pub mlp_hidden: Option<[usize; 3]>,
    pub rnn_hidden: Option<usize>,
    pub threshold: Option<f64>,
    pub pca_k: Option<usize>,
    pub flatten_len: Option<usize>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kind: "fmbert".into(),
            encoder: None,
            hash_dim: DEFAULT_HASH_DIM,
            hash_seed: 0,
            mlp_hidden: None,
            rnn_hidden: None,
            threshold: None,
            pca_k: None,
            flatten_len: None,
        }
    }
}

fn default_prep() -> PrepConfig {
    PrepConfig::standard()
}

fn default_output() -> PathBuf {
    PathBuf::from("runs")
}

/// The file as written by the user; `train` keys override the backend's
/// defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub mode: EvalMode,
    #[serde(default)]
    pub corpus: CorpusPaths,
    #[serde(default = "default_prep")]
    pub prep: PrepConfig,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: toml::Table,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            name: None,
            output_dir: default_output(),
            mode: EvalMode::default(),
            corpus: CorpusPaths::default(),
            prep: default_prep(),
            model: ModelSection::default(),
            train: toml::Table::new(),
        }
    }
}

/// Command-line values that win over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub model: Option<String>,
    pub encoder: Option<Backend>,
    pub seed: Option<u64>,
    pub mode: Option<EvalMode>,
    pub name: Option<String>,
    pub output_dir: Option<PathBuf>,
}

/// Everything a run needs, after defaults and overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedRun {
    pub name: String,
    pub output_dir: PathBuf,
    pub mode: EvalMode,
    pub corpus: CorpusPaths,
    pub prep: PrepConfig,
    pub spec: ModelSpec,
    pub train: TrainConfig,
}

impl ResolvedRun {
    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hash_json(&serde_json::to_value(self).expect("run serializes"))
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(&self.name)
    }
}

pub fn hash_json(value: &serde_json::Value) -> String {
    format!("{:x}", Sha256::digest(value.to_string().as_bytes()))
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let mut config: RunConfig =
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
    // corpus paths are relative to the config file
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [
        &mut config.corpus.train,
        &mut config.corpus.dev,
        &mut config.corpus.test,
    ]
    .into_iter()
    .flatten()
    {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(config)
}

fn build_spec(section: &ModelSection, encoder: Option<Backend>) -> Result<ModelSpec> {
    let kind: ModelKind = section.kind.parse()?;
    let mut spec = match encoder {
        Some(Backend::HashTest) => ModelSpec::hash_test(kind, section.hash_dim, section.hash_seed),
        Some(b) => {
            let fixed = kind.default_backends();
            let pinned = matches!(
                kind,
                ModelKind::Fmbert | ModelKind::Fxlmr | ModelKind::Coghm
            );
            if pinned && fixed != [b] {
                bail!("model {kind} uses {fixed:?}; --encoder {b} does not apply");
            }
            let mut spec = ModelSpec::new(kind);
            if !pinned {
                spec.encoders = vec![match b {
                    Backend::Xlmr => hostility_core::encoder::EncoderSpec::xlmr(),
                    _ => hostility_core::encoder::EncoderSpec::mbert(),
                }];
            }
            spec
        }
        None => ModelSpec::new(kind),
    };
    if let Some(h) = section.mlp_hidden {
        spec.mlp_hidden = h;
    }
    if let Some(h) = section.rnn_hidden {
        spec.rnn_hidden = h;
    }
    if let Some(t) = section.threshold {
        spec.threshold = t;
    }
    if let Some(k) = section.pca_k {
        spec.pca_k = k;
    }
    if let Some(l) = section.flatten_len {
        spec.flatten_len = l;
    }
    spec.validate()?;
    Ok(spec)
}

fn build_train(table: &toml::Table, spec: &ModelSpec, seed: Option<u64>) -> Result<TrainConfig> {
    let mut config = TrainConfig::for_backend(spec.encoders[0].backend);
    config.metric = spec.kind.default_metric();
    for (key, value) in table {
        let json = serde_json::to_value(value)?;
        apply_param(&mut config, key, &json)?;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    config.validate()?;
    Ok(config)
}

/// Applies overrides and validates every section; no file other than the
/// corpora is touched.
pub fn resolve(mut config: RunConfig, o: &Overrides) -> Result<ResolvedRun> {
    if let Some(m) = &o.model {
        config.model.kind = m.clone();
    }
    if let Some(mode) = o.mode {
        config.mode = mode;
    }
    if let Some(dir) = &o.output_dir {
        config.output_dir = dir.clone();
    }
    let encoder = o.encoder.or(config.model.encoder);
    let spec = build_spec(&config.model, encoder)?;
    let train = build_train(&config.train, &spec, o.seed)?;
    for split in Split::ALL {
        if let Some(p) = config.corpus.get(split) {
            if !p.exists() {
                bail!("{split} corpus {} does not exist", p.display());
            }
        }
    }
    let name = o
        .name
        .clone()
        .or(config.name)
        .unwrap_or_else(|| format!("{}-seed{}", spec.kind, train.seed))
        .replace([':', '/', '\\'], "-");
    Ok(ResolvedRun {
        name,
        output_dir: config.output_dir,
        mode: config.mode,
        corpus: config.corpus,
        prep: config.prep,
        spec,
        train,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    metric: Option<MetricId>,
    params: std::collections::BTreeMap<String, Vec<serde_json::Value>>,
}

/// Grid file (TOML or JSON by extension); the metric defaults to the
/// model's selection metric.
pub fn load_grid(path: &Path, default_metric: MetricId) -> Result<GridSpec> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read grid {}", path.display()))?;
    let file: GridFile = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text)?
    } else {
        toml::from_str(&text)?
    };
    let grid = GridSpec {
        params: file.params,
        metric: file.metric.unwrap_or(default_metric),
    };
    grid.validate()?;
    Ok(grid)
}
