use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ModelError, ModelKind, ModelSpec, TrainedHead, TrainedModel};
use crate::corpus::FineLabel;
use crate::encoder::PcaReducer;
use crate::heads::classical::ClassicalModel;
use crate::heads::{Head, MlpConfig, MlpHead, OvrEnsemble, RecurrentConfig, RecurrentHead};
use crate::textprep::PrepConfig;
use crate::training::TrainConfig;

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

const MANIFEST: &str = "manifest.json";
const PARAMS: &str = "params.bin";
const CLASSICAL: &str = "model.json";

/// Location of one named tensor in `params.bin` (little-endian f64).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HeadManifest {
    Mlp {
        config: MlpConfig,
        params: Vec<ParamEntry>,
    },
    Recurrent {
        config: RecurrentConfig,
        params: Vec<ParamEntry>,
    },
    Classical {
        file: String,
    },
    /// Member subdirectory per fine class.
    Ovr {
        threshold: f64,
        members: BTreeMap<String, String>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub schema_version: u32,
    pub model: ModelKind,
    pub spec: ModelSpec,
    pub prep: PrepConfig,
    pub train: TrainConfig,
    pub seed: u64,
    /// Hash of the run configuration that produced the checkpoint.
    pub config_hash: Option<String>,
    pub head: HeadManifest,
}

#[derive(Serialize, Deserialize)]
struct ClassicalFile {
    model: ClassicalModel,
    pca: Option<PcaReducer>,
}

fn write_params<H: Head + Clone>(head: &H, dir: &Path) -> Result<Vec<ParamEntry>, ModelError> {
    let mut head = head.clone();
    let mut entries = Vec::new();
    let mut bytes = Vec::new();
    let mut offset = 0;
    head.visit_params(&mut |name, values, _, _| {
        entries.push(ParamEntry {
            name: name.to_string(),
            offset,
            len: values.len(),
        });
        offset += values.len();
        for v in values.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    });
    fs::write(dir.join(PARAMS), bytes)?;
    Ok(entries)
}

fn read_params<H: Head>(
    head: &mut H,
    entries: &[ParamEntry],
    dir: &Path,
) -> Result<(), ModelError> {
    let bytes = fs::read(dir.join(PARAMS))?;
    if bytes.len() % 8 != 0 {
        return Err(ModelError::Checkpoint(
            "params.bin is not a whole number of f64".into(),
        ));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let mut expected = Vec::new();
    head.visit_params(&mut |name, v, _, _| expected.push((name.to_string(), v.len())));
    let got: Vec<(String, usize)> = entries.iter().map(|e| (e.name.clone(), e.len)).collect();
    if expected != got {
        return Err(ModelError::Checkpoint(
            "parameter index does not match the head architecture".into(),
        ));
    }
    let total: usize = entries.iter().map(|e| e.len).sum();
    if total != values.len() || entries.iter().any(|e| e.offset + e.len > values.len()) {
        return Err(ModelError::Checkpoint(format!(
            "params.bin holds {} values, index expects {total}",
            values.len()
        )));
    }
    let mut k = 0;
    head.visit_params(&mut |_, v, _, _| {
        let e = &entries[k];
        v.copy_from_slice(&values[e.offset..e.offset + e.len]);
        k += 1;
    });
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ModelError> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ModelError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn save_mlp(head: &MlpHead, dir: &Path) -> Result<HeadManifest, ModelError> {
    Ok(HeadManifest::Mlp {
        config: *head.config(),
        params: write_params(head, dir)?,
    })
}

fn load_mlp(manifest: &HeadManifest, dir: &Path) -> Result<MlpHead, ModelError> {
    let HeadManifest::Mlp { config, params } = manifest else {
        return Err(ModelError::Checkpoint("expected an MLP head".into()));
    };
    let mut head = MlpHead::new(*config, &mut ChaCha8Rng::seed_from_u64(0));
    read_params(&mut head, params, dir)?;
    Ok(head)
}

fn member_dir(label: FineLabel) -> String {
    format!("member_{}", label.as_str())
}

/// Writes `model` under `dir`: `manifest.json` plus `params.bin` for neural
/// heads, `model.json` for classical ones, and one subdirectory per member
/// for OvR.
pub fn save_checkpoint(
    model: &TrainedModel,
    dir: &Path,
    config_hash: Option<&str>,
) -> Result<CheckpointManifest, ModelError> {
    fs::create_dir_all(dir)?;
    let head = match &model.head {
        TrainedHead::Mlp(h) => save_mlp(h, dir)?,
        TrainedHead::Recurrent(h) => HeadManifest::Recurrent {
            config: *h.config(),
            params: write_params(h, dir)?,
        },
        TrainedHead::Classical { model, pca } => {
            write_json(
                &dir.join(CLASSICAL),
                &ClassicalFile {
                    model: model.clone(),
                    pca: pca.clone(),
                },
            )?;
            HeadManifest::Classical {
                file: CLASSICAL.to_string(),
            }
        }
        TrainedHead::Ovr(e) => {
            let mut members = BTreeMap::new();
            for label in FineLabel::ALL {
                let member = e
                    .member(label)
                    .ok_or(crate::heads::HeadError::UntrainedMember(label))?;
                let sub = member_dir(label);
                let path = dir.join(&sub);
                fs::create_dir_all(&path)?;
                write_json(&path.join(MANIFEST), &save_mlp(member, &path)?)?;
                members.insert(label.as_str().to_string(), sub);
            }
            HeadManifest::Ovr {
                threshold: e.threshold(),
                members,
            }
        }
    };
    let manifest = CheckpointManifest {
        schema_version: CHECKPOINT_SCHEMA_VERSION,
        model: model.spec.kind,
        spec: model.spec.clone(),
        prep: model.prep,
        train: model.config.clone(),
        seed: model.config.seed,
        config_hash: config_hash.map(str::to_string),
        head,
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn load_checkpoint(dir: &Path) -> Result<(TrainedModel, CheckpointManifest), ModelError> {
    let manifest: CheckpointManifest = read_json(&dir.join(MANIFEST))?;
    if manifest.schema_version != CHECKPOINT_SCHEMA_VERSION {
        return Err(ModelError::Checkpoint(format!(
            "unsupported schema version {}",
            manifest.schema_version
        )));
    }
    if manifest.model != manifest.spec.kind {
        return Err(ModelError::Checkpoint(
            "model kind and spec disagree".into(),
        ));
    }
    manifest.spec.validate()?;
    let kind = manifest.spec.kind;
    let head = match (&manifest.head, kind) {
        (
            HeadManifest::Mlp { .. },
            ModelKind::Fmbert | ModelKind::Fxlmr | ModelKind::Coghm | ModelKind::Dmlmc,
        ) => TrainedHead::Mlp(load_mlp(&manifest.head, dir)?),
        (HeadManifest::Recurrent { config, params }, ModelKind::Bilstm | ModelKind::Bigru) => {
            let mut head = RecurrentHead::new(*config, &mut ChaCha8Rng::seed_from_u64(0));
            read_params(&mut head, params, dir)?;
            TrainedHead::Recurrent(head)
        }
        (HeadManifest::Classical { file }, ModelKind::Classical { algorithm, .. }) => {
            let f: ClassicalFile = read_json(&dir.join(file))?;
            if f.model.algorithm != algorithm {
                return Err(ModelError::Checkpoint(
                    "classical algorithm mismatch".into(),
                ));
            }
            TrainedHead::Classical {
                model: f.model,
                pca: f.pca,
            }
        }
        (HeadManifest::Ovr { threshold, members }, ModelKind::Ovr) => {
            let mut e = OvrEnsemble::new(*threshold);
            for label in FineLabel::ALL {
                let sub = members
                    .get(label.as_str())
                    .ok_or_else(|| ModelError::Checkpoint(format!("missing OvR member {label}")))?;
                let path = dir.join(sub);
                let m: HeadManifest = read_json(&path.join(MANIFEST))?;
                e.set_member(label, load_mlp(&m, &path)?);
            }
            TrainedHead::Ovr(e)
        }
        _ => {
            return Err(ModelError::Checkpoint(format!(
                "head type does not match model kind {kind}"
            )))
        }
    };
    let model = TrainedModel {
        spec: manifest.spec.clone(),
        prep: manifest.prep,
        config: manifest.train.clone(),
        head,
    };
    Ok((model, manifest))
}
