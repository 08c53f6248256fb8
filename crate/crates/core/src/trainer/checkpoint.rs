use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::OptimizerState;
use crate::domain::{Hyperparams, LabelSpace};
use crate::error::{Error, Result};
use crate::model::{read_tensor_file, write_tensor_file, FeaturizerConfig, ModelConfig, ModelParams, Tensor};

const KIND: &str = "langsep-checkpoint";

/// Everything needed besides the tensors to resume training or run inference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub hyperparams: Hyperparams,
    pub model: ModelConfig,
    pub featurizer: FeaturizerConfig,
    pub label_space: LabelSpace,
    pub epochs_completed: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub state: OptimizerState,
    pub meta: CheckpointMeta,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaEnvelope {
    kind: String,
    step: u64,
    meta: CheckpointMeta,
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let meta = serde_json::to_value(MetaEnvelope {
        kind: KIND.into(),
        step: ckpt.state.t,
        meta: ckpt.meta.clone(),
    })?;
    let mut tensors: Vec<(String, &Tensor)> = Vec::new();
    for (name, t) in ckpt.params.named() {
        tensors.push((name.to_string(), t));
    }
    for (name, t) in ckpt.state.m.named() {
        tensors.push((format!("adam.m.{name}"), t));
    }
    for (name, t) in ckpt.state.v.named() {
        tensors.push((format!("adam.v.{name}"), t));
    }
    write_tensor_file(path, &meta, &tensors)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = read_tensor_file(path)?;
    let env: MetaEnvelope = serde_json::from_value(file.meta)
        .map_err(|e| Error::Corrupt(format!("bad checkpoint metadata: {e}")))?;
    if env.kind != KIND {
        return Err(Error::Corrupt(format!("not a checkpoint (kind {:?})", env.kind)));
    }
    let mut params = BTreeMap::new();
    let mut m = BTreeMap::new();
    let mut v = BTreeMap::new();
    for (name, t) in file.tensors {
        if let Some(rest) = name.strip_prefix("adam.m.") {
            m.insert(rest.to_string(), t);
        } else if let Some(rest) = name.strip_prefix("adam.v.") {
            v.insert(rest.to_string(), t);
        } else {
            params.insert(name, t);
        }
    }
    let params = ModelParams::from_named(params)?;
    let m = ModelParams::from_named(m)?;
    let v = ModelParams::from_named(v)?;
    for moments in [&m, &v] {
        moments.check_against(params.num_buckets(), params.num_classes(), &params.config())?;
    }
    let meta = env.meta;
    if meta.label_space.num_classes() != params.num_classes() {
        return Err(Error::Corrupt("label space size disagrees with the language head".into()));
    }
    Ok(Checkpoint {
        params,
        state: OptimizerState { m, v, t: env.step },
        meta,
    })
}

/// Loads a checkpoint and checks its tensors against the expected layout.
pub fn load_checkpoint_for(
    path: &Path,
    featurizer: &FeaturizerConfig,
    num_classes: usize,
    model: &ModelConfig,
) -> Result<Checkpoint> {
    let ckpt = load_checkpoint(path)?;
    ckpt.params.check_against(featurizer.num_buckets, num_classes, model)?;
    Ok(ckpt)
}
