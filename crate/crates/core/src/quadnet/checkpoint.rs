//! JSON checkpoints. Tensors are stored as base64 of little-endian f64.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadnet::layers::Activation;
use crate::quadnet::model::{InputScaling, QuadNet};
use crate::quadnet::network::{ArchSpec, Network};
use crate::quadnet::tensor::Tensor;
use crate::quadnet::train::TrainConfig;
use crate::window::Target;

pub const CHECKPOINT_FORMAT: &str = "mimu-dr-quadnet";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub arch: ArchSpec,
    pub activation: Activation,
    pub target: Target,
    pub seed: u64,
    pub config: TrainConfig,
    /// Data split the model was trained on, e.g. "D3".
    pub split: Option<String>,
    pub scaling: InputScaling,
    pub label_scale: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StoredTensor {
    name: String,
    shape: Vec<usize>,
    data: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Document {
    format: String,
    version: u32,
    metadata: CheckpointMeta,
    tensors: Vec<StoredTensor>,
}

fn encode(t: &Tensor) -> String {
    let bytes: Vec<u8> = t.data().iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn decode(s: &str, name: &str) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(s)
        .map_err(|e| Error::Checkpoint(format!("tensor {name}: bad base64: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Checkpoint(format!(
            "tensor {name}: {} bytes is not a whole number of f64",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn to_json(model: &QuadNet, config: &TrainConfig, split: Option<&str>) -> Result<String> {
    let metadata = CheckpointMeta {
        arch: model.net.arch().clone(),
        activation: model.net.activation,
        target: model.target,
        seed: config.seed,
        config: config.clone(),
        split: split.map(str::to_owned),
        scaling: model.scaling,
        label_scale: model.label_scale,
    };
    let tensors = model
        .net
        .param_names()
        .into_iter()
        .zip(model.net.params())
        .map(|(name, t)| StoredTensor {
            name,
            shape: t.shape().to_vec(),
            data: encode(t),
        })
        .collect();
    let doc = Document {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        metadata,
        tensors,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn from_json(text: &str) -> Result<(QuadNet, CheckpointMeta)> {
    let doc: Document = serde_json::from_str(text)?;
    if doc.format != CHECKPOINT_FORMAT || doc.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint {} v{}",
            doc.format, doc.version
        )));
    }
    let meta = doc.metadata;
    meta.scaling.validate()?;
    if !(meta.label_scale.is_finite() && meta.label_scale > 0.0) {
        return Err(Error::Checkpoint(format!("bad label scale {}", meta.label_scale)));
    }
    let mut net = Network::zeros(&meta.arch)?.with_activation(meta.activation);
    let names = net.param_names();
    if names.len() != doc.tensors.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors, found {}",
            names.len(),
            doc.tensors.len()
        )));
    }
    for ((name, slot), stored) in names.iter().zip(net.params_mut()).zip(&doc.tensors) {
        if &stored.name != name {
            return Err(Error::Checkpoint(format!("expected tensor {name}, found {}", stored.name)));
        }
        if stored.shape != slot.shape() {
            return Err(Error::Checkpoint(format!(
                "tensor {name} has shape {:?}, architecture needs {:?}",
                stored.shape,
                slot.shape()
            )));
        }
        let data = decode(&stored.data, name)?;
        *slot = Tensor::new(stored.shape.clone(), data)
            .map_err(|e| Error::Checkpoint(format!("tensor {name}: {e}")))?;
    }
    net.validate()?;
    let model = QuadNet {
        net,
        target: meta.target,
        scaling: meta.scaling,
        label_scale: meta.label_scale,
    };
    Ok((model, meta))
}

pub fn save(path: &Path, model: &QuadNet, config: &TrainConfig, split: Option<&str>) -> Result<()> {
    let text = to_json(model, config, split)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<(QuadNet, CheckpointMeta)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}
