//! Model persistence: a JSON manifest (config + tensor directory) plus a
//! flat little-endian f64 blob.
//!
//! Layout: `model.json` lists each tensor's name, element count and element
//! offset into `params.bin`; the blob is the concatenation of all tensors in
//! directory order, 8 bytes per value, little-endian.

use super::net::Network;
use super::{LearnError, ModelConfig, Result, TrainedModel};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    len: usize,
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    config: ModelConfig,
    encoding: String,
    blob: String,
    tensors: Vec<TensorEntry>,
}

/// Write `model.json` + `params.bin` into `dir` (created if missing).
pub fn save_model(model: &TrainedModel, dir: &Path) -> Result<()> {
    let io_err = |e: std::io::Error| LearnError::Argument(format!("model save failed: {e}"));
    fs::create_dir_all(dir).map_err(io_err)?;

    let mut tensors = Vec::new();
    let mut blob: Vec<u8> = Vec::new();
    let mut offset = 0usize;
    model.net.for_each_tensor(&mut |name, values| {
        tensors.push(TensorEntry {
            name: name.to_string(),
            len: values.len(),
            offset,
        });
        for v in values {
            blob.extend_from_slice(&v.to_le_bytes());
        }
        offset += values.len();
    });

    let manifest = Manifest {
        config: model.config.clone(),
        encoding: "f64-le".to_string(),
        blob: "params.bin".to_string(),
        tensors,
    };
    fs::write(
        dir.join("model.json"),
        serde_json::to_string_pretty(&manifest)
            .map_err(|e| LearnError::Argument(e.to_string()))?,
    )
    .map_err(io_err)?;
    fs::write(dir.join("params.bin"), blob).map_err(io_err)?;
    Ok(())
}

/// Rebuild a model from `dir`; every tensor in the manifest must match the
/// architecture the config describes.
pub fn load_model(dir: &Path) -> Result<TrainedModel> {
    let io_err = |e: std::io::Error| LearnError::Argument(format!("model load failed: {e}"));
    let manifest: Manifest = serde_json::from_str(
        &fs::read_to_string(dir.join("model.json")).map_err(io_err)?,
    )
    .map_err(|e| LearnError::Argument(format!("bad model.json: {e}")))?;
    if manifest.encoding != "f64-le" {
        return Err(LearnError::Argument(format!(
            "unsupported parameter encoding {:?}",
            manifest.encoding
        )));
    }
    let blob = fs::read(dir.join(&manifest.blob)).map_err(io_err)?;

    let mut net = Network::build(&manifest.config)?;
    let mut missing: Vec<String> = Vec::new();
    net.for_each_tensor_mut(&mut |name, values| {
        let Some(entry) = manifest.tensors.iter().find(|t| t.name == name) else {
            missing.push(name.to_string());
            return;
        };
        if entry.len != values.len() {
            missing.push(format!(
                "{name} (expected {} values, manifest has {})",
                values.len(),
                entry.len
            ));
            return;
        }
        for (i, v) in values.iter_mut().enumerate() {
            let at = (entry.offset + i) * 8;
            let bytes: [u8; 8] = blob[at..at + 8].try_into().expect("blob bounds");
            *v = f64::from_le_bytes(bytes);
        }
    });
    if !missing.is_empty() {
        return Err(LearnError::Argument(format!(
            "model blob does not match architecture: {missing:?}"
        )));
    }
    Ok(TrainedModel {
        config: manifest.config,
        net,
    })
}
