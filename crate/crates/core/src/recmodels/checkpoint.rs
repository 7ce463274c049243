//! Checkpoint layout: `model.json` header plus `user_emb.f32` and
//! `item_emb.f32`, each a row-major block of little-endian `f32`.
//!
//! Tables are held as `f64` in memory, so a save/load cycle rounds every
//! entry to single precision.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{EmbeddingModel, ModelError, ModelKind, Result};
use crate::FORMAT_VERSION;

const HEADER: &str = "model.json";
const USERS: &str = "user_emb.f32";
const ITEMS: &str = "item_emb.f32";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub version: u32,
    pub kind: ModelKind,
    pub dim: usize,
    pub layers: usize,
    pub n_users: usize,
    pub n_items: usize,
    pub seed: u64,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ModelError + '_ {
    move |source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Little-endian `f32` bytes of a matrix, row-major.
pub fn encode_f32(m: &Array2<f64>) -> Vec<u8> {
    m.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect()
}

pub fn decode_f32(bytes: &[u8], rows: usize, cols: usize) -> Result<Array2<f64>> {
    if bytes.len() != rows * cols * 4 {
        return Err(ModelError::Checkpoint(format!(
            "expected {} bytes for a {rows}x{cols} table, found {}",
            rows * cols * 4,
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), values).expect("length checked"))
}

pub fn save_checkpoint(model: &EmbeddingModel, seed: u64, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let header = CheckpointHeader {
        version: FORMAT_VERSION,
        kind: model.kind,
        dim: model.dim(),
        layers: model.layers,
        n_users: model.n_users(),
        n_items: model.n_items(),
        seed,
    };
    let mut json = serde_json::to_string_pretty(&header).expect("header serializes");
    json.push('\n');
    for (name, bytes) in [
        (HEADER, json.into_bytes()),
        (USERS, encode_f32(&model.user_emb)),
        (ITEMS, encode_f32(&model.item_emb)),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(io(&path))?;
    }
    Ok(())
}

pub fn read_checkpoint_header(dir: &Path) -> Result<CheckpointHeader> {
    let path = dir.join(HEADER);
    let text = std::fs::read_to_string(&path).map_err(io(&path))?;
    let header: CheckpointHeader =
        serde_json::from_str(&text).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    if header.version != FORMAT_VERSION {
        return Err(ModelError::Checkpoint(format!(
            "version {} (expected {FORMAT_VERSION})",
            header.version
        )));
    }
    Ok(header)
}

pub fn load_checkpoint(dir: &Path) -> Result<(EmbeddingModel, CheckpointHeader)> {
    let header = read_checkpoint_header(dir)?;
    let read = |name: &str| {
        let path = dir.join(name);
        std::fs::read(&path).map_err(io(&path))
    };
    let user_emb = decode_f32(&read(USERS)?, header.n_users, header.dim)?;
    let item_emb = decode_f32(&read(ITEMS)?, header.n_items, header.dim)?;
    let model = EmbeddingModel {
        kind: header.kind,
        user_emb,
        item_emb,
        layers: header.layers,
    };
    Ok((model, header))
}
