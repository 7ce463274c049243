#![allow(dead_code)]

pub mod gradients;
pub mod oracles;
pub mod props;

use std::path::PathBuf;

/// `data/raw/ml-100k` under the workspace root, if the files are present.
pub fn ml100k_raw() -> Option<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/raw/ml-100k");
    (dir.join("u.data").exists() && dir.join("u.user").exists()).then_some(dir)
}
