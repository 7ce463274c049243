//! Directory layout for a prepared dataset:
//!
//! ```text
//! meta.json            version, sizes, seed, per-file CRC32
//! train_ratings.tsv    user_idx  item_idx  rating  timestamp
//! test_negatives.tsv   user_idx  positive_item_idx  neg_1 .. neg_n
//! user_ids.tsv         user_idx  source id
//! item_ids.tsv         item_idx  source id
//! user_attr.tsv        user_idx  class_index         (optional)
//! attr_meta.json       version, class names, CRC32   (optional)
//! ```
//!
//! All files are UTF-8 with LF line endings and no header rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    AttributeLabels, DataError, EvalSplit, Interaction, InteractionDataset, Result, TestCase,
};
use crate::FORMAT_VERSION;

const META: &str = "meta.json";
const TRAIN: &str = "train_ratings.tsv";
const TEST: &str = "test_negatives.tsv";
const USER_IDS: &str = "user_ids.tsv";
const ITEM_IDS: &str = "item_ids.tsv";
const ATTR: &str = "user_attr.tsv";
const ATTR_META: &str = "attr_meta.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitMeta {
    pub version: u32,
    pub n_users: usize,
    pub n_items: usize,
    pub n_train: usize,
    pub n_neg: usize,
    pub seed: u64,
    pub checksums: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttrMeta {
    version: u32,
    n_users: usize,
    class_names: Vec<String>,
    checksum: String,
}

fn crc(bytes: &[u8]) -> String {
    format!("{:08x}", crc32fast::hash(bytes))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<String> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(io_err(&path))?;
    Ok(crc(text.as_bytes()))
}

fn read(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    std::fs::read_to_string(&path).map_err(io_err(&path))
}

fn read_checked(dir: &Path, name: &str, expected: Option<&String>) -> Result<String> {
    let text = read(dir, name)?;
    match expected {
        Some(sum) if *sum == crc(text.as_bytes()) => Ok(text),
        _ => Err(DataError::ChecksumMismatch { file: name.into() }),
    }
}

fn check_id(id: &str) -> Result<()> {
    if id.contains(['\t', '\n', '\r']) {
        return Err(DataError::InvalidArgument(format!(
            "identifier {id:?} contains a tab or newline"
        )));
    }
    Ok(())
}

fn corrupt(file: &str, line: usize, message: impl Into<String>) -> DataError {
    DataError::Corrupt {
        file: file.into(),
        message: format!("line {}: {}", line + 1, message.into()),
    }
}

fn field<T: std::str::FromStr>(file: &str, line: usize, s: Option<&str>) -> Result<T> {
    s.and_then(|v| v.parse().ok())
        .ok_or_else(|| corrupt(file, line, "missing or malformed field"))
}

fn ids_tsv(ids: &[String]) -> Result<String> {
    let mut out = String::new();
    for (k, id) in ids.iter().enumerate() {
        check_id(id)?;
        writeln!(out, "{k}\t{id}").unwrap();
    }
    Ok(out)
}

fn parse_ids(file: &str, text: &str, n: usize) -> Result<Vec<String>> {
    let mut ids = Vec::with_capacity(n);
    for (k, line) in text.lines().enumerate() {
        let (idx, id) = line
            .split_once('\t')
            .ok_or_else(|| corrupt(file, k, "expected index and id"))?;
        if idx.parse::<usize>().ok() != Some(k) {
            return Err(corrupt(file, k, "indices must be dense and ascending"));
        }
        ids.push(id.to_string());
    }
    if ids.len() != n {
        return Err(DataError::Corrupt {
            file: file.into(),
            message: format!("expected {n} rows, found {}", ids.len()),
        });
    }
    Ok(ids)
}

/// Writes `split` into `dir` (created if needed). Output bytes depend only on
/// the split.
pub fn save_split(split: &EvalSplit, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let train = &split.train;

    let mut train_tsv = String::with_capacity(train.interactions().len() * 24);
    for it in train.interactions() {
        writeln!(
            train_tsv,
            "{}\t{}\t{}\t{}",
            it.user, it.item, it.rating, it.timestamp
        )
        .unwrap();
    }
    let mut test_tsv = String::new();
    for (user, case) in split.test.iter().enumerate() {
        write!(test_tsv, "{user}\t{}", case.positive).unwrap();
        for n in &case.negatives {
            write!(test_tsv, "\t{n}").unwrap();
        }
        test_tsv.push('\n');
    }

    let mut checksums = BTreeMap::new();
    checksums.insert(TRAIN.to_string(), write(dir, TRAIN, &train_tsv)?);
    checksums.insert(TEST.to_string(), write(dir, TEST, &test_tsv)?);
    checksums.insert(
        USER_IDS.to_string(),
        write(dir, USER_IDS, &ids_tsv(train.user_ids())?)?,
    );
    checksums.insert(
        ITEM_IDS.to_string(),
        write(dir, ITEM_IDS, &ids_tsv(train.item_ids())?)?,
    );
    let meta = SplitMeta {
        version: FORMAT_VERSION,
        n_users: train.n_users(),
        n_items: train.n_items(),
        n_train: train.interactions().len(),
        n_neg: split.n_neg,
        seed: split.seed,
        checksums,
    };
    let mut json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    json.push('\n');
    write(dir, META, &json)?;
    Ok(())
}

pub fn read_split_meta(dir: &Path) -> Result<SplitMeta> {
    let meta: SplitMeta =
        serde_json::from_str(&read(dir, META)?).map_err(|e| DataError::Corrupt {
            file: META.into(),
            message: e.to_string(),
        })?;
    if meta.version != FORMAT_VERSION {
        return Err(DataError::VersionMismatch {
            found: meta.version,
            expected: FORMAT_VERSION,
        });
    }
    Ok(meta)
}

/// Reads a split written by [`save_split`], verifying version and checksums.
pub fn load_split(dir: &Path) -> Result<EvalSplit> {
    let meta = read_split_meta(dir)?;
    let user_ids = parse_ids(
        USER_IDS,
        &read_checked(dir, USER_IDS, meta.checksums.get(USER_IDS))?,
        meta.n_users,
    )?;
    let item_ids = parse_ids(
        ITEM_IDS,
        &read_checked(dir, ITEM_IDS, meta.checksums.get(ITEM_IDS))?,
        meta.n_items,
    )?;

    let train_text = read_checked(dir, TRAIN, meta.checksums.get(TRAIN))?;
    let mut rows = Vec::with_capacity(meta.n_train);
    for (k, line) in train_text.lines().enumerate() {
        let mut f = line.split('\t');
        let it = Interaction {
            user: field(TRAIN, k, f.next())?,
            item: field(TRAIN, k, f.next())?,
            rating: field(TRAIN, k, f.next())?,
            timestamp: field(TRAIN, k, f.next())?,
        };
        if f.next().is_some() {
            return Err(corrupt(TRAIN, k, "too many fields"));
        }
        rows.push(it);
    }
    if rows.len() != meta.n_train {
        return Err(DataError::Corrupt {
            file: TRAIN.into(),
            message: format!("expected {} rows, found {}", meta.n_train, rows.len()),
        });
    }
    let train = InteractionDataset::new(user_ids, item_ids, rows)?;

    let test_text = read_checked(dir, TEST, meta.checksums.get(TEST))?;
    let mut test = Vec::with_capacity(meta.n_users);
    for (k, line) in test_text.lines().enumerate() {
        let values = line
            .split('\t')
            .map(|v| v.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| corrupt(TEST, k, e.to_string()))?;
        if values.len() != meta.n_neg + 2 || values[0] != k {
            return Err(corrupt(TEST, k, "unexpected row shape"));
        }
        if values[1..].iter().any(|&i| i >= meta.n_items) {
            return Err(corrupt(TEST, k, "item index out of range"));
        }
        test.push(TestCase {
            positive: values[1],
            negatives: values[2..].to_vec(),
        });
    }
    if test.len() != meta.n_users {
        return Err(DataError::Corrupt {
            file: TEST.into(),
            message: format!("expected {} rows, found {}", meta.n_users, test.len()),
        });
    }
    Ok(EvalSplit {
        train,
        test,
        seed: meta.seed,
        n_neg: meta.n_neg,
    })
}

pub fn save_labels(labels: &AttributeLabels, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tsv = String::new();
    for (u, c) in labels.labels().iter().enumerate() {
        writeln!(tsv, "{u}\t{c}").unwrap();
    }
    for name in labels.class_names() {
        check_id(name)?;
    }
    let checksum = write(dir, ATTR, &tsv)?;
    let meta = AttrMeta {
        version: FORMAT_VERSION,
        n_users: labels.n_users(),
        class_names: labels.class_names().to_vec(),
        checksum,
    };
    let mut json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    json.push('\n');
    write(dir, ATTR_META, &json)?;
    Ok(())
}

pub fn load_labels(dir: &Path) -> Result<AttributeLabels> {
    let meta: AttrMeta =
        serde_json::from_str(&read(dir, ATTR_META)?).map_err(|e| DataError::Corrupt {
            file: ATTR_META.into(),
            message: e.to_string(),
        })?;
    if meta.version != FORMAT_VERSION {
        return Err(DataError::VersionMismatch {
            found: meta.version,
            expected: FORMAT_VERSION,
        });
    }
    let text = read_checked(dir, ATTR, Some(&meta.checksum))?;
    let mut labels = Vec::with_capacity(meta.n_users);
    for (k, line) in text.lines().enumerate() {
        let mut f = line.split('\t');
        let user: usize = field(ATTR, k, f.next())?;
        let class: usize = field(ATTR, k, f.next())?;
        if user != k {
            return Err(corrupt(ATTR, k, "user indices must be dense and ascending"));
        }
        labels.push(class);
    }
    if labels.len() != meta.n_users {
        return Err(DataError::Corrupt {
            file: ATTR.into(),
            message: format!("expected {} rows, found {}", meta.n_users, labels.len()),
        });
    }
    AttributeLabels::new(labels, meta.class_names)
}
