//! Interaction data: parsing, filtering, leave-one-out splitting, attribute
//! labels, and the on-disk TSV layout.
//!
//! Ratings are kept as read but every interaction is treated as an implicit
//! positive by the models.

mod attributes;
mod filter;
mod persist;
mod raw;
mod split;
pub mod synthetic;

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;

use thiserror::Error;

pub use attributes::{load_attributes, parse_attributes, AttrFormat};
pub use filter::filter_min_interactions;
pub use persist::{load_labels, load_split, read_split_meta, save_labels, save_split, SplitMeta};
pub use raw::{parse_raw, parse_raw_str, RawFormat};
pub use split::leave_one_out_split;

/// Number of sampled negatives per test user in the standard protocol.
pub const DEFAULT_TEST_NEGATIVES: usize = 99;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("user {user} has fewer than 2 distinct interacted items; cannot hold one out")]
    TooFewInteractions { user: String },
    #[error("user {user}: only {available} non-interacted items, {needed} negatives requested")]
    NotEnoughNegatives {
        user: String,
        available: usize,
        needed: usize,
    },
    #[error("attribute file is missing {} user(s): {}", .0.len(), .0.join(", "))]
    MissingUsers(Vec<String>),
    #[error("user {user}: unknown class {class:?}")]
    UnknownClass { user: String, class: String },
    #[error("user {user}: conflicting labels {first:?} and {second:?}")]
    ConflictingLabel {
        user: String,
        first: String,
        second: String,
    },
    #[error("need at least 2 attribute classes, found {0}")]
    TooFewClasses(usize),
    #[error("format version mismatch: file has {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checksum mismatch for {file}")]
    ChecksumMismatch { file: String },
    #[error("corrupt data in {file}: {message}")]
    Corrupt { file: String, message: String },
}

pub type Result<T> = std::result::Result<T, DataError>;

/// One line of a raw rating file, with the source's own identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct RawInteraction {
    pub user_id: String,
    pub item_id: String,
    pub rating: f64,
    pub timestamp: i64,
}

/// A user–item interaction with dense indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interaction {
    pub user: usize,
    pub item: usize,
    pub rating: f64,
    pub timestamp: i64,
}

/// Interactions over dense `0..n_users` × `0..n_items` index spaces, with
/// the mapping back to the source identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionDataset {
    user_ids: Vec<String>,
    item_ids: Vec<String>,
    interactions: Vec<Interaction>,
    pos_sets: Vec<BTreeSet<usize>>,
}

impl InteractionDataset {
    /// Builds a dataset and its per-user positive sets. Fails if any index is
    /// out of range for the given id tables.
    pub fn new(
        user_ids: Vec<String>,
        item_ids: Vec<String>,
        interactions: Vec<Interaction>,
    ) -> Result<Self> {
        let mut pos_sets = vec![BTreeSet::new(); user_ids.len()];
        for (k, it) in interactions.iter().enumerate() {
            if it.user >= user_ids.len() || it.item >= item_ids.len() {
                return Err(DataError::Corrupt {
                    file: "interactions".into(),
                    message: format!(
                        "row {k}: ({}, {}) outside {}x{}",
                        it.user,
                        it.item,
                        user_ids.len(),
                        item_ids.len()
                    ),
                });
            }
            pos_sets[it.user].insert(it.item);
        }
        Ok(Self {
            user_ids,
            item_ids,
            interactions,
            pos_sets,
        })
    }

    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    /// Items the user interacted with.
    pub fn positives(&self, user: usize) -> &BTreeSet<usize> {
        &self.pos_sets[user]
    }

    pub fn pos_sets(&self) -> &[BTreeSet<usize>] {
        &self.pos_sets
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn user_index(&self) -> HashMap<&str, usize> {
        self.user_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect()
    }

    /// Distinct (user, item) pairs in user-major, item-ascending order.
    pub fn positive_pairs(&self) -> Vec<(usize, usize)> {
        self.pos_sets
            .iter()
            .enumerate()
            .flat_map(|(u, items)| items.iter().map(move |&i| (u, i)))
            .collect()
    }

    /// Interaction counts per user and per item.
    pub fn degrees(&self) -> (Vec<usize>, Vec<usize>) {
        let mut du = vec![0; self.n_users()];
        let mut di = vec![0; self.n_items()];
        for it in &self.interactions {
            du[it.user] += 1;
            di[it.item] += 1;
        }
        (du, di)
    }
}

/// The held-out candidates for one user.
#[derive(Debug, Clone, PartialEq)]
pub struct TestCase {
    pub positive: usize,
    pub negatives: Vec<usize>,
}

impl TestCase {
    /// Positive first, then negatives in sampled order.
    pub fn candidates(&self) -> Vec<usize> {
        std::iter::once(self.positive)
            .chain(self.negatives.iter().copied())
            .collect()
    }
}

/// Leave-one-out split: training interactions plus one test case per user.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSplit {
    pub train: InteractionDataset,
    /// Indexed by user.
    pub test: Vec<TestCase>,
    pub seed: u64,
    pub n_neg: usize,
}

/// One categorical attribute per user, aligned to dense user indices.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeLabels {
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl AttributeLabels {
    pub fn new(labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if class_names.len() < 2 {
            return Err(DataError::TooFewClasses(class_names.len()));
        }
        if let Some(bad) = labels.iter().find(|&&c| c >= class_names.len()) {
            return Err(DataError::InvalidArgument(format!(
                "class index {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        Ok(Self {
            labels,
            class_names,
        })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn n_users(&self) -> usize {
        self.labels.len()
    }

    /// Users of each class, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_classes()];
        for (u, &c) in self.labels.iter().enumerate() {
            out[c].push(u);
        }
        out
    }

    pub fn class_counts(&self) -> Vec<usize> {
        self.members().iter().map(Vec::len).collect()
    }
}
