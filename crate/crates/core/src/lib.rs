//! Post-training attribute unlearning for embedding-based recommenders.
//!
//! The crate covers the whole experimental loop:
//!
//! - [`dataio`]: MovieLens-style parsing, fixed-point interaction filtering,
//!   leave-one-out splits with 99 sampled negatives, attribute labels and a
//!   portable TSV persistence format.
//! - [`recmodels`]: BPR-trained matrix factorization and LightGCN.
//! - [`unlearning`]: the two-component post-training objectives (user-to-user
//!   and distribution-to-distribution distinguishability plus an anchor
//!   regularizer) and the in-training baselines (penalized retraining and
//!   adversarial training with gradient reversal).
//! - [`attack`]: MLP and gradient-boosted-tree attribute inference attackers.
//! - [`recmetrics`]: NDCG@K / HR@K over leave-one-out candidate lists.
//! - [`harness`]: JSON configs, experiment directories, embedding histograms.
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod attack;
pub mod dataio;
pub mod harness;
pub mod linalg;
pub mod nn;
pub mod optim;
pub mod recmetrics;
pub mod recmodels;
pub mod rng;
pub mod unlearning;

pub use attack::{AttackReport, AttackerKind};
pub use dataio::{AttributeLabels, EvalSplit, InteractionDataset, RawInteraction};
pub use recmetrics::RecReport;
pub use recmodels::{EmbeddingModel, ModelKind, NormAdjacency, TrainHyperparams};
pub use unlearning::{UnlearnHyperparams, UnlearnMethod, UnlearnResult};

/// Version tag written into every persisted header file.
pub const FORMAT_VERSION: u32 = 1;
