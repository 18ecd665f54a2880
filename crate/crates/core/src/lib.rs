//! High-recall active search driven by non-stationary Thompson sampling.
//!
//! The collection is soft-clustered into `K` arms. Each arm carries a Beta
//! posterior over its "conversion rate" that is discounted every round (or
//! restricted to a sliding window). Batches are built by repeatedly drawing
//! optimistic arm samples and picking the pool instance that maximises
//! `pi_i * sum_k mu_ik * theta*_k`, where `pi_i` comes from a logistic
//! regression retrained after every labelled batch.
//!
//! Module map:
//!
//! - [`corpus`]: tokenisation, vocabulary, TF-IDF vectors.
//! - [`cluster`]: soft memberships (spherical k-means + softmax, or imported).
//! - [`classifier`]: L2-regularised logistic regression and training sets.
//! - [`bandit`]: discounted / windowed Beta posteriors and optimistic sampling.
//! - [`search`]: the batch search loop, baselines and the synthetic benchmark.
//! - [`eval`]: weighted recall curves and effort-to-recall tables.
//! - [`session`]: label-driven sessions with an append-only event log.
//! - [`io`]: the tab-separated and line-oriented file formats.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod bandit;
pub mod classifier;
pub mod cluster;
pub mod corpus;
pub mod eval;
pub mod io;
pub mod rng;
pub mod search;
pub mod session;

pub use bandit::{ArmPosterior, BanditError, BanditState, RewardBatch, RoundTotals, UpdateMode};
pub use classifier::{ClassifierError, LogRegModel, Provenance, TrainingSet};
pub use cluster::{ClusterError, MembershipMatrix};
pub use corpus::{Corpus, CorpusError, CorpusMatrix, Document, SparseVector, Vocabulary};
pub use eval::{Effort, EvalError, EvaluationReport, RecallCurve};
pub use search::{
    DatasetOracle, Oracle, SearchConfig, SearchEngine, SearchError, SeedSet, Strategy, Trajectory,
    TrajectoryEntry,
};
pub use session::{Session, SessionError, SessionEvent, SessionStatus};
