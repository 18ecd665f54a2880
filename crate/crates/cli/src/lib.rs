//! Batch commands behind the `highrecall` binary.
//!
//! `ingest` and `cluster` write the intermediate artifacts, `run` simulates
//! reviews against corpus labels and writes per-run trajectories plus an
//! effort report, `report` recomputes the table from existing trajectories.
//! Every `run` writes a `manifest.json` from which it can be repeated exactly.

mod manifest;
mod pipeline;
mod run;

pub use manifest::{MembershipSource, RunManifest, RunSeeds};
pub use pipeline::{cmd_cluster, cmd_generate, cmd_ingest, load_corpus, sha256_file, ClusterSource};
pub use run::{cmd_report, cmd_run, execute, plan, RunOptions, RunOutcome, SEEDS_PER_RUN};
