use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use highrecall_core::{SearchConfig, Strategy};
use serde::{Deserialize, Serialize};

/// Where the cluster memberships of a run come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MembershipSource {
    /// Built-in soft clustering with `config.clusters` arms.
    Clustered { seed: u64 },
    /// An imported triplet file.
    Imported { path: PathBuf, sha256: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub run: usize,
    pub seed: u64,
    pub seed_ids: Vec<String>,
}

/// Everything needed to repeat a `run` bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub corpus: PathBuf,
    pub corpus_sha256: String,
    pub min_df: usize,
    /// Topic whose labels answer the simulated reviews.
    pub topic: String,
    /// Topic the seed sets were drawn from.
    pub seed_topic: String,
    pub memberships: MembershipSource,
    /// Shared settings; `seed` and `strategy` are set per run.
    pub config: SearchConfig,
    pub strategies: Vec<Strategy>,
    pub recall_targets: Vec<f64>,
    pub master_seed: u64,
    pub runs: Vec<RunSeeds>,
    /// Output files, relative to the output directory.
    pub outputs: Vec<PathBuf>,
    pub created_unix: u64,
    #[serde(default)]
    pub finished_unix: Option<u64>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("malformed manifest {}", path.display()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn trajectory_path(strategy: Strategy, run: usize) -> PathBuf {
        PathBuf::from(format!("runs/{strategy}-{run:02}.trajectory.tsv"))
    }

    pub fn curve_path(strategy: Strategy, run: usize) -> PathBuf {
        PathBuf::from(format!("runs/{strategy}-{run:02}.curve.tsv"))
    }

    pub fn arms_path(strategy: Strategy, run: usize) -> PathBuf {
        PathBuf::from(format!("runs/{strategy}-{run:02}.arms.tsv"))
    }
}

pub(crate) fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}
