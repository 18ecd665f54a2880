//! The batch search loop.
//!
//! [`SearchEngine`] is a label-driven state machine: it proposes a batch,
//! waits for the labels of exactly that batch, then updates the arm
//! posteriors, grows the batch size, retrains the classifier on the labelled
//! set plus fresh pseudo-negatives, rescores the pool and proposes the next
//! batch. [`run_search`] drives it with an [`Oracle`]; the review service
//! drives the same machine with human labels.

mod config;
pub mod synthetic;
mod trajectory;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::seq::index;
use thiserror::Error;

use crate::bandit::{ArmPosterior, BanditError, BanditState, Reward, RewardBatch, RoundRecord};
use crate::classifier::{self, ClassifierError, Example, LogRegModel, Provenance};
use crate::cluster::MembershipMatrix;
use crate::corpus::{self, Corpus, CorpusError, CorpusMatrix, SparseVector};
use crate::rng::{self, SearchRng};

pub use config::{next_batch_size, SearchConfig, Strategy};
pub use trajectory::{SeedEntry, Trajectory, TrajectoryEntry};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("seed set contains no relevant instance")]
    NoSeeds,
    #[error("pool is empty")]
    EmptyPool,
    #[error("unknown seed id `{0}`")]
    UnknownSeed(String),
    #[error("oracle did not answer: {0}")]
    OracleTimeout(String),
    #[error("labels missing for pending ids {0:?}")]
    PartialLabels(Vec<String>),
    #[error("labels given for ids that are not pending: {0:?}")]
    UnknownIds(Vec<String>),
    #[error("search already finished")]
    Finished,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("membership matrix has {memberships} rows but the corpus has {corpus}")]
    MembershipRows { memberships: usize, corpus: usize },
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Bandit(#[from] BanditError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Something that can label proposed instances: the simulation's ground
/// truth, or a human reviewer.
pub trait Oracle {
    fn label(&mut self, ids: &[String]) -> Result<Vec<bool>, SearchError>;
}

/// Answers from ground-truth labels of one topic.
#[derive(Debug, Clone)]
pub struct DatasetOracle {
    labels: HashMap<String, bool>,
}

impl DatasetOracle {
    pub fn new(corpus: &Corpus, topic: &str) -> Self {
        Self {
            labels: corpus
                .docs()
                .iter()
                .map(|d| (d.id.clone(), d.is_relevant(topic)))
                .collect(),
        }
    }

    pub fn from_labels(labels: HashMap<String, bool>) -> Self {
        Self { labels }
    }

    pub fn get(&self, id: &str) -> Option<bool> {
        self.labels.get(id).copied()
    }
}

impl Oracle for DatasetOracle {
    fn label(&mut self, ids: &[String]) -> Result<Vec<bool>, SearchError> {
        ids.iter()
            .map(|id| {
                self.labels
                    .get(id)
                    .copied()
                    .ok_or_else(|| SearchError::OracleTimeout(format!("no label for `{id}`")))
            })
            .collect()
    }
}

/// Already-reviewed seed instances and/or a free-text query that becomes a
/// synthetic positive.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeedSet {
    pub labeled: Vec<(String, bool)>,
    pub query: Option<String>,
}

impl SeedSet {
    pub fn relevant(ids: impl IntoIterator<Item = String>) -> Self {
        Self {
            labeled: ids.into_iter().map(|id| (id, true)).collect(),
            query: None,
        }
    }

    pub fn query(text: impl Into<String>) -> Self {
        Self {
            labeled: Vec::new(),
            query: Some(text.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub row: usize,
    pub id: String,
    pub pi: f64,
    /// `sum_k mu_ik * theta*_k` at selection time; only for the mab strategy.
    pub arm_score: Option<f64>,
}

/// Arm-weighted selection: `argmax_{i in pool} pi_i * sum_k mu_ik theta*_k`,
/// ties to the lexicographically smallest id. Returns the winning row.
pub fn select_instance(
    pool: &[usize],
    scores: &[f64],
    memberships: &MembershipMatrix,
    theta: &[f64],
    ids: &[String],
) -> Result<(usize, f64), SearchError> {
    let mut best: Option<(usize, f64)> = None;
    for &row in pool {
        let value = scores[row] * memberships.weighted_sum(row, theta);
        let better = match best {
            None => true,
            Some((b, v)) => value > v || (value == v && ids[row] < ids[b]),
        };
        if better {
            best = Some((row, value));
        }
    }
    best.ok_or(SearchError::EmptyPool)
}

/// Top-`b` rows by score, ties to the smaller id.
pub fn greedy_select(pool: &[usize], scores: &[f64], ids: &[String], b: usize) -> Vec<usize> {
    let mut order = pool.to_vec();
    order.sort_by(|&x, &y| {
        scores[y]
            .total_cmp(&scores[x])
            .then_with(|| ids[x].cmp(&ids[y]))
    });
    order.truncate(b);
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Progress {
    pub reviewed: usize,
    pub relevant_found: usize,
    pub batch_size: usize,
    pub round: usize,
    pub pool_size: usize,
    pub budget_reviews: usize,
}

pub struct SearchEngine {
    matrix: Arc<CorpusMatrix>,
    memberships: Arc<MembershipMatrix>,
    config: SearchConfig,
    training: Vec<Example>,
    pool: Vec<usize>,
    scores: Vec<f64>,
    model: Option<LogRegModel>,
    bandit: BanditState,
    history: Vec<RoundRecord>,
    snapshots: Vec<Vec<ArmPosterior>>,
    batch_size: usize,
    round: usize,
    reviewed: usize,
    relevant_found: usize,
    budget_reviews: usize,
    training_rng: SearchRng,
    selection_rng: SearchRng,
    trajectory: Trajectory,
    pending: Vec<Proposal>,
    finished: bool,
}

impl SearchEngine {
    pub fn new(
        matrix: Arc<CorpusMatrix>,
        memberships: Arc<MembershipMatrix>,
        config: SearchConfig,
        seeds: &SeedSet,
    ) -> Result<Self, SearchError> {
        config.validate()?;
        if memberships.n_rows() != matrix.len() {
            return Err(SearchError::MembershipRows {
                memberships: memberships.n_rows(),
                corpus: matrix.len(),
            });
        }
        let n = matrix.len();
        let mut in_pool = vec![true; n];
        let mut training = Vec::new();
        let mut trajectory = Trajectory::default();
        let mut relevant_found = 0;
        for (id, label) in &seeds.labeled {
            let row = matrix
                .row_of(id)
                .ok_or_else(|| SearchError::UnknownSeed(id.clone()))?;
            if !in_pool[row] {
                continue;
            }
            in_pool[row] = false;
            training.push(Example {
                x: matrix.row(row).clone(),
                label: *label,
                provenance: Provenance::Seed,
            });
            trajectory.seeds.push(SeedEntry {
                id: id.clone(),
                label: *label,
            });
            relevant_found += usize::from(*label);
        }
        if let Some(query) = &seeds.query {
            let x = corpus::synthetic_positive(query, matrix.vocabulary())
                .map_err(|_| SearchError::NoSeeds)?;
            training.push(Example {
                x,
                label: true,
                provenance: Provenance::Seed,
            });
        }
        if !training.iter().any(|e| e.label) {
            return Err(SearchError::NoSeeds);
        }
        let pool: Vec<usize> = (0..n).filter(|&r| in_pool[r]).collect();
        let bandit = BanditState::new(memberships.k().max(1), config.mode);
        let mut engine = Self {
            budget_reviews: config.budget_reviews(n),
            batch_size: config.initial_batch,
            training_rng: rng::stream(config.seed, rng::STREAM_TRAINING),
            selection_rng: rng::stream(config.seed, rng::STREAM_SELECTION),
            snapshots: vec![bandit.arms().to_vec()],
            matrix,
            memberships,
            config,
            training,
            pool,
            scores: vec![0.0; n],
            model: None,
            bandit,
            history: Vec::new(),
            round: 0,
            reviewed: trajectory.seeds.len(),
            relevant_found,
            trajectory,
            pending: Vec::new(),
            finished: false,
        };
        if engine.exhausted() {
            engine.finished = true;
        } else {
            engine.retrain()?;
            engine.propose()?;
        }
        Ok(engine)
    }

    fn exhausted(&self) -> bool {
        self.reviewed >= self.budget_reviews || self.pool.is_empty()
    }

    fn retrain(&mut self) -> Result<(), SearchError> {
        let pool_rows: Vec<&SparseVector> = self.pool.iter().map(|&r| self.matrix.row(r)).collect();
        let ts = classifier::assemble_training_set(
            &self.training,
            &pool_rows,
            self.config.pseudo_negatives,
            &mut self.training_rng,
        )?;
        let model = classifier::train(
            &ts,
            self.matrix.n_features(),
            self.config.l2_lambda,
            self.config.epochs,
        )?;
        for &row in &self.pool {
            self.scores[row] = model.predict_one(self.matrix.row(row));
        }
        self.model = Some(model);
        Ok(())
    }

    fn propose(&mut self) -> Result<(), SearchError> {
        let size = self
            .batch_size
            .min(self.budget_reviews - self.reviewed)
            .min(self.pool.len());
        let matrix = Arc::clone(&self.matrix);
        let ids = matrix.ids();
        let mut batch = Vec::with_capacity(size);
        match self.config.strategy {
            Strategy::Mab => {
                for _ in 0..size {
                    let theta = self.bandit.sample_optimistic(&mut self.selection_rng);
                    let (row, _) =
                        select_instance(&self.pool, &self.scores, &self.memberships, &theta, ids)?;
                    let arm_score = self.memberships.weighted_sum(row, &theta);
                    self.remove_from_pool(row);
                    batch.push(Proposal {
                        row,
                        id: ids[row].clone(),
                        pi: self.scores[row],
                        arm_score: Some(arm_score),
                    });
                }
            }
            Strategy::Greedy => {
                for row in greedy_select(&self.pool, &self.scores, ids, size) {
                    batch.push(self.take(row));
                }
            }
            Strategy::Random => {
                let picks = index::sample(&mut self.selection_rng, self.pool.len(), size);
                let rows: Vec<usize> = picks.iter().map(|i| self.pool[i]).collect();
                for row in rows {
                    batch.push(self.take(row));
                }
            }
        }
        self.pending = batch;
        Ok(())
    }

    fn take(&mut self, row: usize) -> Proposal {
        self.remove_from_pool(row);
        Proposal {
            row,
            id: self.matrix.id(row).to_string(),
            pi: self.scores[row],
            arm_score: None,
        }
    }

    fn remove_from_pool(&mut self, row: usize) {
        if let Ok(pos) = self.pool.binary_search(&row) {
            self.pool.remove(pos);
        }
    }

    /// Applies labels for exactly the pending batch and advances one round.
    pub fn submit(&mut self, labels: &BTreeMap<String, bool>) -> Result<(), SearchError> {
        if self.finished {
            return Err(SearchError::Finished);
        }
        let unknown: Vec<String> = labels
            .keys()
            .filter(|id| !self.pending.iter().any(|p| &p.id == *id))
            .cloned()
            .collect();
        if !unknown.is_empty() {
            return Err(SearchError::UnknownIds(unknown));
        }
        let missing: Vec<String> = self
            .pending
            .iter()
            .filter(|p| !labels.contains_key(&p.id))
            .map(|p| p.id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(SearchError::PartialLabels(missing));
        }

        let batch = std::mem::take(&mut self.pending);
        let mut rewards = Vec::with_capacity(batch.len());
        for p in &batch {
            let label = labels[&p.id];
            self.trajectory.entries.push(TrajectoryEntry {
                round: self.round + 1,
                id: p.id.clone(),
                pi: p.pi,
                arm_score: p.arm_score,
                label,
            });
            self.training.push(Example {
                x: self.matrix.row(p.row).clone(),
                label,
                provenance: Provenance::Reviewed,
            });
            rewards.push(Reward {
                id: p.id.clone(),
                relevant: label,
                membership: self.memberships.row(p.row).to_vec(),
            });
            self.relevant_found += usize::from(label);
        }
        self.reviewed += batch.len();
        let rewards = RewardBatch::new(rewards);
        self.bandit.update(&rewards)?;
        self.history.push(RoundRecord {
            round: self.round,
            batch: rewards,
        });
        self.snapshots.push(self.bandit.arms().to_vec());
        self.batch_size = next_batch_size(self.batch_size);
        self.round += 1;

        if self.exhausted() {
            self.finished = true;
            return Ok(());
        }
        self.retrain()?;
        self.propose()
    }

    /// Labels of the pending batch, in proposal order.
    pub fn submit_in_order(&mut self, labels: &[bool]) -> Result<(), SearchError> {
        let map = self
            .pending
            .iter()
            .zip(labels)
            .map(|(p, &l)| (p.id.clone(), l))
            .collect();
        self.submit(&map)
    }

    pub fn pending(&self) -> &[Proposal] {
        &self.pending
    }

    pub fn pending_ids(&self) -> Vec<String> {
        self.pending.iter().map(|p| p.id.clone()).collect()
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn progress(&self) -> Progress {
        Progress {
            reviewed: self.reviewed,
            relevant_found: self.relevant_found,
            batch_size: self.batch_size,
            round: self.round,
            pool_size: self.pool.len(),
            budget_reviews: self.budget_reviews,
        }
    }

    pub fn config(&self) -> &SearchConfig {
        &self.config
    }

    pub fn matrix(&self) -> &CorpusMatrix {
        &self.matrix
    }

    pub fn memberships(&self) -> &MembershipMatrix {
        &self.memberships
    }

    pub fn bandit(&self) -> &BanditState {
        &self.bandit
    }

    /// Posteriors after each round; index 0 is the prior.
    pub fn snapshots(&self) -> &[Vec<ArmPosterior>] {
        &self.snapshots
    }

    pub fn reward_history(&self) -> &[RoundRecord] {
        &self.history
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn into_trajectory(self) -> Trajectory {
        self.trajectory
    }

    pub fn model(&self) -> Option<&LogRegModel> {
        self.model.as_ref()
    }

    /// Current scores of the rows still in the pool.
    pub fn pool_scores(&self) -> Vec<f64> {
        self.pool.iter().map(|&r| self.scores[r]).collect()
    }

    pub fn pool(&self) -> &[usize] {
        &self.pool
    }

    /// Writes `round \t cluster \t S \t F` for every recorded round.
    pub fn write_snapshots<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        for (round, arms) in self.snapshots.iter().enumerate() {
            for (k, arm) in arms.iter().enumerate() {
                writeln!(out, "{round}\t{k}\t{}\t{}", arm.s, arm.f)?;
            }
        }
        Ok(())
    }
}

/// Runs a whole search against an oracle and returns the finished engine.
pub fn run_search<O: Oracle + ?Sized>(
    matrix: Arc<CorpusMatrix>,
    memberships: Arc<MembershipMatrix>,
    oracle: &mut O,
    config: SearchConfig,
    seeds: &SeedSet,
) -> Result<SearchEngine, SearchError> {
    let mut engine = SearchEngine::new(matrix, memberships, config, seeds)?;
    while !engine.is_finished() {
        let ids = engine.pending_ids();
        let labels = oracle.label(&ids)?;
        if labels.len() != ids.len() {
            return Err(SearchError::OracleTimeout(format!(
                "expected {} labels, got {}",
                ids.len(),
                labels.len()
            )));
        }
        engine.submit_in_order(&labels)?;
    }
    Ok(engine)
}
