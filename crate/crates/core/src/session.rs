//! Review sessions: a [`SearchEngine`] driven by externally supplied labels.
//!
//! A session is persisted as an append-only list of [`SessionEvent`]s; its
//! state is a fold over that list, so recovering a session is replaying it.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bandit::ArmPosterior;
use crate::cluster::MembershipMatrix;
use crate::corpus::CorpusMatrix;
use crate::search::{SearchConfig, SearchEngine, SearchError, SeedSet, Trajectory};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("labels missing for pending ids {0:?}")]
    PartialLabels(Vec<String>),
    #[error("ids are not pending: {0:?}")]
    UnknownIds(Vec<String>),
    #[error("session already finished")]
    SessionFinished,
    #[error("seed set yields no relevant instance")]
    NoSeeds,
    #[error("session is busy, retry later")]
    Busy,
    #[error("event log is not replayable: {0}")]
    CorruptLog(String),
    #[error(transparent)]
    Search(SearchError),
}

impl From<SearchError> for SessionError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::NoSeeds | SearchError::UnknownSeed(_) => SessionError::NoSeeds,
            SearchError::PartialLabels(ids) => SessionError::PartialLabels(ids),
            SearchError::UnknownIds(ids) => SessionError::UnknownIds(ids),
            SearchError::Finished => SessionError::SessionFinished,
            other => SessionError::Search(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Created {
        corpus: String,
        config: SearchConfig,
        seed_ids: Vec<String>,
        seed_query: Option<String>,
    },
    Labels {
        labels: BTreeMap<String, bool>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    AwaitingLabels,
    Computing,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingItem {
    pub id: String,
    pub pi: f64,
    pub arm_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub session_id: String,
    pub corpus: String,
    pub status: SessionStatus,
    /// Seed documents, labelled before the session started.
    pub seeds: usize,
    /// Documents labelled through the session, seeds excluded.
    pub reviewed: usize,
    pub relevant_found: usize,
    pub batch_size: usize,
    pub round: usize,
    pub pool_size: usize,
    pub budget_reviews: usize,
    pub arms: Vec<ArmPosterior>,
    /// `(reviewed, relevant found)` at creation and after every round.
    pub found_curve: Vec<(usize, usize)>,
    pub pending: Vec<PendingItem>,
}

pub struct Session {
    id: String,
    corpus: String,
    engine: SearchEngine,
    events: Vec<SessionEvent>,
    last_submission: Option<BTreeMap<String, bool>>,
    status: SessionStatus,
}

impl Session {
    /// Starts a session. Seed ids are known-relevant documents.
    pub fn create(
        id: impl Into<String>,
        corpus: impl Into<String>,
        matrix: Arc<CorpusMatrix>,
        memberships: Arc<MembershipMatrix>,
        config: SearchConfig,
        seed_ids: Vec<String>,
        seed_query: Option<String>,
    ) -> Result<Self, SessionError> {
        let seeds = SeedSet {
            labeled: seed_ids.iter().map(|s| (s.clone(), true)).collect(),
            query: seed_query.clone().filter(|q| !q.trim().is_empty()),
        };
        let engine = SearchEngine::new(matrix, memberships, config.clone(), &seeds)?;
        let corpus = corpus.into();
        let status = if engine.is_finished() {
            SessionStatus::Finished
        } else {
            SessionStatus::AwaitingLabels
        };
        Ok(Self {
            id: id.into(),
            events: vec![SessionEvent::Created {
                corpus: corpus.clone(),
                config,
                seed_ids,
                seed_query,
            }],
            corpus,
            engine,
            last_submission: None,
            status,
        })
    }

    /// Rebuilds a session by folding its event log.
    pub fn replay(
        id: impl Into<String>,
        matrix: Arc<CorpusMatrix>,
        memberships: Arc<MembershipMatrix>,
        events: &[SessionEvent],
    ) -> Result<Self, SessionError> {
        let Some(SessionEvent::Created {
            corpus,
            config,
            seed_ids,
            seed_query,
        }) = events.first()
        else {
            return Err(SessionError::CorruptLog("log must start with `created`".into()));
        };
        let mut session = Self::create(
            id,
            corpus.clone(),
            matrix,
            memberships,
            config.clone(),
            seed_ids.clone(),
            seed_query.clone(),
        )?;
        for event in &events[1..] {
            match event {
                SessionEvent::Labels { labels } => session.submit_labels(labels)?,
                SessionEvent::Created { .. } => {
                    return Err(SessionError::CorruptLog("duplicate `created` event".into()))
                }
            }
        }
        Ok(session)
    }

    /// Labels exactly the pending batch and advances one round. Resubmitting
    /// the previously applied map is a no-op, so a retried request does not
    /// advance the search twice.
    pub fn submit_labels(&mut self, labels: &BTreeMap<String, bool>) -> Result<(), SessionError> {
        if self.last_submission.as_ref() == Some(labels) {
            return Ok(());
        }
        if self.engine.is_finished() {
            return Err(SessionError::SessionFinished);
        }
        self.status = SessionStatus::Computing;
        let result = self.engine.submit(labels);
        self.status = if self.engine.is_finished() {
            SessionStatus::Finished
        } else {
            SessionStatus::AwaitingLabels
        };
        result?;
        self.events.push(SessionEvent::Labels {
            labels: labels.clone(),
        });
        self.last_submission = Some(labels.clone());
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn corpus(&self) -> &str {
        &self.corpus
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    /// The most recent event, for appending to a persisted log.
    pub fn last_event(&self) -> &SessionEvent {
        self.events.last().expect("created event always present")
    }

    pub fn engine(&self) -> &SearchEngine {
        &self.engine
    }

    pub fn trajectory(&self) -> &Trajectory {
        self.engine.trajectory()
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        let progress = self.engine.progress();
        let traj = self.engine.trajectory();
        let seeds = traj.seeds.len();
        let seed_found = traj.seeds.iter().filter(|s| s.label).count();
        let mut found_curve = vec![(0, 0)];
        let (mut reviewed, mut found) = (0, 0);
        let mut current_round = None;
        for e in &traj.entries {
            if current_round.is_some_and(|r| r != e.round) {
                found_curve.push((reviewed, found));
            }
            current_round = Some(e.round);
            reviewed += 1;
            found += usize::from(e.label);
        }
        if current_round.is_some() {
            found_curve.push((reviewed, found));
        }
        SessionSnapshot {
            session_id: self.id.clone(),
            corpus: self.corpus.clone(),
            status: self.status,
            seeds,
            reviewed: progress.reviewed - seeds,
            relevant_found: progress.relevant_found - seed_found,
            batch_size: progress.batch_size,
            round: progress.round,
            pool_size: progress.pool_size,
            budget_reviews: progress.budget_reviews,
            arms: self.engine.bandit().arms().to_vec(),
            found_curve,
            pending: self
                .engine
                .pending()
                .iter()
                .map(|p| PendingItem {
                    id: p.id.clone(),
                    pi: p.pi,
                    arm_score: p.arm_score,
                })
                .collect(),
        }
    }
}
