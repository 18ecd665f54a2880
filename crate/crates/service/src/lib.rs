//! HTTP+JSON review service.
//!
//! A reviewer creates a session over a loaded corpus, reads the pending batch,
//! and posts labels for exactly that batch; each post advances the search by
//! one round. Routes:
//!
//! | method | path | body | response |
//! |---|---|---|---|
//! | `POST` | `/sessions` | [`CreateSession`] | `201` + [`SessionView`] |
//! | `GET` | `/sessions/{id}` | | [`SessionView`] |
//! | `POST` | `/sessions/{id}/labels` | [`SubmitLabels`] | [`SessionView`] |
//! | `GET` | `/sessions/{id}/trajectory` | | [`TrajectoryView`], or TSV with `?format=tsv` |
//!
//! Errors are `{"error": code, "message": text}` with a 4xx/5xx status; a
//! label post that arrives while the session is still computing gets `409`
//! with code `busy` and a `Retry-After` header.
//!
//! With a log directory configured, every session is an append-only JSONL
//! file of events and is rebuilt by replay on startup.

mod error;

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, TryLockError};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use highrecall_core::session::{SessionSnapshot, SessionStatus};
use highrecall_core::{
    Corpus, CorpusMatrix, MembershipMatrix, SearchConfig, Session, SessionError, SessionEvent,
    Trajectory,
};
use serde::{Deserialize, Serialize};

pub use error::ApiError;

/// A corpus ready for review: texts, features and memberships.
pub struct Dataset {
    pub corpus: Corpus,
    pub matrix: Arc<CorpusMatrix>,
    pub memberships: Arc<MembershipMatrix>,
}

/// A session plus the view last produced from it. Reads are served from the
/// view, so they never wait for a retrain.
struct Slot {
    session: Mutex<Session>,
    view: Mutex<SessionView>,
}

type SessionHandle = Arc<Slot>;

impl Slot {
    fn new(session: Session, view: SessionView) -> Arc<Self> {
        Arc::new(Self {
            session: Mutex::new(session),
            view: Mutex::new(view),
        })
    }
}

pub struct AppState {
    datasets: HashMap<String, Arc<Dataset>>,
    sessions: Mutex<HashMap<String, SessionHandle>>,
    log_dir: Option<PathBuf>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(datasets: HashMap<String, Dataset>) -> Self {
        Self {
            datasets: datasets.into_iter().map(|(k, v)| (k, Arc::new(v))).collect(),
            sessions: Mutex::new(HashMap::new()),
            log_dir: None,
            next_id: AtomicU64::new(1),
        }
    }

    /// Persists sessions under `dir` and restores the ones already there.
    pub fn with_log_dir(mut self, dir: impl Into<PathBuf>) -> Result<Self, ApiError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| internal(&dir, e))?;
        let mut restored = HashMap::new();
        let mut max_id = 0;
        let mut entries: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| internal(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        entries.sort();
        for path in entries {
            let id = path.file_stem().unwrap().to_string_lossy().into_owned();
            let session = self.restore(&id, &path)?;
            let view = view(&session, &self)?;
            if let Some(n) = id.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
                max_id = max_id.max(n);
            }
            restored.insert(id, Slot::new(session, view));
        }
        tracing::info!("restored {} sessions from {}", restored.len(), dir.display());
        self.sessions = Mutex::new(restored);
        self.next_id = AtomicU64::new(max_id + 1);
        self.log_dir = Some(dir);
        Ok(self)
    }

    fn restore(&self, id: &str, path: &Path) -> Result<Session, ApiError> {
        let file = File::open(path).map_err(|e| internal(path, e))?;
        let mut events = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| internal(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let event: SessionEvent = serde_json::from_str(&line).map_err(|e| {
                ApiError::Session(SessionError::CorruptLog(format!(
                    "{}:{}: {e}",
                    path.display(),
                    n + 1
                )))
            })?;
            events.push(event);
        }
        let Some(SessionEvent::Created { corpus, .. }) = events.first() else {
            return Err(SessionError::CorruptLog(format!("{}: no `created` event", path.display())).into());
        };
        let data = self.dataset(corpus)?;
        Ok(Session::replay(id, data.matrix.clone(), data.memberships.clone(), &events)?)
    }

    fn dataset(&self, name: &str) -> Result<Arc<Dataset>, ApiError> {
        self.datasets
            .get(name)
            .cloned()
            .ok_or_else(|| ApiError::UnknownCorpus(name.to_string()))
    }

    fn session(&self, id: &str) -> Result<SessionHandle, ApiError> {
        self.sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()).into())
    }

    fn append(&self, id: &str, event: &SessionEvent) -> Result<(), ApiError> {
        let Some(dir) = &self.log_dir else {
            return Ok(());
        };
        let path = dir.join(format!("{id}.jsonl"));
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| internal(&path, e))?;
        let mut line = serde_json::to_vec(event).map_err(|e| ApiError::Internal(e.to_string()))?;
        line.push(b'\n');
        file.write_all(&line).map_err(|e| internal(&path, e))?;
        file.sync_data().map_err(|e| internal(&path, e))
    }
}

fn internal(path: &Path, e: std::io::Error) -> ApiError {
    ApiError::Internal(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, Deserialize)]
pub struct CreateSession {
    pub corpus: String,
    /// Any subset of the search configuration; missing fields take defaults.
    /// The number of clusters always follows the corpus's memberships.
    #[serde(default)]
    pub config: SearchConfig,
    #[serde(default)]
    pub seed_ids: Vec<String>,
    #[serde(default)]
    pub seed_query: Option<String>,
}

/// A label is `true`/`false` or `1`/`0`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum LabelValue {
    Bool(bool),
    Int(u8),
}

#[derive(Debug, Clone, Deserialize)]
pub struct SubmitLabels {
    pub labels: BTreeMap<String, LabelValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingDocument {
    pub id: String,
    pub text: String,
    pub pi: f64,
    pub arm_score: Option<f64>,
}

/// Session snapshot with the pending batch's texts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub corpus: String,
    pub status: SessionStatus,
    pub seeds: usize,
    pub reviewed: usize,
    pub relevant_found: usize,
    pub batch_size: usize,
    pub round: usize,
    pub pool_size: usize,
    pub budget_reviews: usize,
    pub arms: Vec<highrecall_core::ArmPosterior>,
    pub found_curve: Vec<(usize, usize)>,
    pub pending: Vec<PendingDocument>,
}

impl SessionView {
    fn new(snapshot: SessionSnapshot, corpus: &Corpus) -> Self {
        Self {
            pending: snapshot
                .pending
                .into_iter()
                .map(|p| PendingDocument {
                    text: corpus.get(&p.id).map(|d| d.text.clone()).unwrap_or_default(),
                    id: p.id,
                    pi: p.pi,
                    arm_score: p.arm_score,
                })
                .collect(),
            session_id: snapshot.session_id,
            corpus: snapshot.corpus,
            status: snapshot.status,
            seeds: snapshot.seeds,
            reviewed: snapshot.reviewed,
            relevant_found: snapshot.relevant_found,
            batch_size: snapshot.batch_size,
            round: snapshot.round,
            pool_size: snapshot.pool_size,
            budget_reviews: snapshot.budget_reviews,
            arms: snapshot.arms,
            found_curve: snapshot.found_curve,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryView {
    pub session_id: String,
    pub status: SessionStatus,
    pub trajectory: Trajectory,
}

#[derive(Debug, Deserialize)]
struct TrajectoryQuery {
    format: Option<String>,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/labels", post(submit_labels))
        .route("/sessions/{id}/trajectory", get(get_trajectory))
        .with_state(state)
}

/// Serves `router(state)` on `addr` until the process ends.
pub async fn serve(addr: std::net::SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

fn view(session: &Session, state: &AppState) -> Result<SessionView, ApiError> {
    let data = state.dataset(session.corpus())?;
    Ok(SessionView::new(session.snapshot(), &data.corpus))
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    payload: Result<Json<CreateSession>, axum::extract::rejection::JsonRejection>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let Json(req) = payload.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let data = state.dataset(&req.corpus)?;
    let unknown: Vec<String> = req
        .seed_ids
        .iter()
        .filter(|id| data.corpus.get(id).is_none())
        .cloned()
        .collect();
    if !unknown.is_empty() {
        return Err(ApiError::BadRequest(format!("unknown seed ids {unknown:?}")));
    }
    let mut config = req.config;
    config.clusters = data.memberships.k();
    let id = format!("s{:06}", state.next_id.fetch_add(1, Ordering::SeqCst));
    let st = state.clone();
    let session = tokio::task::spawn_blocking(move || {
        Session::create(
            id,
            req.corpus,
            data.matrix.clone(),
            data.memberships.clone(),
            config,
            req.seed_ids,
            req.seed_query,
        )
        .map_err(ApiError::from)
        .and_then(|s| {
            st.append(s.id(), s.last_event())?;
            Ok(s)
        })
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    let body = view(&session, &state)?;
    tracing::info!(session = session.id(), "created");
    state
        .sessions
        .lock()
        .unwrap()
        .insert(session.id().to_string(), Slot::new(session, body.clone()));
    Ok((StatusCode::CREATED, Json(body)))
}

async fn get_session(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<SessionView>, ApiError> {
    let handle = state.session(&id)?;
    let view = handle.view.lock().unwrap().clone();
    Ok(Json(view))
}

async fn submit_labels(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    payload: Result<Json<SubmitLabels>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<SessionView>, ApiError> {
    let Json(req) = payload.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let mut labels = BTreeMap::new();
    for (doc, value) in req.labels {
        let relevant = match value {
            LabelValue::Bool(b) => b,
            LabelValue::Int(0) => false,
            LabelValue::Int(1) => true,
            LabelValue::Int(other) => {
                return Err(ApiError::BadRequest(format!("label for `{doc}` must be 0 or 1, got {other}")))
            }
        };
        labels.insert(doc, relevant);
    }
    let handle = state.session(&id)?;
    let st = state.clone();
    tokio::task::spawn_blocking(move || {
        let mut session = lock(&handle)?;
        handle.view.lock().unwrap().status = SessionStatus::Computing;
        let events_before = session.events().len();
        let outcome = session.submit_labels(&labels).map_err(ApiError::from).and_then(|()| {
            if session.events().len() > events_before {
                st.append(session.id(), session.last_event())?;
            }
            Ok(())
        });
        let fresh = view(&session, &st)?;
        *handle.view.lock().unwrap() = fresh.clone();
        outcome.map(|()| fresh)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?
    .map(Json)
}

async fn get_trajectory(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(query): Query<TrajectoryQuery>,
) -> Result<Response, ApiError> {
    let handle = state.session(&id)?;
    let session = lock(&handle)?;
    match query.format.as_deref() {
        Some("tsv") => {
            let mut buf = Vec::new();
            session
                .trajectory()
                .write_tsv(&mut buf)
                .map_err(|e| ApiError::Internal(e.to_string()))?;
            Ok(([(header::CONTENT_TYPE, "text/tab-separated-values")], buf).into_response())
        }
        None | Some("json") => Ok(Json(TrajectoryView {
            session_id: session.id().to_string(),
            status: session.status(),
            trajectory: session.trajectory().clone(),
        })
        .into_response()),
        Some(other) => Err(ApiError::BadRequest(format!("unknown format `{other}`"))),
    }
}

/// Mutating requests on one session are serialised: a second one while the
/// first is computing is rejected instead of queued.
fn lock(handle: &SessionHandle) -> Result<std::sync::MutexGuard<'_, Session>, ApiError> {
    match handle.session.try_lock() {
        Ok(guard) => Ok(guard),
        Err(TryLockError::WouldBlock) => Err(SessionError::Busy.into()),
        Err(TryLockError::Poisoned(_)) => Err(ApiError::Internal("session state poisoned".into())),
    }
}
