use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use highrecall_core::cluster::soft_cluster;
use highrecall_core::corpus::{build_vocabulary, vectorize};
use highrecall_core::search::synthetic::{generate_synthetic, RELEVANT_TOPIC};
use highrecall_core::search::{run_search, DatasetOracle};
use highrecall_core::session::SessionStatus;
use highrecall_core::{Corpus, SearchConfig, SeedSet, Strategy, Trajectory};
use highrecall_service::{router, AppState, Dataset, SessionView, TrajectoryView};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn dataset() -> Dataset {
    let corpus = Corpus::new(generate_synthetic(2, 300, 0.05, 8).docs).unwrap();
    let vocab = build_vocabulary(corpus.docs(), 3).unwrap();
    let matrix = Arc::new(vectorize(corpus.docs(), &vocab));
    let memberships = Arc::new(soft_cluster(&matrix, 4, 0.1, 8).unwrap());
    Dataset {
        corpus,
        matrix,
        memberships,
    }
}

fn state() -> AppState {
    AppState::new(HashMap::from([("synth".to_string(), dataset())]))
}

fn seeds(data: &Dataset) -> Vec<String> {
    data.corpus
        .docs()
        .iter()
        .filter(|d| d.is_relevant(RELEVANT_TOPIC))
        .take(3)
        .map(|d| d.id.clone())
        .collect()
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let request = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(b) => request
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => request.body(Body::empty()),
    }
    .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, bytes.to_vec())
}

async fn json_call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn create(app: &Router, body: Value) -> SessionView {
    let (status, v) = json_call(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    serde_json::from_value(v).unwrap()
}

fn all_labels(view: &SessionView, value: u8) -> Value {
    let map: serde_json::Map<String, Value> =
        view.pending.iter().map(|p| (p.id.clone(), json!(value))).collect();
    json!({ "labels": map })
}

#[tokio::test]
async fn first_batch_grows_after_labelling() {
    let data = dataset();
    let app = router(Arc::new(state()));
    let view = create(&app, json!({ "corpus": "synth", "seed_ids": seeds(&data) })).await;
    assert_eq!(view.pending.len(), 1);
    assert_eq!((view.reviewed, view.relevant_found, view.seeds), (0, 0, 3));
    assert_eq!(view.status, SessionStatus::AwaitingLabels);
    assert_eq!(view.arms.len(), 4);
    assert!(!view.pending[0].text.is_empty());

    let uri = format!("/sessions/{}/labels", view.session_id);
    let (status, next) = json_call(&app, "POST", &uri, Some(all_labels(&view, 0))).await;
    assert_eq!(status, StatusCode::OK);
    let next: SessionView = serde_json::from_value(next).unwrap();
    assert_eq!(next.pending.len(), 2);
    assert_eq!(next.reviewed, 1);

    let (status, got) = json_call(&app, "GET", &format!("/sessions/{}", view.session_id), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(serde_json::from_value::<SessionView>(got).unwrap(), next);
}

#[tokio::test]
async fn relevant_label_raises_its_arm() {
    let data = dataset();
    let app = router(Arc::new(state()));
    let view = create(&app, json!({ "corpus": "synth", "seed_ids": seeds(&data) })).await;
    let doc = &view.pending[0].id;
    let row = data.matrix.row_of(doc).unwrap();
    let arm = data.memberships.argmax(row);
    let uri = format!("/sessions/{}/labels", view.session_id);
    let (_, next) = json_call(&app, "POST", &uri, Some(all_labels(&view, 1))).await;
    let next: SessionView = serde_json::from_value(next).unwrap();
    assert!(next.arms[arm].s > view.arms[arm].s);
    assert_eq!(next.relevant_found, 1);
}

#[tokio::test]
async fn client_errors() {
    let data = dataset();
    let app = router(Arc::new(state()));
    let view = create(&app, json!({ "corpus": "synth", "seed_ids": seeds(&data) })).await;
    let uri = format!("/sessions/{}/labels", view.session_id);

    let (status, body) = json_call(&app, "POST", &uri, Some(json!({ "labels": { "nope": 1 } }))).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("unknown_ids")));

    let (status, body) = json_call(&app, "POST", &uri, Some(json!({ "labels": {} }))).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("partial_labels")));
    assert_eq!(body["ids"][0].as_str(), Some(view.pending[0].id.as_str()));

    let bad = json!({ "labels": { view.pending[0].id.clone(): 2 } });
    let (status, _) = json_call(&app, "POST", &uri, Some(bad)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, body) = json_call(&app, "GET", "/sessions/s999999", None).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::NOT_FOUND, Some("unknown_session")));

    let (status, body) = json_call(&app, "POST", "/sessions", Some(json!({ "corpus": "other" }))).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::NOT_FOUND, Some("unknown_corpus")));

    let (status, body) = json_call(
        &app,
        "POST",
        "/sessions",
        Some(json!({ "corpus": "synth", "seed_query": "qqqq zzzz" })),
    )
    .await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("no_seeds")));

    let (status, _) = call(&app, "POST", "/sessions", Some(json!({ "seed_ids": 3 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    // nothing above advanced the session
    let (_, now) = json_call(&app, "GET", &format!("/sessions/{}", view.session_id), None).await;
    assert_eq!(serde_json::from_value::<SessionView>(now).unwrap(), view);
}

#[tokio::test]
async fn resubmitting_the_same_labels_is_harmless() {
    let data = dataset();
    let app = router(Arc::new(state()));
    let view = create(&app, json!({ "corpus": "synth", "seed_ids": seeds(&data) })).await;
    let uri = format!("/sessions/{}/labels", view.session_id);
    let labels = all_labels(&view, 0);
    let (_, first) = json_call(&app, "POST", &uri, Some(labels.clone())).await;
    let (status, second) = json_call(&app, "POST", &uri, Some(labels)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(first, second);
}

#[tokio::test]
async fn sessions_on_one_corpus_are_independent() {
    let data = dataset();
    let app = router(Arc::new(state()));
    let body = json!({ "corpus": "synth", "seed_ids": seeds(&data) });
    let a = create(&app, body.clone()).await;
    let b = create(&app, body).await;
    assert_ne!(a.session_id, b.session_id);
    let uri = format!("/sessions/{}/labels", a.session_id);
    json_call(&app, "POST", &uri, Some(all_labels(&a, 1))).await;
    let (_, b_now) = json_call(&app, "GET", &format!("/sessions/{}", b.session_id), None).await;
    assert_eq!(serde_json::from_value::<SessionView>(b_now).unwrap(), b);
}

/// Answers every batch from ground truth until the session finishes.
async fn drive(app: &Router, data: &Dataset, mut view: SessionView) -> SessionView {
    let uri = format!("/sessions/{}/labels", view.session_id);
    while view.status != SessionStatus::Finished {
        let map: serde_json::Map<String, Value> = view
            .pending
            .iter()
            .map(|p| {
                let relevant = data.corpus.get(&p.id).unwrap().is_relevant(RELEVANT_TOPIC);
                (p.id.clone(), json!(u8::from(relevant)))
            })
            .collect();
        let (status, next) = json_call(app, "POST", &uri, Some(json!({ "labels": map }))).await;
        assert_eq!(status, StatusCode::OK, "{next}");
        view = serde_json::from_value(next).unwrap();
    }
    view
}

#[tokio::test]
async fn scripted_reviewer_reproduces_simulation() {
    let data = dataset();
    let app = router(Arc::new(state()));
    let config = SearchConfig {
        clusters: 4,
        budget: 0.3,
        seed: 42,
        strategy: Strategy::Mab,
        ..SearchConfig::default()
    };
    let view = create(
        &app,
        json!({ "corpus": "synth", "seed_ids": seeds(&data), "config": config }),
    )
    .await;
    let done = drive(&app, &data, view).await;
    assert!(done.pending.is_empty());

    let (status, body) = json_call(&app, "GET", &format!("/sessions/{}/trajectory", done.session_id), None).await;
    assert_eq!(status, StatusCode::OK);
    let served: TrajectoryView = serde_json::from_value(body).unwrap();
    assert_eq!(served.status, SessionStatus::Finished);

    let mut oracle = DatasetOracle::new(&data.corpus, RELEVANT_TOPIC);
    let simulated = run_search(
        data.matrix.clone(),
        data.memberships.clone(),
        &mut oracle,
        config,
        &SeedSet::relevant(seeds(&data)),
    )
    .unwrap()
    .into_trajectory();
    assert_eq!(served.trajectory, simulated);

    let (status, tsv) = call(&app, "GET", &format!("/sessions/{}/trajectory?format=tsv", done.session_id), None).await;
    assert_eq!(status, StatusCode::OK);
    let mut expected = Vec::new();
    simulated.write_tsv(&mut expected).unwrap();
    assert_eq!(tsv, expected);
    assert_eq!(Trajectory::read_tsv(tsv.as_slice()).unwrap().len(), simulated.len());

    let (status, body) = json_call(
        &app,
        "POST",
        &format!("/sessions/{}/labels", done.session_id),
        Some(json!({ "labels": { "doc00000": 1 } })),
    )
    .await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::CONFLICT, Some("session_finished")));
}

#[tokio::test]
async fn sessions_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset();
    let app = router(Arc::new(state().with_log_dir(dir.path()).unwrap()));
    let view = create(&app, json!({ "corpus": "synth", "seed_ids": seeds(&data), "config": { "seed": 5 } })).await;
    let uri = format!("/sessions/{}/labels", view.session_id);
    let (_, after_one) = json_call(&app, "POST", &uri, Some(all_labels(&view, 0))).await;
    let after_one: SessionView = serde_json::from_value(after_one).unwrap();
    let (_, after_two) = json_call(&app, "POST", &uri, Some(all_labels(&after_one, 1))).await;
    drop(app);

    let restarted = router(Arc::new(state().with_log_dir(dir.path()).unwrap()));
    let (status, restored) = json_call(&restarted, "GET", &format!("/sessions/{}", view.session_id), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(restored, after_two);

    let other = create(&restarted, json!({ "corpus": "synth", "seed_ids": seeds(&data) })).await;
    assert_ne!(other.session_id, view.session_id);
}
