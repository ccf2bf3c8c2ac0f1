//! HTTP façade: classify an uploaded EDF recording with a loaded checkpoint
//! and run random searches through a one-at-a-time job queue.
//!
//! | method | path                           | body / query                |
//! |--------|--------------------------------|-----------------------------|
//! | POST   | `/v1/classify?run=N`           | raw EDF bytes               |
//! | POST   | `/v1/search`                   | [`SearchRequest`] JSON      |
//! | GET    | `/v1/search/{id}`              | -> [`JobStatus`]            |
//! | GET    | `/v1/search/{id}/leaderboard`  | `?k=5` -> leaderboard rows  |
//! | GET    | `/v1/healthz`                  |                             |

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::mpsc;

use crate::dataset::{classify_run, segment_trials, RawRecording, TaskKind, TrialClass, NUM_CHANNELS, SAMPLE_RATE};
use crate::edf::{parse_edf, EdfError};
use crate::hyperopt::{
    leaderboard, run_search, Ledger, LedgerHeader, LeaderboardRow, SearchControl, SearchOptions, SearchSpace,
    TrialRecord,
};
use crate::nn::{predict_proba, Dataset, Model, TrainSettings};
use crate::pipeline::FEATURE_SHAPE;
use crate::preprocess::build_tensors;

pub const DEFAULT_BODY_LIMIT: usize = 64 * 1024 * 1024;
const QUEUE_DEPTH: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPrediction {
    pub index: usize,
    pub onset: f64,
    pub event_label: String,
    pub predicted: TrialClass,
    /// `[real, imagined]`, summing to 1.
    pub probabilities: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub model_id: String,
    pub run: u8,
    pub trials: Vec<TrialPrediction>,
    pub real: usize,
    pub imagined: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum ClassifyError {
    #[error("{source}")]
    Edf {
        #[from]
        source: EdfError,
    },
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Unprocessable(String),
}

impl ClassifyError {
    pub fn status(&self) -> StatusCode {
        match self {
            ClassifyError::Edf { .. } | ClassifyError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ClassifyError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
        }
    }
}

/// Parse, validate, segment, featurize and score one recording.
pub fn classify_edf(model: &Model, model_id: &str, bytes: &[u8], run: u8) -> Result<ClassificationReport, ClassifyError> {
    let task = classify_run(run).map_err(|e| ClassifyError::BadRequest(e.to_string()))?;
    let file = parse_edf(bytes)?;
    if task == TaskKind::Baseline {
        return Err(ClassifyError::Unprocessable(format!("run {run} is a baseline run without movement events")));
    }
    let rec = RawRecording::from_edf(file, "upload", run).map_err(|e| ClassifyError::Unprocessable(e.to_string()))?;
    if rec.fs != SAMPLE_RATE || rec.samples.nrows() != NUM_CHANNELS {
        return Err(ClassifyError::Unprocessable(format!(
            "expected {NUM_CHANNELS} channels at {SAMPLE_RATE} Hz, got {} at {} Hz",
            rec.samples.nrows(),
            rec.fs
        )));
    }
    let trials = segment_trials(&rec);
    if trials.is_empty() {
        return Err(ClassifyError::Unprocessable("recording has no complete T1/T2 events".into()));
    }
    let tensors = build_tensors(&trials)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| ClassifyError::Unprocessable(e.to_string()))?;
    let mut inputs = Vec::with_capacity(tensors.len() * FEATURE_SHAPE.size());
    for t in &tensors {
        inputs.extend(t.to_f32());
    }
    let labels = vec![0; tensors.len()];
    let data = Dataset::new(FEATURE_SHAPE, inputs, labels).map_err(|e| ClassifyError::Unprocessable(e.to_string()))?;
    let probs = predict_proba(model, &data).map_err(|e| ClassifyError::Unprocessable(e.to_string()))?;
    let predictions: Vec<TrialPrediction> = trials
        .iter()
        .zip(probs)
        .enumerate()
        .map(|(index, (t, p))| TrialPrediction {
            index,
            onset: t.onset,
            event_label: t.event_label.clone(),
            predicted: if p[1] > p[0] { TrialClass::Imagined } else { TrialClass::Real },
            probabilities: p,
        })
        .collect();
    let imagined = predictions.iter().filter(|p| p.predicted == TrialClass::Imagined).count();
    Ok(ClassificationReport { model_id: model_id.to_string(), run, real: predictions.len() - imagined, imagined, trials: predictions })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub job_id: String,
    pub state: JobState,
    pub completed: usize,
    pub budget: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SearchRequest {
    pub id: String,
    #[serde(default)]
    pub space: Option<SearchSpace>,
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
}

/// Training data and settings used by submitted searches.
#[derive(Clone)]
pub struct SearchBackend {
    pub train: Arc<Dataset>,
    pub val: Arc<Dataset>,
    pub train_settings: TrainSettings,
    pub max_parameters: Option<usize>,
    /// Ledgers are written as `<ledger_dir>/<job id>.ndjson`.
    pub ledger_dir: PathBuf,
}

struct Job {
    status: JobStatus,
    ledger: Ledger,
}

#[derive(Clone)]
pub struct AppState {
    model: Option<Arc<Model>>,
    model_id: String,
    jobs: Arc<Mutex<HashMap<String, Job>>>,
    queue: Option<mpsc::Sender<(SearchRequest, SearchSpace)>>,
}

#[derive(Default)]
pub struct ServiceConfig {
    pub model: Option<Model>,
    pub model_id: String,
    pub search: Option<SearchBackend>,
    pub body_limit: Option<usize>,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({ "error": message.into() }))).into_response()
}

fn valid_job_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

async fn healthz(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(serde_json::json!({
        "status": "ok",
        "model_id": state.model.as_ref().map(|_| state.model_id.clone()),
        "search": state.queue.is_some(),
    }))
}

#[derive(Deserialize)]
struct ClassifyParams {
    run: u8,
}

async fn classify(State(state): State<AppState>, Query(params): Query<ClassifyParams>, body: Bytes) -> Response {
    let Some(model) = state.model.clone() else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "no model loaded");
    };
    let model_id = state.model_id.clone();
    let result = tokio::task::spawn_blocking(move || classify_edf(&model, &model_id, &body, params.run)).await;
    match result {
        Ok(Ok(report)) => Json(report).into_response(),
        Ok(Err(e)) => error(e.status(), e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn submit_search(State(state): State<AppState>, Json(req): Json<SearchRequest>) -> Response {
    let Some(queue) = state.queue.clone() else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "no feature cache loaded; searches are disabled");
    };
    if !valid_job_id(&req.id) {
        return error(StatusCode::BAD_REQUEST, "job id must be 1-64 characters of [A-Za-z0-9_-]");
    }
    if req.budget == 0 {
        return error(StatusCode::BAD_REQUEST, "budget must be at least 1");
    }
    let space = req.space.clone().unwrap_or_default();
    if let Err(e) = space.validate() {
        return error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string());
    }
    let status = JobStatus { job_id: req.id.clone(), state: JobState::Queued, completed: 0, budget: req.budget, error: None };
    {
        let mut jobs = state.jobs.lock().expect("job table");
        if jobs.contains_key(&req.id) {
            return error(StatusCode::CONFLICT, format!("job {} already exists", req.id));
        }
        let header = LedgerHeader {
            search_id: req.id.clone(),
            base_seed: req.seed,
            space: space.clone(),
            settings: serde_json::Value::Null,
        };
        jobs.insert(req.id.clone(), Job { status: status.clone(), ledger: Ledger::new(header) });
    }
    if queue.try_send((req.clone(), space)).is_err() {
        state.jobs.lock().expect("job table").remove(&req.id);
        return error(StatusCode::SERVICE_UNAVAILABLE, "search queue is full");
    }
    (StatusCode::ACCEPTED, Json(status)).into_response()
}

async fn job_status(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    match state.jobs.lock().expect("job table").get(&id) {
        Some(job) => Json(job.status.clone()).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("unknown job {id}")),
    }
}

#[derive(Deserialize)]
struct LeaderboardParams {
    #[serde(default = "default_k")]
    k: usize,
}

fn default_k() -> usize {
    5
}

async fn job_leaderboard(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(params): Query<LeaderboardParams>,
) -> Response {
    let jobs = state.jobs.lock().expect("job table");
    let Some(job) = jobs.get(&id) else {
        return error(StatusCode::NOT_FOUND, format!("unknown job {id}"));
    };
    let rows: Vec<LeaderboardRow> = leaderboard(&job.ledger, params.k).unwrap_or_default();
    Json(rows).into_response()
}

fn update_job(jobs: &Mutex<HashMap<String, Job>>, id: &str, f: impl FnOnce(&mut Job)) {
    if let Some(job) = jobs.lock().expect("job table").get_mut(id) {
        f(job);
    }
}

fn run_job(backend: &SearchBackend, jobs: &Arc<Mutex<HashMap<String, Job>>>, req: SearchRequest, space: SearchSpace) {
    update_job(jobs, &req.id, |j| j.status.state = JobState::Running);
    let options = SearchOptions {
        train: backend.train_settings,
        max_parameters: backend.max_parameters,
        ..SearchOptions::new(req.id.clone(), req.seed, req.budget)
    };
    let path = backend.ledger_dir.join(format!("{}.ndjson", req.id));
    let table = Arc::clone(jobs);
    let id = req.id.clone();
    let mut on_record = move |r: &TrialRecord| {
        update_job(&table, &id, |j| {
            j.ledger.records.push(r.clone());
            j.status.completed = j.ledger.records.len();
        });
    };
    let control = SearchControl { cancel: None, on_record: Some(&mut on_record) };
    let result = std::fs::create_dir_all(&backend.ledger_dir)
        .map_err(|e| e.to_string())
        .and_then(|_| run_search(&space, &backend.train, &backend.val, &options, &path, control).map_err(|e| e.to_string()));
    update_job(jobs, &req.id, |j| match result {
        Ok(ledger) => {
            j.status.completed = ledger.records.len();
            j.status.state = JobState::Done;
            j.ledger = ledger;
        }
        Err(e) => {
            j.status.state = JobState::Failed;
            j.status.error = Some(e);
        }
    });
}

/// Builds the router. Must be called inside a tokio runtime when a search
/// backend is configured, since the job worker is spawned here.
pub fn router(config: ServiceConfig) -> Router {
    let jobs: Arc<Mutex<HashMap<String, Job>>> = Arc::default();
    let queue = config.search.map(|backend| {
        let (tx, mut rx) = mpsc::channel::<(SearchRequest, SearchSpace)>(QUEUE_DEPTH);
        let table = Arc::clone(&jobs);
        tokio::spawn(async move {
            while let Some((req, space)) = rx.recv().await {
                let backend = backend.clone();
                let table = Arc::clone(&table);
                let _ = tokio::task::spawn_blocking(move || run_job(&backend, &table, req, space)).await;
            }
        });
        tx
    });
    let state = AppState { model: config.model.map(Arc::new), model_id: config.model_id, jobs, queue };
    Router::new()
        .route("/v1/healthz", get(healthz))
        .route("/v1/classify", post(classify))
        .route("/v1/search", post(submit_search))
        .route("/v1/search/{id}", get(job_status))
        .route("/v1/search/{id}/leaderboard", get(job_leaderboard))
        .layer(DefaultBodyLimit::max(config.body_limit.unwrap_or(DEFAULT_BODY_LIMIT)))
        .with_state(state)
}

/// Serves until the process receives Ctrl-C.
pub async fn serve(listener: tokio::net::TcpListener, config: ServiceConfig) -> std::io::Result<()> {
    axum::serve(listener, router(config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
