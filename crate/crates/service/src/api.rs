use std::path::PathBuf;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use cobs_core::evaluation::evaluate_selected;
use cobs_core::{ConstraintKind, LabelColumn, Pair, Provenance};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::error::{ApiError, ApiResult};
use crate::state::{lock_session, now, AppState, DatasetEntry, DatasetMeta, OracleKind, SessionEntry, StartSession, Status};

/// Number of clusterings listed after each answer.
const LEADERBOARD: usize = 5;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/datasets", post(create_dataset))
        .route("/datasets/{id}", get(get_dataset))
        .route("/sessions", post(start_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/query", get(next_query))
        .route("/sessions/{id}/answer", post(answer))
        .route("/sessions/{id}/result", get(result))
        .with_state(state)
}

/// [`router`] plus a static bundle under `/ui`.
pub fn router_with_ui(state: AppState, ui: Option<PathBuf>) -> Router {
    let app = router(state);
    match ui {
        Some(dir) => app.nest_service("/ui", ServeDir::new(dir)),
        None => app,
    }
}

#[derive(Debug, Deserialize)]
pub struct UploadParams {
    label_col: Option<String>,
    header: Option<bool>,
    name: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub id: String,
    pub name: String,
    pub n: usize,
    pub f: usize,
    pub classes: Option<usize>,
    pub feature_names: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetView {
    #[serde(flatten)]
    pub summary: DatasetSummary,
    pub class_names: Vec<String>,
    pub projection: Vec<[f64; 2]>,
}

fn summary(e: &DatasetEntry) -> DatasetSummary {
    let d = &e.dataset;
    DatasetSummary {
        id: e.id.clone(),
        name: d.name().to_string(),
        n: d.len(),
        f: d.n_features(),
        classes: d.labels().map(|_| d.n_classes()),
        feature_names: d.feature_names().to_vec(),
    }
}

async fn create_dataset(
    State(state): State<AppState>,
    Query(params): Query<UploadParams>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<DatasetSummary>)> {
    let meta = DatasetMeta {
        label: params.label_col.map(|s| s.parse::<LabelColumn>().expect("infallible")),
        header: params.header,
        name: params.name,
    };
    let entry = tokio::task::spawn_blocking(move || state.add_dataset(&body, meta))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok((StatusCode::CREATED, Json(summary(&entry))))
}

async fn get_dataset(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<DatasetView>> {
    let e = state.dataset(&id)?;
    Ok(Json(DatasetView {
        summary: summary(&e),
        class_names: e.dataset.class_names().to_vec(),
        projection: e.projection.clone(),
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Progress {
    pub used: usize,
    pub budget: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub dataset_id: String,
    pub ensemble_id: String,
    pub status: Status,
    pub oracle: OracleKind,
    pub progress: Progress,
    pub ensemble_size: Option<usize>,
    pub pool_size: Option<usize>,
    pub m: f64,
    pub error: Option<String>,
    pub created: u64,
    pub updated: u64,
}

fn record(s: &SessionEntry) -> SessionRecord {
    let (ensemble_size, pool_size, used, error) = match &s.phase {
        crate::state::Phase::Ready(a) => (Some(a.ensemble().len()), Some(a.pool().len()), a.used(), None),
        crate::state::Phase::Generating => (None, None, s.file.answers.len(), None),
        crate::state::Phase::Failed(m) => (None, None, s.file.answers.len(), Some(m.clone())),
    };
    SessionRecord {
        id: s.file.id.clone(),
        dataset_id: s.file.dataset_id.clone(),
        ensemble_id: s.file.ensemble_id.clone(),
        status: s.status(),
        oracle: s.file.oracle,
        progress: Progress {
            used,
            budget: s.file.config.budget,
        },
        ensemble_size,
        pool_size,
        m: s.file.config.m,
        error,
        created: s.file.created,
        updated: s.file.updated,
    }
}

async fn start_session(
    State(state): State<AppState>,
    Json(req): Json<StartSession>,
) -> ApiResult<(StatusCode, Json<SessionRecord>)> {
    let s = tokio::task::spawn_blocking(move || state.start_session(req))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    let rec = record(&lock_session(&s));
    Ok((StatusCode::CREATED, Json(rec)))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionRecord>> {
    let s = state.session(&id)?;
    let rec = record(&lock_session(&s));
    Ok(Json(rec))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct InstanceView {
    pub index: usize,
    /// Feature values as uploaded.
    pub values: Vec<f64>,
    pub normalized: Vec<f64>,
    pub projection: [f64; 2],
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QueryView {
    pub pair: [usize; 2],
    pub feature_names: Vec<String>,
    pub instances: [InstanceView; 2],
    pub progress: Progress,
}

fn instance(e: &DatasetEntry, i: usize) -> InstanceView {
    InstanceView {
        index: i,
        values: e.dataset.raw_row(i).to_vec(),
        normalized: e.dataset.row(i).to_vec(),
        projection: e.projection[i],
    }
}

fn result_link(id: &str) -> String {
    format!("/sessions/{id}/result")
}

async fn next_query(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<QueryView>> {
    let s = state.session(&id)?;
    let mut guard = lock_session(&s);
    let dataset = state.dataset(&guard.file.dataset_id)?;
    let session = guard.ready()?;
    let pair = match session.next_query() {
        Ok(p) => p,
        Err(e @ (cobs_core::Error::BudgetExhausted | cobs_core::Error::PoolExhausted)) => {
            return Err(ApiError::Gone {
                message: e.to_string(),
                result: result_link(&id),
            })
        }
        Err(e) => return Err(e.into()),
    };
    let progress = Progress {
        used: session.used(),
        budget: session.budget(),
    };
    Ok(Json(QueryView {
        pair: [pair.i, pair.j],
        feature_names: dataset.dataset.feature_names().to_vec(),
        instances: [instance(&dataset, pair.i), instance(&dataset, pair.j)],
        progress,
    }))
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct AnswerRequest {
    /// Left out with the label oracle to answer from the class labels.
    #[serde(default)]
    pub kind: Option<ConstraintKind>,
    /// When given, must match the pending query.
    #[serde(default)]
    pub pair: Option<[usize; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Ranked {
    pub index: usize,
    pub provenance: Provenance,
    /// Share of the total weight.
    pub weight: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnswerView {
    pub pair: [usize; 2],
    pub kind: ConstraintKind,
    pub status: Status,
    pub progress: Progress,
    pub top: Vec<Ranked>,
}

async fn answer(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<AnswerView>> {
    let req: AnswerRequest = if body.iter().all(|b| b.is_ascii_whitespace()) {
        AnswerRequest::default()
    } else {
        serde_json::from_slice::<Option<AnswerRequest>>(&body)
            .map_err(|e| ApiError::BadRequest(format!("invalid answer: {e}")))?
            .unwrap_or_default()
    };
    let s = state.session(&id)?;
    let mut guard = lock_session(&s);
    let dataset = state.dataset(&guard.file.dataset_id)?;
    let oracle = guard.file.oracle;
    let session = guard.ready()?;
    let pending = session
        .pending()
        .ok_or_else(|| ApiError::Conflict("no query is pending".into()))?;
    if let Some([i, j]) = req.pair {
        if Pair::new(i, j).ok() != Some(pending) {
            return Err(ApiError::Conflict(format!("pending query is {pending}, not ({i}, {j})")));
        }
    }
    let kind = match (req.kind, oracle) {
        (Some(k), _) => k,
        (None, OracleKind::Labels) => {
            let labels = dataset.dataset.labels().expect("label sessions need labels");
            ConstraintKind::from_same(labels[pending.i] == labels[pending.j])
        }
        (None, OracleKind::Interactive) => {
            return Err(ApiError::BadRequest("answer kind is required".into()));
        }
    };
    session.update(pending, kind)?;
    let total: f64 = session.weights().iter().sum();
    let top = session
        .top(LEADERBOARD)
        .into_iter()
        .map(|i| Ranked {
            index: i,
            provenance: session.ensemble().clusterings[i].provenance.clone(),
            weight: session.weights()[i] / total,
        })
        .collect();
    let progress = Progress {
        used: session.used(),
        budget: session.budget(),
    };
    let answers = session.answers();
    guard.file.answers = answers;
    guard.file.updated = now();
    state.save_session(&guard.file)?;
    Ok(Json(AnswerView {
        pair: [pending.i, pending.j],
        kind,
        status: guard.status(),
        progress,
        top,
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResultView {
    pub index: usize,
    pub provenance: Provenance,
    pub assignment: Vec<i32>,
    pub cluster_sizes: Vec<usize>,
    pub n_noise: usize,
    pub progress: Progress,
    /// No answers yet; the selection is a seeded pick among equal weights.
    pub no_constraints: bool,
    /// Agreement with the class labels on instances outside the answered pairs.
    pub ari: Option<f64>,
}

async fn result(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<ResultView>> {
    let s = state.session(&id)?;
    let mut guard = lock_session(&s);
    let dataset = state.dataset(&guard.file.dataset_id)?;
    let session = guard.ready()?;
    let index = session.result();
    let c = &session.ensemble().clusterings[index];
    let ari = dataset
        .dataset
        .labels()
        .and_then(|_| evaluate_selected(c, &dataset.dataset, session.queried()).ok());
    Ok(Json(ResultView {
        index,
        provenance: c.provenance.clone(),
        assignment: c.assignment.clone(),
        cluster_sizes: c.cluster_sizes(),
        n_noise: c.n_noise(),
        progress: Progress {
            used: session.used(),
            budget: session.budget(),
        },
        no_constraints: session.used() == 0,
        ari,
    }))
}
