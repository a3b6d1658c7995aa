//! HTTP session service for the annotate, optimize, adjust and rerun loop.
//!
//! Every session is a workbench bundle under `<data-dir>/sessions/<id>/`.
//! A run holds the session in `Optimizing` until it finishes, and every
//! mutating endpoint answers 409 meanwhile, so the optimizer always sees a
//! frozen bundle.

pub mod store;

use std::sync::atomic::Ordering;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use basecamp_core::annotate::{AvoidanceRegion, InteractionZone, SearchSpace};
use basecamp_core::cloudio::parse_ply;
use basecamp_core::geom::Vec3;
use basecamp_core::optimizer::{adjust_search_space, Adjustment, OptimizeConfig, Seeds};
use basecamp_core::registry::Registry;
use basecamp_workbench::bundle;
use basecamp_workbench::commands::{annotate_document, optimize_bundle, OptimizeArgs};
use basecamp_workbench::WorkbenchError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use store::{Session, SessionRecord, SessionStatus, Store};

pub const DEFAULT_ROBOT: &str = "generic6r";
const MAX_BODY: usize = 1 << 30;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

/// Storage and I/O failures are the service's fault; anything else the
/// workbench rejects is a problem with the request's content.
impl From<WorkbenchError> for ServiceError {
    fn from(e: WorkbenchError) -> Self {
        match e {
            WorkbenchError::Write { .. } | WorkbenchError::Read { .. } | WorkbenchError::Json { .. } => {
                ServiceError::Internal(e.to_string())
            }
            WorkbenchError::Cloud(basecamp_core::cloudio::CloudError::Io { .. }) => ServiceError::Internal(e.to_string()),
            _ => ServiceError::Unprocessable(e.to_string()),
        }
    }
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status(), Json(ErrorBody { error: self.to_string() })).into_response()
    }
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    /// Worker cap for optimization runs (`BASECAMP_THREADS`).
    pub threads: Option<usize>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/cloud", put(upload_cloud))
        .route("/v1/sessions/{id}/annotations", put(put_annotations))
        .route("/v1/sessions/{id}/optimize", post(start_optimize))
        .route("/v1/sessions/{id}/result", get(get_result))
        .route("/v1/sessions/{id}/searchspace", axum::routing::patch(patch_search_space))
        .layer(DefaultBodyLimit::max(MAX_BODY))
        .with_state(state)
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(format!("worker failed: {e}")))?
}

/// 409 unless the session is in one of `allowed`.
fn require(record: &SessionRecord, allowed: &[SessionStatus], action: &str) -> Result<(), ServiceError> {
    if allowed.contains(&record.status) {
        return Ok(());
    }
    if record.status == SessionStatus::Optimizing {
        return Err(ServiceError::Conflict(format!("cannot {action}: an optimization run is active")));
    }
    Err(ServiceError::Conflict(format!(
        "cannot {action} while the session is {:?}",
        record.status
    )))
}

fn parse_body<T: for<'de> Deserialize<'de> + Default>(body: &[u8]) -> Result<T, ServiceError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ServiceError::Unprocessable(format!("invalid JSON body: {e}")))
}

async fn create_session(State(st): State<AppState>) -> Result<(StatusCode, Json<SessionRecord>), ServiceError> {
    let store = st.store.clone();
    let session = blocking(move || store.create()).await?;
    Ok((StatusCode::CREATED, Json(session.snapshot())))
}

async fn get_session(State(st): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionRecord>, ServiceError> {
    Ok(Json(st.store.get(&id)?.snapshot()))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CloudSummary {
    pub points: usize,
    pub bounds: Option<[Vec3; 2]>,
    /// Derived zones and regions were dropped because they referred to the
    /// previous cloud.
    pub invalidated: bool,
}

async fn upload_cloud(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<CloudSummary>, ServiceError> {
    let session = st.store.get(&id)?;
    blocking(move || {
        let mut rec = session.lock();
        require(&rec, &[SessionStatus::Annotating], "upload a cloud")?;
        let text = std::str::from_utf8(&body).map_err(|e| {
            ServiceError::Unprocessable(format!("PLY body is not ASCII text (byte {})", e.valid_up_to()))
        })?;
        let cloud = parse_ply(text).map_err(|e| ServiceError::Unprocessable(format!("malformed PLY: {e}")))?;
        let b = &session.bundle;
        b.save_cloud(&cloud)?;
        let mut invalidated = false;
        if b.has(bundle::ANNOTATIONS) {
            let mut doc = b.annotations()?;
            invalidated = !(doc.zones.is_empty() && doc.regions.is_empty());
            doc.zones.clear();
            doc.regions.clear();
            bundle::write_json(&b.path(bundle::ANNOTATIONS), &doc)?;
        }
        b.update_meta(|_| {})?;
        session.persist(&mut rec)?;
        Ok(Json(CloudSummary {
            points: cloud.len(),
            bounds: cloud.bounds().map(|(lo, hi)| [lo, hi]),
            invalidated,
        }))
    })
    .await
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DerivedGeometry {
    pub zones: Vec<InteractionZone>,
    pub regions: Vec<AvoidanceRegion>,
    pub searchspace: Option<SearchSpace>,
}

async fn put_annotations(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<DerivedGeometry>, ServiceError> {
    let session = st.store.get(&id)?;
    blocking(move || {
        let mut rec = session.lock();
        require(&rec, &[SessionStatus::Annotating], "change annotations")?;
        let b = &session.bundle;
        if !b.has(bundle::CLOUD) {
            return Err(ServiceError::Conflict("upload a cloud before annotating".into()));
        }
        let doc: basecamp_core::annotate::Annotations = serde_json::from_slice(&body)
            .map_err(|e| ServiceError::Unprocessable(format!("invalid annotations: {e}")))?;
        if let Some(space) = &doc.searchspace {
            space.validate().map_err(|e| ServiceError::Unprocessable(e.to_string()))?;
            b.save_search_space(space)?;
        }
        let doc = annotate_document(b, doc)?;
        let searchspace = if b.has(bundle::SEARCHSPACE) { Some(b.search_space()?) } else { None };
        session.persist(&mut rec)?;
        Ok(Json(DerivedGeometry {
            zones: doc.zones,
            regions: doc.regions,
            searchspace,
        }))
    })
    .await
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeRequest {
    /// Built-in robot name; defaults to [`DEFAULT_ROBOT`].
    pub robot: Option<String>,
    pub seeds: Option<Seeds>,
    pub threshold: Option<f64>,
    pub per_zone: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunAccepted {
    pub session_id: String,
    pub status: SessionStatus,
    pub max_evals: usize,
}

async fn start_optimize(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<(StatusCode, Json<RunAccepted>), ServiceError> {
    let session = st.store.get(&id)?;
    let req: OptimizeRequest = parse_body(&body)?;
    let threads = st.threads;
    let accepted = blocking(move || {
        let mut rec = session.lock();
        require(&rec, &[SessionStatus::Annotating], "start a run")?;
        let b = &session.bundle;
        if !b.has(bundle::SEARCHSPACE) {
            return Err(ServiceError::Conflict(
                "no search space; include one in the annotations before optimizing".into(),
            ));
        }
        if !b.has(bundle::ANNOTATIONS) || b.annotations()?.zones.is_empty() {
            return Err(ServiceError::Conflict("no derived interaction zones; PUT annotations first".into()));
        }
        let robot = req.robot.unwrap_or_else(|| DEFAULT_ROBOT.into());
        Registry::builtin().robot(&robot).map_err(|e| ServiceError::Unprocessable(e.to_string()))?;
        let mut config = OptimizeConfig {
            threads,
            ..OptimizeConfig::default()
        };
        if let Some(s) = req.seeds {
            config.seeds = s;
        }
        if let Some(t) = req.threshold {
            if !(t.is_finite() && (0.0..=100.0).contains(&t)) {
                return Err(ServiceError::Unprocessable(format!("threshold {t} outside [0, 100]")));
            }
            config.threshold = t;
        }
        if let Some(n) = req.per_zone {
            if n == 0 {
                return Err(ServiceError::Unprocessable("per_zone must be >= 1".into()));
            }
            config.per_zone = n;
        }
        let max_evals = config.search.global.max_evals;
        let _ = std::fs::remove_file(b.path(bundle::RESULT));
        session.evaluated.store(0, Ordering::Relaxed);
        session.max_evals.store(max_evals, Ordering::Relaxed);
        rec.status = SessionStatus::Optimizing;
        rec.progress = 0.0;
        rec.error = None;
        session.persist(&mut rec)?;
        let args = OptimizeArgs {
            robot: Some(robot),
            config,
        };
        let job = session.clone();
        tokio::task::spawn_blocking(move || run(&job, &args));
        Ok(RunAccepted {
            session_id: session.id.clone(),
            status: SessionStatus::Optimizing,
            max_evals,
        })
    })
    .await?;
    Ok((StatusCode::ACCEPTED, Json(accepted)))
}

/// Background worker: runs the optimizer and records the outcome.
fn run(session: &Session, args: &OptimizeArgs) {
    let outcome = optimize_bundle(&session.bundle, args, Some(&session.evaluated));
    let mut rec = session.lock();
    match outcome {
        Ok(r) => {
            rec.status = if r.meets_threshold {
                SessionStatus::Done
            } else {
                SessionStatus::BelowThreshold
            };
            rec.progress = 1.0;
        }
        Err(e) => {
            rec.status = SessionStatus::Failed;
            rec.progress = (session.evaluated.load(Ordering::Relaxed) as f64
                / session.max_evals.load(Ordering::Relaxed).max(1) as f64)
                .min(1.0);
            rec.error = Some(e.to_string());
            let _ = std::fs::remove_file(session.bundle.path(bundle::RESULT));
        }
    }
    if let Err(e) = session.persist(&mut rec) {
        rec.status = SessionStatus::Failed;
        rec.error = Some(e.to_string());
    }
}

async fn get_result(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let session = st.store.get(&id)?;
    let bytes = blocking(move || {
        let rec = session.lock();
        if rec.status == SessionStatus::Optimizing {
            return Err(ServiceError::Conflict("optimization still running; poll the session".into()));
        }
        let path = session.bundle.path(bundle::RESULT);
        if !path.is_file() {
            return Err(ServiceError::NotFound("no result; POST optimize first".into()));
        }
        std::fs::read(&path).map_err(|e| ServiceError::Internal(format!("{}: {e}", path.display())))
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

async fn patch_search_space(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SearchSpace>, ServiceError> {
    let session = st.store.get(&id)?;
    blocking(move || {
        let mut rec = session.lock();
        require(
            &rec,
            &[SessionStatus::Annotating, SessionStatus::BelowThreshold],
            "adjust the search space",
        )?;
        let op: Adjustment = serde_json::from_slice(&body)
            .map_err(|e| ServiceError::Unprocessable(format!("invalid adjustment: {e}")))?;
        let b = &session.bundle;
        if !b.has(bundle::SEARCHSPACE) {
            return Err(ServiceError::Conflict("no search space to adjust".into()));
        }
        let space = adjust_search_space(&b.search_space()?, &op).map_err(|e| ServiceError::Unprocessable(e.to_string()))?;
        b.save_search_space(&space)?;
        b.update_meta(|_| {})?;
        rec.status = SessionStatus::Annotating;
        session.persist(&mut rec)?;
        Ok(Json(space))
    })
    .await
}
