//! HTTP front of the recognition server.
//!
//! `POST /jobs` accepts a session job and starts a dedicated worker thread
//! for it. Workers share nothing but the camera provider; results go back
//! to the caller through callbacks while `GET /jobs/{id}` reports progress.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};

use attenface_core::engine::{
    run_job, BlockReport, CameraProvider, EngineOptions, PresenceMatrix, ResultSink,
};
use attenface_core::Error;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};

use crate::callback::HttpSink;
use crate::wire::{ErrorBody, JobAccepted, JobRequest, JobStatus, JobView};

#[derive(Debug, Clone, Default)]
pub struct EngineConfig {
    pub secret: String,
    /// Used when a job does not name its own callback URL.
    pub default_callback: Option<String>,
    pub options: EngineOptions,
}

struct JobSink {
    http: Option<HttpSink>,
    blocks: AtomicUsize,
}

impl JobSink {
    fn callback_errors(&self) -> usize {
        self.http.as_ref().map_or(0, HttpSink::errors)
    }
}

impl ResultSink for JobSink {
    fn block(&self, report: &BlockReport) {
        self.blocks.fetch_add(1, Ordering::Relaxed);
        if let Some(http) = &self.http {
            http.block(report);
        }
    }

    fn complete(&self, matrix: &PresenceMatrix) {
        if let Some(http) = &self.http {
            http.complete(matrix);
        }
    }

    fn failed(&self, session_id: &str, reason: &str) {
        if let Some(http) = &self.http {
            http.failed(session_id, reason);
        }
    }
}

struct JobEntry {
    session_id: String,
    status: JobStatus,
    error: Option<String>,
    matrix: Option<PresenceMatrix>,
    sink: Arc<JobSink>,
}

pub struct Engine {
    provider: Arc<dyn CameraProvider>,
    config: EngineConfig,
    jobs: RwLock<HashMap<String, JobEntry>>,
}

impl Engine {
    pub fn new(provider: Arc<dyn CameraProvider>, config: EngineConfig) -> Arc<Self> {
        Arc::new(Engine {
            provider,
            config,
            jobs: RwLock::new(HashMap::new()),
        })
    }

    /// Validates the job and starts its worker. A second submission for a
    /// session whose job is still active returns the existing job id.
    pub fn submit(self: &Arc<Self>, request: JobRequest) -> Result<String, Error> {
        let callback = request
            .callback_url
            .clone()
            .or_else(|| self.config.default_callback.clone());
        let job = request.into_job()?;

        let mut jobs = self.jobs.write().expect("job table poisoned");
        if let Some((id, _)) = jobs.iter().find(|(_, e)| {
            e.session_id == job.session_id
                && matches!(e.status, JobStatus::Pending | JobStatus::Running)
        }) {
            return Ok(id.clone());
        }
        let job_id = uuid::Uuid::new_v4().to_string();
        let sink = Arc::new(JobSink {
            http: callback.map(|url| HttpSink::new(url, self.config.secret.clone())),
            blocks: AtomicUsize::new(0),
        });
        jobs.insert(
            job_id.clone(),
            JobEntry {
                session_id: job.session_id.clone(),
                status: JobStatus::Pending,
                error: None,
                matrix: None,
                sink: Arc::clone(&sink),
            },
        );
        drop(jobs);

        let engine = Arc::clone(self);
        let id = job_id.clone();
        std::thread::Builder::new()
            .name(format!("session-{}", job.session_id))
            .spawn(move || {
                engine.set_status(&id, JobStatus::Running, None, None);
                match run_job(
                    &job,
                    engine.provider.as_ref(),
                    sink.as_ref(),
                    &engine.config.options,
                ) {
                    Ok(matrix) => engine.set_status(&id, JobStatus::Complete, None, Some(matrix)),
                    Err(e) => {
                        log::warn!("session {} failed: {e}", job.session_id);
                        engine.set_status(&id, JobStatus::Failed, Some(e.to_string()), None)
                    }
                }
            })
            .map_err(|e| Error::Io(format!("cannot start worker: {e}")))?;
        Ok(job_id)
    }

    fn set_status(
        &self,
        id: &str,
        status: JobStatus,
        error: Option<String>,
        matrix: Option<PresenceMatrix>,
    ) {
        let mut jobs = self.jobs.write().expect("job table poisoned");
        if let Some(entry) = jobs.get_mut(id) {
            entry.status = status;
            entry.error = error;
            if matrix.is_some() {
                entry.matrix = matrix;
            }
        }
    }

    pub fn view(&self, id: &str) -> Option<JobView> {
        let jobs = self.jobs.read().expect("job table poisoned");
        jobs.get(id).map(|e| JobView {
            job_id: id.to_string(),
            session_id: e.session_id.clone(),
            status: e.status,
            error: e.error.clone(),
            blocks_done: e.sink.blocks.load(Ordering::Relaxed),
            callback_errors: e.sink.callback_errors(),
        })
    }

    pub fn matrix(&self, id: &str) -> Option<PresenceMatrix> {
        let jobs = self.jobs.read().expect("job table poisoned");
        jobs.get(id).and_then(|e| e.matrix.clone())
    }
}

struct ApiError(StatusCode, ErrorBody);

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError(
            status,
            ErrorBody {
                code: code.to_string(),
                message: message.into(),
            },
        )
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::NotFound { .. } => StatusCode::NOT_FOUND,
            Error::Conflict(_) => StatusCode::CONFLICT,
            Error::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        let code = if status == StatusCode::BAD_REQUEST {
            "invalid_input"
        } else {
            "error"
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

async fn create_job(
    State(engine): State<Arc<Engine>>,
    body: Result<Json<JobRequest>, axum::extract::rejection::JsonRejection>,
) -> Result<(StatusCode, Json<JobAccepted>), ApiError> {
    let Json(request) =
        body.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_input", e.body_text()))?;
    let job_id = engine.submit(request)?;
    Ok((StatusCode::ACCEPTED, Json(JobAccepted { job_id })))
}

async fn get_job(
    State(engine): State<Arc<Engine>>,
    Path(id): Path<String>,
) -> Result<Json<JobView>, ApiError> {
    engine
        .view(&id)
        .map(Json)
        .ok_or_else(|| Error::not_found("job", id).into())
}

async fn get_matrix(
    State(engine): State<Arc<Engine>>,
    Path(id): Path<String>,
) -> Result<Json<PresenceMatrix>, ApiError> {
    if engine.view(&id).is_none() {
        return Err(Error::not_found("job", id).into());
    }
    engine.matrix(&id).map(Json).ok_or_else(|| {
        ApiError::new(
            StatusCode::CONFLICT,
            "not_complete",
            format!("job {id} has no result yet"),
        )
    })
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({"status": "ok"}))
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/jobs", post(create_job))
        .route("/jobs/{id}", get(get_job))
        .route("/jobs/{id}/matrix", get(get_matrix))
        .route("/health", get(health))
        .with_state(engine)
}

pub async fn serve(listener: tokio::net::TcpListener, engine: Arc<Engine>) -> std::io::Result<()> {
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
