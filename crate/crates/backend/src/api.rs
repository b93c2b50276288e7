//! REST routes. Handlers authenticate, then run the service call on the
//! blocking pool because every call touches SQLite.

use std::sync::Arc;

use attenface_core::engine::PresenceMatrix;
use attenface_engine::wire::{BlockCallback, ErrorBody, FailedCallback, SECRET_HEADER};
use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::auth::{bearer_token, Principal};
use crate::error::{ServiceError, ServiceResult};
use crate::service::Service;
use crate::views::{ClockRequest, LoginRequest, OverrideRequest, RoomRequest, ThresholdRequest};

#[derive(Clone)]
pub struct AppState {
    pub service: Arc<Service>,
    /// Expected in the secret header of engine callbacks.
    pub secret: String,
}

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status =
            StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let body = ErrorBody {
            code: self.0.code().to_string(),
            message: self.0.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

/// JSON body whose rejections use the API's error shape.
pub struct Body<T>(pub T);

impl<S, T> FromRequest<S> for Body<T>
where
    Json<T>: FromRequest<S, Rejection = JsonRejection>,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) => Err(ApiError(ServiceError::InvalidInput(e.body_text()))),
        }
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

async fn blocking<T, F>(state: &AppState, f: F) -> ApiResult<T>
where
    T: Serialize + Send + 'static,
    F: FnOnce(&Service) -> ServiceResult<T> + Send + 'static,
{
    let service = Arc::clone(&state.service);
    tokio::task::spawn_blocking(move || f(&service))
        .await
        .map_err(|e| ApiError(ServiceError::Internal(format!("worker panicked: {e}"))))?
        .map(Json)
        .map_err(ApiError)
}

/// Like `blocking`, with the bearer token resolved first.
async fn as_user<T, F>(state: &AppState, headers: &HeaderMap, f: F) -> ApiResult<T>
where
    T: Serialize + Send + 'static,
    F: FnOnce(&Service, &Principal) -> ServiceResult<T> + Send + 'static,
{
    let header = headers
        .get(axum::http::header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .map(str::to_string);
    blocking(state, move |s| {
        let token = bearer_token(header.as_deref())?;
        let principal = s.authenticate(token)?;
        f(s, &principal)
    })
    .await
}

fn check_secret(state: &AppState, headers: &HeaderMap) -> Result<(), ApiError> {
    let given = headers.get(SECRET_HEADER).and_then(|v| v.to_str().ok());
    if given == Some(state.secret.as_str()) {
        Ok(())
    } else {
        Err(ApiError(ServiceError::Unauthorized(
            "missing or wrong engine secret".into(),
        )))
    }
}

#[derive(Debug, Deserialize)]
struct StandingQuery {
    course: Option<String>,
}

async fn login(State(st): State<AppState>, Body(req): Body<LoginRequest>) -> impl IntoResponse {
    blocking(&st, move |s| s.login(&req.user_id, &req.password)).await
}

async fn me(State(st): State<AppState>, headers: HeaderMap) -> impl IntoResponse {
    as_user(&st, &headers, |s, p| s.me(p)).await
}

async fn standing(
    State(st): State<AppState>,
    headers: HeaderMap,
    Path(student): Path<String>,
    Query(q): Query<StandingQuery>,
) -> impl IntoResponse {
    as_user(&st, &headers, move |s, p| {
        s.standing(p, &student, q.course.as_deref())
    })
    .await
}

async fn session_detail(
    State(st): State<AppState>,
    headers: HeaderMap,
    Path(session): Path<String>,
) -> impl IntoResponse {
    as_user(&st, &headers, move |s, p| s.session_detail(p, &session)).await
}

async fn student_attendance(
    State(st): State<AppState>,
    headers: HeaderMap,
    Path((session, student)): Path<(String, String)>,
) -> impl IntoResponse {
    as_user(&st, &headers, move |s, p| {
        s.student_attendance(p, &session, &student)
    })
    .await
}

async fn course_sessions(
    State(st): State<AppState>,
    headers: HeaderMap,
    Path(course): Path<String>,
) -> impl IntoResponse {
    as_user(&st, &headers, move |s, p| s.list_sessions(p, &course)).await
}

async fn class_total(
    State(st): State<AppState>,
    headers: HeaderMap,
    Path((course, session)): Path<(String, String)>,
) -> impl IntoResponse {
    as_user(&st, &headers, move |s, p| {
        s.class_total(p, &course, &session)
    })
    .await
}

async fn session_threshold(
    State(st): State<AppState>,
    headers: HeaderMap,
    Path(session): Path<String>,
    Body(req): Body<ThresholdRequest>,
) -> impl IntoResponse {
    as_user(&st, &headers, move |s, p| {
        s.set_session_threshold(p, &session, req.n)
    })
    .await
}

async fn course_threshold(
    State(st): State<AppState>,
    headers: HeaderMap,
    Path(course): Path<String>,
    Body(req): Body<ThresholdRequest>,
) -> impl IntoResponse {
    as_user(&st, &headers, move |s, p| {
        s.set_course_threshold(p, &course, req.n)
    })
    .await
}

async fn session_room(
    State(st): State<AppState>,
    headers: HeaderMap,
    Path(session): Path<String>,
    Body(req): Body<RoomRequest>,
) -> impl IntoResponse {
    as_user(&st, &headers, move |s, p| {
        s.set_session_room(p, &session, &req.room_number)
    })
    .await
}

async fn course_room(
    State(st): State<AppState>,
    headers: HeaderMap,
    Path(course): Path<String>,
    Body(req): Body<RoomRequest>,
) -> impl IntoResponse {
    as_user(&st, &headers, move |s, p| {
        s.set_course_room(p, &course, &req.room_number)
    })
    .await
}

async fn put_override(
    State(st): State<AppState>,
    headers: HeaderMap,
    Path((session, student)): Path<(String, String)>,
    Body(req): Body<OverrideRequest>,
) -> impl IntoResponse {
    as_user(&st, &headers, move |s, p| {
        s.set_override(p, &session, &student, req.present, &req.note)
    })
    .await
}

async fn delete_override(
    State(st): State<AppState>,
    headers: HeaderMap,
    Path((session, student)): Path<(String, String)>,
) -> impl IntoResponse {
    as_user(&st, &headers, move |s, p| {
        s.clear_override(p, &session, &student)
    })
    .await
}

async fn block_callback(
    State(st): State<AppState>,
    headers: HeaderMap,
    Path((session, block)): Path<(String, usize)>,
    Body(req): Body<BlockCallback>,
) -> impl IntoResponse {
    check_secret(&st, &headers)?;
    blocking(&st, move |s| s.ingest_block(&session, block, &req)).await
}

async fn complete_callback(
    State(st): State<AppState>,
    headers: HeaderMap,
    Path(session): Path<String>,
    Body(req): Body<PresenceMatrix>,
) -> impl IntoResponse {
    check_secret(&st, &headers)?;
    blocking(&st, move |s| s.ingest_complete(&session, &req)).await
}

async fn failed_callback(
    State(st): State<AppState>,
    headers: HeaderMap,
    Path(session): Path<String>,
    Body(req): Body<FailedCallback>,
) -> impl IntoResponse {
    check_secret(&st, &headers)?;
    blocking(&st, move |s| s.ingest_failed(&session, &req.reason)).await
}

async fn get_clock(State(st): State<AppState>, headers: HeaderMap) -> impl IntoResponse {
    check_secret(&st, &headers)?;
    blocking(&st, |s| Ok(s.clock_view())).await
}

async fn set_clock(
    State(st): State<AppState>,
    headers: HeaderMap,
    Body(req): Body<ClockRequest>,
) -> impl IntoResponse {
    check_secret(&st, &headers)?;
    blocking(&st, move |s| s.set_clock(req.now)).await
}

async fn health() -> &'static str {
    "ok"
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/auth/login", post(login))
        .route("/me", get(me))
        .route("/students/{id}/standing", get(standing))
        .route("/sessions/{id}", get(session_detail))
        .route(
            "/sessions/{id}/attendance/{student}",
            get(student_attendance),
        )
        .route(
            "/sessions/{id}/attendance/{student}/override",
            put(put_override).delete(delete_override),
        )
        .route("/sessions/{id}/threshold", put(session_threshold))
        .route("/sessions/{id}/room", put(session_room))
        .route("/courses/{id}/sessions", get(course_sessions))
        .route("/courses/{id}/sessions/{session}/total", get(class_total))
        .route("/courses/{id}/threshold", put(course_threshold))
        .route("/courses/{id}/room", put(course_room))
        .route("/internal/sessions/{id}/blocks/{k}", post(block_callback))
        .route("/internal/sessions/{id}/complete", post(complete_callback))
        .route("/internal/sessions/{id}/failed", post(failed_callback))
        .route("/internal/clock", get(get_clock).post(set_clock))
        .route("/health", get(health))
        .with_state(state)
}

/// Serves until the shutdown future resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
