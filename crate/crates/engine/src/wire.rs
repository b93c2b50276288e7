//! JSON bodies exchanged between the back-end and the recognition server.

use attenface_core::engine::SessionJob;
use attenface_core::matching::{Assignment, RosterEntry};
use attenface_core::{Error, Result, Timestamp, DEFAULT_EMBEDDING_DIM};
use serde::{Deserialize, Serialize};

/// Header carrying the shared secret on every engine callback.
pub const SECRET_HEADER: &str = "x-attenface-secret";

/// Body of `POST /jobs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRequest {
    pub session_id: String,
    pub camera_id: String,
    pub start_time: Timestamp,
    pub end_time: Timestamp,
    pub interval_minutes: i64,
    pub tau: f64,
    #[serde(default = "default_dim")]
    pub embedding_dim: usize,
    pub roster: Vec<RosterEntry>,
    /// Base URL that block and completion callbacks are posted under.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub callback_url: Option<String>,
}

fn default_dim() -> usize {
    DEFAULT_EMBEDDING_DIM
}

impl JobRequest {
    pub fn from_job(job: &SessionJob, callback_url: Option<String>) -> Self {
        JobRequest {
            session_id: job.session_id.clone(),
            camera_id: job.camera_id.clone(),
            start_time: job.start_time,
            end_time: job.end_time,
            interval_minutes: job.interval_minutes,
            tau: job.tau,
            embedding_dim: job
                .roster
                .first()
                .map_or(DEFAULT_EMBEDDING_DIM, |e| e.embedding.dim()),
            roster: job.roster.clone(),
            callback_url,
        }
    }

    /// Checks the declared dimension and the job's own invariants.
    pub fn into_job(self) -> Result<SessionJob> {
        if let Some(bad) = self
            .roster
            .iter()
            .find(|e| e.embedding.dim() != self.embedding_dim)
        {
            return Err(Error::DimensionMismatch {
                left: self.embedding_dim,
                right: bad.embedding.dim(),
            });
        }
        let job = SessionJob {
            session_id: self.session_id,
            camera_id: self.camera_id,
            start_time: self.start_time,
            end_time: self.end_time,
            interval_minutes: self.interval_minutes,
            tau: self.tau,
            roster: self.roster,
        };
        job.validate()?;
        Ok(job)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobAccepted {
    pub job_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Pending,
    Running,
    Complete,
    Failed,
}

/// Body of `GET /jobs/{id}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobView {
    pub job_id: String,
    pub session_id: String,
    pub status: JobStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub blocks_done: usize,
    pub callback_errors: usize,
}

/// Body of `POST {callback}/sessions/{id}/blocks/{k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCallback {
    pub assignments: Vec<Assignment>,
    #[serde(default)]
    pub degraded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capture_time: Option<Timestamp>,
}

/// Body of `POST {callback}/sessions/{id}/failed`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedCallback {
    pub reason: String,
}

/// Error body used by every endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}
