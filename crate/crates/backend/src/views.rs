//! Request and response bodies of the REST API.

use std::fmt;
use std::str::FromStr;

use attenface_core::policy::{AttendanceRecord, CourseStanding, RecordSource};
use attenface_core::Timestamp;
use serde::{Deserialize, Serialize};

use crate::auth::Role;
use crate::error::ServiceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Scheduled,
    Connecting,
    Running,
    Complete,
    Failed,
}

impl SessionState {
    pub fn as_str(&self) -> &'static str {
        match self {
            SessionState::Scheduled => "scheduled",
            SessionState::Connecting => "connecting",
            SessionState::Running => "running",
            SessionState::Complete => "complete",
            SessionState::Failed => "failed",
        }
    }

    pub fn is_final(&self) -> bool {
        matches!(self, SessionState::Complete | SessionState::Failed)
    }
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SessionState {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "scheduled" => SessionState::Scheduled,
            "connecting" => SessionState::Connecting,
            "running" => SessionState::Running,
            "complete" => SessionState::Complete,
            "failed" => SessionState::Failed,
            other => {
                return Err(ServiceError::Internal(format!(
                    "unknown session state {other:?}"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoginRequest {
    pub user_id: String,
    pub password: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoginResponse {
    pub token: String,
    pub user_id: String,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CourseView {
    pub course_id: String,
    pub professor_id: String,
    pub room_number: String,
    pub camera_id: String,
    pub default_threshold: u32,
    pub required_percent: u32,
    pub total_scheduled: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeView {
    pub user_id: String,
    pub role: Role,
    pub courses: Vec<CourseView>,
}

/// An attendance record as served: the decision, its provenance and the
/// evidence it was computed from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordView {
    pub session_id: String,
    pub student_id: String,
    pub blocks_present: u32,
    pub threshold_used: u32,
    pub present: bool,
    pub computed_present: bool,
    pub source: RecordSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub override_note: Option<String>,
}

impl From<&AttendanceRecord> for RecordView {
    fn from(r: &AttendanceRecord) -> Self {
        RecordView {
            session_id: r.session_id.clone(),
            student_id: r.student_id.clone(),
            blocks_present: r.blocks_present,
            threshold_used: r.threshold_used,
            present: r.present,
            computed_present: r.computed_present(),
            source: r.source,
            override_note: r.override_note.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdView {
    pub course_default: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_override: Option<u32>,
    pub effective: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionDetail {
    pub session_id: String,
    pub course_id: String,
    pub start_time: Timestamp,
    pub end_time: Timestamp,
    pub interval_minutes: u32,
    pub block_count: usize,
    pub room_number: String,
    pub camera_id: String,
    pub state: SessionState,
    pub threshold: ThresholdView,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
    pub blocks_delivered: usize,
    pub degraded_blocks: Vec<usize>,
    /// Every record for staff; only the caller's own for students.
    pub records: Vec<RecordView>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentAttendance {
    pub session_id: String,
    pub student_id: String,
    pub state: SessionState,
    pub block_count: usize,
    /// Presence so far; `false` for blocks not yet delivered.
    pub blocks: Vec<bool>,
    pub blocks_present: u32,
    pub threshold: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<RecordView>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTotal {
    pub course_id: String,
    pub session_id: String,
    pub enrolled: u32,
    pub present: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StandingsView {
    pub student_id: String,
    pub standings: Vec<CourseStanding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdRequest {
    /// `null` clears a session override.
    pub n: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdChange {
    pub scope: String,
    pub id: String,
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoomRequest {
    pub room_number: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoomChange {
    pub room_number: String,
    pub camera_id: String,
    /// Sessions that now use the new room.
    pub sessions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverrideRequest {
    pub present: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub course_id: String,
    pub start_time: Timestamp,
    pub end_time: Timestamp,
    pub room_number: String,
    pub state: SessionState,
    pub threshold: ThresholdView,
    /// The caller's own record, for students.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<RecordView>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClockRequest {
    pub now: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClockView {
    pub now: Timestamp,
    #[serde(rename = "virtual")]
    pub is_virtual: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub ok: bool,
    /// False when the delivery changed nothing (a replay).
    pub applied: bool,
}
