use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid session: {0}")]
    InvalidSession(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("inconsistent presence: expected {expected} blocks, got {actual}")]
    InconsistentPresence { expected: usize, actual: usize },
    #[error("inconsistent input: {0}")]
    InconsistentInput(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("{kind} not found: {id}")]
    NotFound { kind: &'static str, id: String },
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("camera {0} is unreachable")]
    CameraFailed(String),
    #[error("connection to camera {0} lost")]
    ConnectionLost(String),
    #[error("capture time {time} outside session window [{start}, {end})")]
    OutOfWindow {
        time: String,
        start: String,
        end: String,
    },
    #[error("snapshot acquisition failed on camera {camera_id} at {time}")]
    Capture { camera_id: String, time: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn not_found(kind: &'static str, id: impl Into<String>) -> Self {
        Error::NotFound {
            kind,
            id: id.into(),
        }
    }
}
