//! Core of the attenface snapshot attendance system.
//!
//! A class is observed through periodic camera snapshots. Each snapshot is a
//! list of face embeddings; the matcher assigns them to enrolled students and
//! marks those students present for that block of time. A student receives
//! attendance for the class when the number of blocks they were seen in
//! reaches the threshold `n` chosen by the professor.
//!
//! Nothing in this crate performs network or database I/O. The modules are:
//!
//! * [`policy`]: block schedules, threshold decisions, course standings.
//! * [`embedding`] and [`matching`]: face embeddings and the greedy matcher.
//! * [`rng`]: the counter-based random stream behind every synthetic value.
//! * [`scenario`]: ground-truth scripts used by simulated cameras and oracles.
//! * [`camera`]: camera registry, connection discipline, simulated devices.
//! * [`engine`]: the per-session recognition worker and batch runner.
//! * [`calibration`]: Monte Carlo measurement of matcher accuracy.

pub mod calibration;
pub mod camera;
pub mod embedding;
pub mod engine;
mod error;
pub mod matching;
pub mod policy;
pub mod rng;
pub mod scenario;
mod time;

pub use error::{Error, Result};
pub use time::Timestamp;

/// Default snapshot cadence in minutes.
pub const DEFAULT_INTERVAL_MINUTES: u32 = 10;

/// Default embedding dimension.
pub const DEFAULT_EMBEDDING_DIM: usize = 128;

/// Default cosine-distance acceptance threshold for the matcher.
pub const DEFAULT_TAU: f64 = 0.4;

/// How many minutes before class start the camera is connected.
pub const CONNECT_LEAD_MINUTES: i64 = 5;
