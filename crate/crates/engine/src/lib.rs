//! Recognition server.
//!
//! Receives per-session jobs (roster embeddings, window, camera), runs one
//! worker per session against the camera provider and posts per-block and
//! final results back to the caller. It never touches the attendance
//! database.

pub mod app;
pub mod callback;
pub mod server;
pub mod wire;

pub use server::{router, serve, Engine, EngineConfig};
