//! Attendance back-end: schedules camera connections, dispatches session
//! jobs to a recognition engine, ingests per-block results, applies the
//! attendance threshold and serves role-scoped views over REST.

pub mod api;
pub mod app;
pub mod auth;
pub mod clock;
pub mod dispatch;
pub mod error;
pub mod local;
pub mod seed;
pub mod service;
pub mod store;
pub mod views;

pub use api::{router, serve, AppState};
pub use error::{ServiceError, ServiceResult};
pub use service::{Service, TickReport};
