//! Per-session recognition worker.
//!
//! A [`SessionJob`] carries everything the worker needs: the roster, the
//! session window, the camera and the matcher threshold. The worker walks
//! the block schedule, takes one snapshot per block, matches it against the
//! roster and reports each block to a [`ResultSink`] before reporting the
//! full [`PresenceMatrix`] once at the end. Workers share nothing mutable,
//! so any number of sessions can run side by side.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::camera::{CameraDevice, CameraGateway, ConnectionHandle};
use crate::embedding::FaceEmbedding;
use crate::matching::{match_snapshot, validate_roster, Assignment, RosterEntry};
use crate::policy::{compute_block_schedule, BlockSchedule, PresenceVector};
use crate::{Error, Result, Timestamp, CONNECT_LEAD_MINUTES};

/// Upper bound on worker threads for one batch.
pub const MAX_WORKERS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionJob {
    pub session_id: String,
    pub camera_id: String,
    pub start_time: Timestamp,
    pub end_time: Timestamp,
    pub interval_minutes: i64,
    pub tau: f64,
    pub roster: Vec<RosterEntry>,
}

impl SessionJob {
    pub fn validate(&self) -> Result<BlockSchedule> {
        if self.roster.is_empty() {
            return Err(Error::InvalidInput(format!(
                "session {} has an empty roster",
                self.session_id
            )));
        }
        if !(self.tau > 0.0 && self.tau < 2.0) {
            return Err(Error::InvalidConfig(format!(
                "tau must lie in (0, 2), got {}",
                self.tau
            )));
        }
        validate_roster(&self.roster)?;
        compute_block_schedule(self.start_time, self.end_time, self.interval_minutes)
    }
}

/// Student × block presence grid for one session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresenceMatrix {
    pub session_id: String,
    pub block_count: usize,
    pub rows: BTreeMap<String, Vec<bool>>,
    /// Blocks whose snapshot could not be acquired; all-absent by rule.
    #[serde(default)]
    pub degraded_blocks: Vec<usize>,
}

impl PresenceMatrix {
    pub fn empty(session_id: &str, roster: &[RosterEntry], block_count: usize) -> Self {
        PresenceMatrix {
            session_id: session_id.to_string(),
            block_count,
            rows: roster
                .iter()
                .map(|e| (e.student_id.clone(), vec![false; block_count]))
                .collect(),
            degraded_blocks: Vec::new(),
        }
    }
}

pub fn presence_vector(matrix: &PresenceMatrix, student_id: &str) -> Result<PresenceVector> {
    matrix
        .rows
        .get(student_id)
        .map(|row| PresenceVector::new(student_id, row.clone()))
        .ok_or_else(|| Error::not_found("student", student_id))
}

/// Result of one block, as delivered to the back-end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub session_id: String,
    pub block_index: usize,
    pub capture_time: Timestamp,
    pub assignments: Vec<Assignment>,
    pub degraded: bool,
}

/// Receives results from workers. Called concurrently from many sessions.
pub trait ResultSink: Send + Sync {
    fn block(&self, report: &BlockReport);
    fn complete(&self, matrix: &PresenceMatrix);
    fn failed(&self, session_id: &str, reason: &str);
}

/// Sink that drops everything.
pub struct NullSink;

impl ResultSink for NullSink {
    fn block(&self, _report: &BlockReport) {}
    fn complete(&self, _matrix: &PresenceMatrix) {}
    fn failed(&self, _session_id: &str, _reason: &str) {}
}

/// A camera feed bound to one session.
pub trait SnapshotSource: Send {
    fn capture(&mut self, t: Timestamp) -> Result<Vec<FaceEmbedding>>;
}

/// Opens the feed for a job's camera.
pub trait CameraProvider: Send + Sync {
    fn open(&self, job: &SessionJob) -> Result<Box<dyn SnapshotSource>>;
}

/// Reads frames straight from a device, without the connection registry.
///
/// Under virtual pacing, workers for back-to-back sessions on one camera
/// run at the same moment of real time, which the single-connection rule
/// of [`CameraGateway`] would reject; the orchestrator already enforced it
/// when it activated the camera.
pub struct DeviceProvider {
    device: Arc<dyn CameraDevice>,
}

impl DeviceProvider {
    pub fn new(device: Arc<dyn CameraDevice>) -> Self {
        DeviceProvider { device }
    }
}

struct DeviceSource {
    device: Arc<dyn CameraDevice>,
    camera_id: String,
    start: Timestamp,
    end: Timestamp,
}

impl SnapshotSource for DeviceSource {
    fn capture(&mut self, t: Timestamp) -> Result<Vec<FaceEmbedding>> {
        if t < self.start || t >= self.end {
            return Err(Error::OutOfWindow {
                time: t.to_string(),
                start: self.start.to_string(),
                end: self.end.to_string(),
            });
        }
        self.device.grab(&self.camera_id, t)
    }
}

impl CameraProvider for DeviceProvider {
    fn open(&self, job: &SessionJob) -> Result<Box<dyn SnapshotSource>> {
        if !self.device.is_reachable(&job.camera_id) {
            return Err(Error::CameraFailed(job.camera_id.clone()));
        }
        Ok(Box::new(DeviceSource {
            device: Arc::clone(&self.device),
            camera_id: job.camera_id.clone(),
            start: job.start_time,
            end: job.end_time,
        }))
    }
}

/// Feeds sessions through a [`CameraGateway`] connection, for wall-clock
/// pacing where sessions on one camera really are sequential.
pub struct GatewayProvider {
    gateway: Arc<CameraGateway>,
}

impl GatewayProvider {
    pub fn new(gateway: Arc<CameraGateway>) -> Self {
        GatewayProvider { gateway }
    }
}

struct GatewaySource {
    gateway: Arc<CameraGateway>,
    handle: ConnectionHandle,
}

impl SnapshotSource for GatewaySource {
    fn capture(&mut self, t: Timestamp) -> Result<Vec<FaceEmbedding>> {
        Ok(self.gateway.capture_snapshot(&self.handle, t)?.detections)
    }
}

impl Drop for GatewaySource {
    fn drop(&mut self) {
        self.gateway.disconnect(&self.handle);
    }
}

impl CameraProvider for GatewayProvider {
    fn open(&self, job: &SessionJob) -> Result<Box<dyn SnapshotSource>> {
        let handle = self.gateway.connect(
            &job.camera_id,
            job.start_time.plus_minutes(-CONNECT_LEAD_MINUTES),
            job.start_time,
            job.end_time,
        )?;
        Ok(Box::new(GatewaySource {
            gateway: Arc::clone(&self.gateway),
            handle,
        }))
    }
}

/// How the worker relates scheduled snapshot times to real time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pacing {
    /// Step straight from one snapshot time to the next.
    #[default]
    Virtual,
    /// Sleep until each snapshot time on the wall clock.
    Wall,
}

#[derive(Debug, Clone, Default)]
pub struct EngineOptions {
    pub pacing: Pacing,
    /// Artificial cost added to every matcher call.
    pub match_cost: Option<Duration>,
}

fn wait_until(t: Timestamp) {
    let now = chrono::Utc::now();
    if let Ok(delta) = (t.as_datetime() - now).to_std() {
        std::thread::sleep(delta);
    }
}

/// Runs one session to completion against an already opened source.
///
/// A block whose snapshot cannot be acquired is recorded all-absent and
/// flagged degraded; it never aborts the session.
pub fn run_session(
    job: &SessionJob,
    source: &mut dyn SnapshotSource,
    sink: &dyn ResultSink,
    options: &EngineOptions,
) -> Result<PresenceMatrix> {
    let schedule = job.validate()?;
    let mut matrix = PresenceMatrix::empty(&job.session_id, &job.roster, schedule.block_count());
    for (block_index, &t) in schedule.snapshot_times.iter().enumerate() {
        if options.pacing == Pacing::Wall {
            wait_until(t);
        }
        let (assignments, degraded) = match source.capture(t) {
            Ok(detections) => {
                if let Some(cost) = options.match_cost {
                    std::thread::sleep(cost);
                }
                (match_snapshot(&detections, &job.roster, job.tau)?, false)
            }
            Err(_) => (Vec::new(), true),
        };
        for a in &assignments {
            if let Some(row) = matrix.rows.get_mut(&a.student_id) {
                row[block_index] = true;
            }
        }
        if degraded {
            matrix.degraded_blocks.push(block_index);
        }
        sink.block(&BlockReport {
            session_id: job.session_id.clone(),
            block_index,
            capture_time: t,
            assignments,
            degraded,
        });
    }
    sink.complete(&matrix);
    Ok(matrix)
}

/// Opens the job's camera and runs the session. A camera that cannot be
/// opened fails the session and the sink is told why.
pub fn run_job(
    job: &SessionJob,
    provider: &dyn CameraProvider,
    sink: &dyn ResultSink,
    options: &EngineOptions,
) -> Result<PresenceMatrix> {
    if let Err(e) = job.validate() {
        sink.failed(&job.session_id, &e.to_string());
        return Err(e);
    }
    let mut source = match provider.open(job) {
        Ok(source) => source,
        Err(e) => {
            sink.failed(&job.session_id, &e.to_string());
            return Err(e);
        }
    };
    run_session(job, source.as_mut(), sink, options)
}

/// Runs jobs one after another on the calling thread.
pub fn run_jobs_sequential(
    jobs: &[SessionJob],
    provider: &dyn CameraProvider,
    sink: &dyn ResultSink,
    options: &EngineOptions,
) -> Vec<Result<PresenceMatrix>> {
    jobs.iter()
        .map(|job| run_job(job, provider, sink, options))
        .collect()
}

/// Runs jobs side by side, one worker per session up to [`MAX_WORKERS`].
/// Results come back in job order.
#[cfg(feature = "parallel")]
pub fn run_jobs(
    jobs: &[SessionJob],
    provider: &dyn CameraProvider,
    sink: &dyn ResultSink,
    options: &EngineOptions,
) -> Vec<Result<PresenceMatrix>> {
    use rayon::prelude::*;

    let workers = jobs.len().clamp(1, MAX_WORKERS);
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .thread_name(|i| format!("session-worker-{i}"))
        .build()
    {
        Ok(pool) => pool,
        Err(_) => return run_jobs_sequential(jobs, provider, sink, options),
    };
    pool.install(|| {
        jobs.par_iter()
            .with_max_len(1)
            .map(|job| run_job(job, provider, sink, options))
            .collect()
    })
}

#[cfg(not(feature = "parallel"))]
pub fn run_jobs(
    jobs: &[SessionJob],
    provider: &dyn CameraProvider,
    sink: &dyn ResultSink,
    options: &EngineOptions,
) -> Vec<Result<PresenceMatrix>> {
    run_jobs_sequential(jobs, provider, sink, options)
}
