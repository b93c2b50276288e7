//! Camera registry and simulated classroom cameras.
//!
//! The gateway never reads wall time: every call carries the timestamp it
//! acts at, so a simulator can drive it through a timetable in
//! milliseconds.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::embedding::FaceEmbedding;
use crate::rng::{detection_stream, synth_embedding};
use crate::scenario::Scenario;
use crate::{Error, Result, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CameraStatus {
    Idle,
    Connected,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CameraBinding {
    pub camera_id: String,
    pub room_number: String,
    pub status: CameraStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotFrame {
    pub camera_id: String,
    pub capture_time: Timestamp,
    pub detections: Vec<FaceEmbedding>,
}

/// The device side of a camera: whatever produces faces for a room.
pub trait CameraDevice: Send + Sync {
    fn is_reachable(&self, camera_id: &str) -> bool;

    /// Face embeddings visible to `camera_id` at `t`.
    fn grab(&self, camera_id: &str, t: Timestamp) -> Result<Vec<FaceEmbedding>>;
}

/// Opaque proof of an active connection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectionHandle {
    id: u64,
    camera_id: String,
    session_start: Timestamp,
    session_end: Timestamp,
}

impl ConnectionHandle {
    pub fn camera_id(&self) -> &str {
        &self.camera_id
    }

    pub fn window(&self) -> (Timestamp, Timestamp) {
        (self.session_start, self.session_end)
    }
}

struct ActiveConnection {
    id: u64,
    session_start: Timestamp,
    session_end: Timestamp,
    capture_lock: Arc<Mutex<()>>,
}

struct CameraSlot {
    binding: CameraBinding,
    active: Option<ActiveConnection>,
}

pub struct CameraGateway {
    device: Arc<dyn CameraDevice>,
    slots: RwLock<HashMap<String, CameraSlot>>,
    next_id: AtomicU64,
}

impl CameraGateway {
    pub fn new(device: Arc<dyn CameraDevice>) -> Self {
        CameraGateway {
            device,
            slots: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        }
    }

    /// Registers `camera_id` for `room_number`, or rebinds its room.
    pub fn register(&self, camera_id: &str, room_number: &str) {
        let mut slots = self.slots.write().expect("camera registry poisoned");
        slots
            .entry(camera_id.to_string())
            .and_modify(|slot| slot.binding.room_number = room_number.to_string())
            .or_insert_with(|| CameraSlot {
                binding: CameraBinding {
                    camera_id: camera_id.to_string(),
                    room_number: room_number.to_string(),
                    status: CameraStatus::Idle,
                },
                active: None,
            });
    }

    pub fn binding(&self, camera_id: &str) -> Option<CameraBinding> {
        let slots = self.slots.read().expect("camera registry poisoned");
        slots.get(camera_id).map(|s| s.binding.clone())
    }

    pub fn bindings(&self) -> Vec<CameraBinding> {
        let slots = self.slots.read().expect("camera registry poisoned");
        let mut out: Vec<_> = slots.values().map(|s| s.binding.clone()).collect();
        out.sort_by(|a, b| a.camera_id.cmp(&b.camera_id));
        out
    }

    /// Opens the camera for one session. Connections whose session has
    /// already ended by `at_time` are released implicitly.
    pub fn connect(
        &self,
        camera_id: &str,
        at_time: Timestamp,
        session_start: Timestamp,
        session_end: Timestamp,
    ) -> Result<ConnectionHandle> {
        if session_end <= session_start {
            return Err(Error::InvalidSession(format!(
                "session end {session_end} is not after start {session_start}"
            )));
        }
        if at_time > session_start {
            return Err(Error::InvalidInput(format!(
                "connect at {at_time} is after session start {session_start}"
            )));
        }
        let mut slots = self.slots.write().expect("camera registry poisoned");
        let slot = slots
            .get_mut(camera_id)
            .ok_or_else(|| Error::not_found("camera", camera_id))?;
        if let Some(active) = &slot.active {
            if at_time < active.session_end {
                return Err(Error::Conflict(format!(
                    "camera {camera_id} is already connected for [{}, {})",
                    active.session_start, active.session_end
                )));
            }
            slot.active = None;
        }
        if !self.device.is_reachable(camera_id) {
            slot.binding.status = CameraStatus::Failed;
            return Err(Error::CameraFailed(camera_id.to_string()));
        }
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        slot.active = Some(ActiveConnection {
            id,
            session_start,
            session_end,
            capture_lock: Arc::new(Mutex::new(())),
        });
        slot.binding.status = CameraStatus::Connected;
        Ok(ConnectionHandle {
            id,
            camera_id: camera_id.to_string(),
            session_start,
            session_end,
        })
    }

    pub fn capture_snapshot(
        &self,
        handle: &ConnectionHandle,
        t: Timestamp,
    ) -> Result<SnapshotFrame> {
        let lock = {
            let slots = self.slots.read().expect("camera registry poisoned");
            let active = slots
                .get(&handle.camera_id)
                .and_then(|s| s.active.as_ref())
                .filter(|a| a.id == handle.id)
                .ok_or_else(|| Error::ConnectionLost(handle.camera_id.clone()))?;
            Arc::clone(&active.capture_lock)
        };
        if t < handle.session_start || t >= handle.session_end {
            return Err(Error::OutOfWindow {
                time: t.to_string(),
                start: handle.session_start.to_string(),
                end: handle.session_end.to_string(),
            });
        }
        let _serial = lock.lock().expect("capture lock poisoned");
        let detections = self.device.grab(&handle.camera_id, t)?;
        Ok(SnapshotFrame {
            camera_id: handle.camera_id.clone(),
            capture_time: t,
            detections,
        })
    }

    pub fn disconnect(&self, handle: &ConnectionHandle) {
        let mut slots = self.slots.write().expect("camera registry poisoned");
        if let Some(slot) = slots.get_mut(&handle.camera_id) {
            if slot.active.as_ref().is_some_and(|a| a.id == handle.id) {
                slot.active = None;
                slot.binding.status = CameraStatus::Idle;
            }
        }
    }
}

/// Cameras that render a [`Scenario`]: at time `t` a camera sees one
/// synthetic embedding per student scripted present in the block of the
/// session it is filming.
pub struct SimulatedCameras {
    scenario: Arc<Scenario>,
}

impl SimulatedCameras {
    pub fn new(scenario: Arc<Scenario>) -> Self {
        SimulatedCameras { scenario }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Registers every scenario room with `gateway`.
    pub fn register_all(&self, gateway: &CameraGateway) {
        for (room, camera) in &self.scenario.rooms {
            gateway.register(camera, room);
        }
    }
}

impl CameraDevice for SimulatedCameras {
    fn is_reachable(&self, camera_id: &str) -> bool {
        self.scenario.rooms.values().any(|c| c == camera_id)
            && !self.scenario.offline_cameras.contains(camera_id)
    }

    fn grab(&self, camera_id: &str, t: Timestamp) -> Result<Vec<FaceEmbedding>> {
        let scenario = &self.scenario;
        let Some((session, block)) = scenario
            .sessions
            .iter()
            .filter(|s| s.camera_id == camera_id)
            .find_map(|s| s.schedule.block_index_at(t).map(|k| (s, k)))
        else {
            return Ok(Vec::new());
        };
        if scenario.snapshot_fails(&session.id, block) {
            return Err(Error::Capture {
                camera_id: camera_id.to_string(),
                time: t.to_string(),
            });
        }
        let mut faces: Vec<(u64, FaceEmbedding)> = session
            .present
            .iter()
            .filter(|(_, blocks)| blocks.contains(&block))
            .filter_map(|(sid, _)| scenario.student(sid))
            .map(|student| {
                let mut stream = detection_stream(scenario.seed, &session.id, block, &student.id);
                // Draw 0 orders the faces; later draws perturb the embedding.
                let order = stream.next_u64();
                (
                    order,
                    synth_embedding(&student.embedding, scenario.noise_sigma, &mut stream),
                )
            })
            .collect();
        faces.sort_by_key(|(order, _)| *order);
        Ok(faces.into_iter().map(|(_, e)| e).collect())
    }
}

/// Device for deployments where the engine owns the feed and the back-end
/// only needs to activate cameras.
pub struct AlwaysReachable;

impl CameraDevice for AlwaysReachable {
    fn is_reachable(&self, _camera_id: &str) -> bool {
        true
    }

    fn grab(&self, _camera_id: &str, _t: Timestamp) -> Result<Vec<FaceEmbedding>> {
        Ok(Vec::new())
    }
}
