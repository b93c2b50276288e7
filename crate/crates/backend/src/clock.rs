//! Time sources driving session orchestration.

use std::sync::Mutex;

use attenface_core::Timestamp;

use crate::error::{ServiceError, ServiceResult};

pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;

    /// Moves a virtual clock; wall clocks refuse.
    fn set(&self, t: Timestamp) -> ServiceResult<()>;

    fn is_virtual(&self) -> bool;
}

pub struct WallClock;

impl Clock for WallClock {
    fn now(&self) -> Timestamp {
        Timestamp::floor(chrono::Utc::now())
    }

    fn set(&self, _t: Timestamp) -> ServiceResult<()> {
        Err(ServiceError::Conflict(
            "the clock follows wall time and cannot be set".into(),
        ))
    }

    fn is_virtual(&self) -> bool {
        false
    }
}

/// Clock that only moves when told to, and never backwards.
pub struct VirtualClock {
    now: Mutex<Timestamp>,
}

impl VirtualClock {
    pub fn new(start: Timestamp) -> Self {
        VirtualClock {
            now: Mutex::new(start),
        }
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Timestamp {
        *self.now.lock().expect("clock poisoned")
    }

    fn set(&self, t: Timestamp) -> ServiceResult<()> {
        let mut now = self.now.lock().expect("clock poisoned");
        if t < *now {
            return Err(ServiceError::Conflict(format!(
                "clock is at {now}; cannot move back to {t}"
            )));
        }
        *now = t;
        Ok(())
    }

    fn is_virtual(&self) -> bool {
        true
    }
}
