//! Posts worker results back to the back-end.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use attenface_core::engine::{BlockReport, PresenceMatrix, ResultSink};
use serde::Serialize;

use crate::wire::{BlockCallback, FailedCallback, SECRET_HEADER};

const ATTEMPTS: u32 = 3;

/// A [`ResultSink`] that delivers every event as an HTTP POST.
///
/// Each delivery is retried a few times; the back-end treats replays as
/// no-ops, so a retry after a lost response is harmless.
pub struct HttpSink {
    agent: ureq::Agent,
    base_url: String,
    secret: String,
    errors: AtomicUsize,
    blocks: AtomicUsize,
}

impl HttpSink {
    pub fn new(base_url: impl Into<String>, secret: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(10)))
            .build()
            .into();
        HttpSink {
            agent,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            secret: secret.into(),
            errors: AtomicUsize::new(0),
            blocks: AtomicUsize::new(0),
        }
    }

    /// Deliveries that never succeeded.
    pub fn errors(&self) -> usize {
        self.errors.load(Ordering::Relaxed)
    }

    pub fn blocks_sent(&self) -> usize {
        self.blocks.load(Ordering::Relaxed)
    }

    fn post<T: Serialize>(&self, path: &str, body: &T) {
        let url = format!("{}{}", self.base_url, path);
        let mut last = String::new();
        for attempt in 0..ATTEMPTS {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(50 << attempt));
            }
            match self
                .agent
                .post(&url)
                .header(SECRET_HEADER, &self.secret)
                .send_json(body)
            {
                Ok(_) => return,
                // 4xx will not get better by retrying.
                Err(ureq::Error::StatusCode(code)) if (400..500).contains(&code) => {
                    last = format!("status {code}");
                    break;
                }
                Err(e) => last = e.to_string(),
            }
        }
        log::warn!("callback {url} failed: {last}");
        self.errors.fetch_add(1, Ordering::Relaxed);
    }
}

impl ResultSink for HttpSink {
    fn block(&self, report: &BlockReport) {
        self.blocks.fetch_add(1, Ordering::Relaxed);
        self.post(
            &format!(
                "/sessions/{}/blocks/{}",
                report.session_id, report.block_index
            ),
            &BlockCallback {
                assignments: report.assignments.clone(),
                degraded: report.degraded,
                capture_time: Some(report.capture_time),
            },
        );
    }

    fn complete(&self, matrix: &PresenceMatrix) {
        self.post(&format!("/sessions/{}/complete", matrix.session_id), matrix);
    }

    fn failed(&self, session_id: &str, reason: &str) {
        self.post(
            &format!("/sessions/{session_id}/failed"),
            &FailedCallback {
                reason: reason.to_string(),
            },
        );
    }
}
