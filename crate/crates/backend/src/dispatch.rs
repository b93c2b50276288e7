//! Hand-off of session jobs to a recognition engine.

use std::time::Duration;

use attenface_core::engine::SessionJob;
use attenface_engine::wire::{JobAccepted, JobRequest};

pub trait JobDispatcher: Send + Sync {
    /// Starts recognition for `job`; returns the engine's job id.
    fn dispatch(&self, job: &SessionJob, callback_url: Option<&str>) -> Result<String, String>;
}

/// Posts jobs to a recognition server over HTTP.
pub struct HttpDispatcher {
    agent: ureq::Agent,
    engine_url: String,
}

impl HttpDispatcher {
    pub fn new(engine_url: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(10)))
            .build()
            .into();
        HttpDispatcher {
            agent,
            engine_url: engine_url.into().trim_end_matches('/').to_string(),
        }
    }
}

impl JobDispatcher for HttpDispatcher {
    fn dispatch(&self, job: &SessionJob, callback_url: Option<&str>) -> Result<String, String> {
        let body = JobRequest::from_job(job, callback_url.map(str::to_string));
        let accepted: JobAccepted = self
            .agent
            .post(format!("{}/jobs", self.engine_url))
            .send_json(&body)
            .map_err(|e| format!("engine rejected job: {e}"))?
            .body_mut()
            .read_json()
            .map_err(|e| format!("engine reply: {e}"))?;
        Ok(accepted.job_id)
    }
}
