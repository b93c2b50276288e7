//! Runs recognition inside the back-end process instead of over HTTP.

use std::sync::{Arc, Mutex, OnceLock, Weak};
use std::thread::JoinHandle;

use attenface_core::engine::{
    run_job, BlockReport, CameraProvider, EngineOptions, PresenceMatrix, ResultSink, SessionJob,
};
use attenface_engine::wire::BlockCallback;

use crate::dispatch::JobDispatcher;
use crate::service::Service;

/// Feeds results straight into the service.
struct ServiceSink(Weak<Service>);

impl ServiceSink {
    fn with(&self, f: impl FnOnce(&Service) -> Result<(), crate::error::ServiceError>) {
        if let Some(service) = self.0.upgrade() {
            if let Err(e) = f(&service) {
                log::warn!("ingestion failed: {e}");
            }
        }
    }
}

impl ResultSink for ServiceSink {
    fn block(&self, report: &BlockReport) {
        let delivery = BlockCallback {
            assignments: report.assignments.clone(),
            degraded: report.degraded,
            capture_time: Some(report.capture_time),
        };
        self.with(|s| {
            s.ingest_block(&report.session_id, report.block_index, &delivery)
                .map(drop)
        });
    }

    fn complete(&self, matrix: &PresenceMatrix) {
        self.with(|s| s.ingest_complete(&matrix.session_id, matrix).map(drop));
    }

    fn failed(&self, session_id: &str, reason: &str) {
        self.with(|s| s.ingest_failed(session_id, reason).map(drop));
    }
}

pub struct LocalDispatcher {
    provider: Arc<dyn CameraProvider>,
    options: EngineOptions,
    /// Run each job on the dispatching thread instead of its own.
    inline: bool,
    service: OnceLock<Weak<Service>>,
    workers: Mutex<Vec<JoinHandle<()>>>,
}

impl LocalDispatcher {
    pub fn new(provider: Arc<dyn CameraProvider>, options: EngineOptions, inline: bool) -> Self {
        LocalDispatcher {
            provider,
            options,
            inline,
            service: OnceLock::new(),
            workers: Mutex::new(Vec::new()),
        }
    }

    /// Connects the dispatcher to the service it reports to.
    pub fn attach(&self, service: &Arc<Service>) {
        let _ = self.service.set(Arc::downgrade(service));
    }

    /// Waits for every job started so far.
    pub fn join(&self) {
        let workers = std::mem::take(&mut *self.workers.lock().expect("worker list poisoned"));
        for w in workers {
            let _ = w.join();
        }
    }
}

impl JobDispatcher for LocalDispatcher {
    fn dispatch(&self, job: &SessionJob, _callback_url: Option<&str>) -> Result<String, String> {
        let service = self
            .service
            .get()
            .cloned()
            .ok_or_else(|| "dispatcher is not attached to a service".to_string())?;
        let sink = ServiceSink(service);
        let job_id = format!("local-{}", job.session_id);
        if self.inline {
            let _ = run_job(job, self.provider.as_ref(), &sink, &self.options);
            return Ok(job_id);
        }
        let job = job.clone();
        let provider = Arc::clone(&self.provider);
        let options = self.options.clone();
        let handle = std::thread::Builder::new()
            .name(format!("session-{}", job.session_id))
            .spawn(move || {
                let _ = run_job(&job, provider.as_ref(), &sink, &options);
            })
            .map_err(|e| format!("spawning worker: {e}"))?;
        self.workers
            .lock()
            .expect("worker list poisoned")
            .push(handle);
        Ok(job_id)
    }
}
