#![allow(dead_code)]

use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use attenface_backend::auth::SeededUsers;
use attenface_backend::clock::{Clock, VirtualClock};
use attenface_backend::dispatch::HttpDispatcher;
use attenface_backend::seed::seed_scenario;
use attenface_backend::store::Store;
use attenface_backend::{router, AppState, Service};
use attenface_core::camera::{CameraGateway, SimulatedCameras};
use attenface_core::engine::DeviceProvider;
use attenface_core::scenario::{build_scenario, Scenario, ScenarioFile};
use attenface_core::Timestamp;
use attenface_engine::wire::{JobAccepted, JobRequest, SECRET_HEADER};
use attenface_engine::{Engine, EngineConfig};
use axum::extract::State;
use axum::routing::post;
use axum::{Json, Router};
use serde_json::Value;

pub const SECRET: &str = "test-secret";

/// Which recognition server the back-end talks to.
pub enum EngineKind {
    /// The real engine over HTTP.
    Real,
    /// Records jobs and never calls back; tests post results themselves.
    Stub,
}

pub struct Harness {
    pub base: String,
    pub scenario: Arc<Scenario>,
    pub service: Arc<Service>,
    pub jobs: Arc<Mutex<Vec<JobRequest>>>,
    agent: ureq::Agent,
    _dir: tempfile::TempDir,
}

async fn record_job(
    State(jobs): State<Arc<Mutex<Vec<JobRequest>>>>,
    Json(job): Json<JobRequest>,
) -> Json<JobAccepted> {
    let mut jobs = jobs.lock().unwrap();
    jobs.push(job);
    Json(JobAccepted {
        job_id: format!("stub-{}", jobs.len()),
    })
}

impl Harness {
    pub fn start(file: ScenarioFile, engine: EngineKind) -> Harness {
        let scenario = Arc::new(build_scenario(file).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path().join("attenface.db")).unwrap();
        seed_scenario(&store, &scenario).unwrap();
        let first = scenario.sessions.iter().map(|s| s.start).min().unwrap();
        let clock: Arc<dyn Clock> = Arc::new(VirtualClock::new(first.plus_minutes(-60)));
        let cameras = Arc::new(SimulatedCameras::new(Arc::clone(&scenario)));
        let jobs = Arc::new(Mutex::new(Vec::new()));

        let rt = tokio::runtime::Runtime::new().unwrap();
        let (backend_listener, engine_listener) = rt.block_on(async {
            (
                tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap(),
                tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap(),
            )
        });
        let engine_addr = engine_listener.local_addr().unwrap();
        let engine_app = match engine {
            EngineKind::Real => attenface_engine::router(Engine::new(
                Arc::new(DeviceProvider::new(cameras.clone())),
                EngineConfig {
                    secret: SECRET.into(),
                    ..Default::default()
                },
            )),
            EngineKind::Stub => Router::new()
                .route("/jobs", post(record_job))
                .with_state(Arc::clone(&jobs)),
        };
        rt.spawn(async move { axum::serve(engine_listener, engine_app).await });

        let service = Arc::new(
            Service::new(
                store.clone(),
                clock,
                Arc::new(SeededUsers::new(store)),
                Arc::new(CameraGateway::new(cameras)),
                Arc::new(HttpDispatcher::new(format!("http://{engine_addr}"))),
            )
            .unwrap(),
        );
        let addr = backend_listener.local_addr().unwrap();
        service.set_callback_url(format!("http://{addr}/internal"));
        let app = router(AppState {
            service: Arc::clone(&service),
            secret: SECRET.into(),
        });
        rt.spawn(async move { axum::serve(backend_listener, app).await });
        // The servers live for the rest of the test process.
        std::mem::forget(rt);

        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        Harness {
            base: format!("http://{addr}"),
            scenario,
            service,
            jobs,
            agent,
            _dir: dir,
        }
    }

    pub fn login(&self, user: &str) -> String {
        let (status, body) = self.call(
            "POST",
            "/auth/login",
            None,
            Some(serde_json::json!({
                "user_id": user, "password": user
            })),
        );
        assert_eq!(status, 200, "{body}");
        body["token"].as_str().unwrap().to_string()
    }

    /// Sends a request and returns the status and JSON body (Null if empty).
    pub fn call(
        &self,
        method: &str,
        path: &str,
        token: Option<&str>,
        body: Option<Value>,
    ) -> (u16, Value) {
        self.send(method, path, token, None, body)
    }

    pub fn internal(&self, path: &str, body: Value) -> (u16, Value) {
        self.send("POST", path, None, Some(SECRET), Some(body))
    }

    pub fn send(
        &self,
        method: &str,
        path: &str,
        token: Option<&str>,
        secret: Option<&str>,
        body: Option<Value>,
    ) -> (u16, Value) {
        let url = format!("{}{path}", self.base);
        let req = ureq::http::Request::builder().method(method).uri(&url);
        let req = match token {
            Some(t) => req.header("authorization", format!("Bearer {t}")),
            None => req,
        };
        let req = match secret {
            Some(s) => req.header(SECRET_HEADER, s),
            None => req,
        };
        let mut resp = match body {
            Some(b) => self
                .agent
                .run(
                    req.header("content-type", "application/json")
                        .body(b.to_string())
                        .unwrap(),
                )
                .unwrap(),
            None => self.agent.run(req.body(()).unwrap()).unwrap(),
        };
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().unwrap();
        let json = serde_json::from_str(&text).unwrap_or(Value::Null);
        (status, json)
    }

    pub fn set_clock(&self, t: Timestamp) {
        let (status, body) = self.internal("/internal/clock", serde_json::json!({ "now": t }));
        assert_eq!(status, 200, "{body}");
    }

    pub fn session(&self, id: &str) -> Value {
        let admin = self.login("admin");
        let (status, body) = self.call("GET", &format!("/sessions/{id}"), Some(&admin), None);
        assert_eq!(status, 200, "{body}");
        body
    }

    pub fn wait_state(&self, id: &str, state: &str) -> Value {
        let deadline = Instant::now() + Duration::from_secs(30);
        loop {
            let s = self.session(id);
            if s["state"] == state {
                return s;
            }
            assert!(
                Instant::now() < deadline,
                "session {id} stuck in {}",
                s["state"]
            );
            std::thread::sleep(Duration::from_millis(20));
        }
    }
}
