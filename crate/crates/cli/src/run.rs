//! Runs a whole scenario through the back-end and the recognition engine
//! under a virtual clock.
//!
//! The clock jumps straight between event times (camera connection five
//! minutes before each class, dispatch at its start); the engine paces
//! itself virtually, so no run ever sleeps on schedule time.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader};
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context};
use attenface_backend::auth::{Principal, Role, SeededUsers};
use attenface_backend::clock::VirtualClock;
use attenface_backend::local::LocalDispatcher;
use attenface_backend::seed::{seed_scenario, ADMIN_ID};
use attenface_backend::store::Store;
use attenface_backend::views::{SessionDetail, StandingsView, StudentAttendance};
use attenface_backend::Service;
use attenface_core::camera::{CameraGateway, SimulatedCameras};
use attenface_core::engine::{DeviceProvider, EngineOptions, Pacing};
use attenface_core::scenario::{build_scenario, Scenario, ScenarioFile};
use attenface_core::{Timestamp, CONNECT_LEAD_MINUTES};
use serde::de::DeserializeOwned;

use crate::oracle::{recognition_errors, standing_row, virtual_span};
use crate::report::{AttendanceRow, RunReport, SessionTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Back-end and engine as libraries inside this process.
    InProcess,
    /// Back-end and engine as separate server processes.
    Networked,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::InProcess => "in_process",
            Mode::Networked => "networked",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub mode: Mode,
    /// In-process only: run each session's job to completion before the
    /// clock moves on, instead of one thread per session.
    pub sequential: bool,
    /// Extra time spent on every snapshot match.
    pub match_cost: Option<Duration>,
    /// The `attenface` binary used to start servers in networked mode.
    pub program: Option<PathBuf>,
    /// How long to wait for every session to finish.
    pub timeout: Duration,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            mode: Mode::InProcess,
            sequential: false,
            match_cost: None,
            program: None,
            timeout: Duration::from_secs(300),
        }
    }
}

/// A scenario that failed validation.
#[derive(Debug)]
pub struct InvalidScenario(pub String);

impl std::fmt::Display for InvalidScenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid scenario: {}", self.0)
    }
}

impl std::error::Error for InvalidScenario {}

/// Read access to the back-end, local or over HTTP.
trait Backend {
    fn session(&self, id: &str) -> anyhow::Result<SessionDetail>;
    fn attendance(&self, session: &str, student: &str) -> anyhow::Result<StudentAttendance>;
    fn standing(&self, student: &str, course: &str) -> anyhow::Result<StandingsView>;
}

struct LocalBackend {
    service: Arc<Service>,
    admin: Principal,
}

impl Backend for LocalBackend {
    fn session(&self, id: &str) -> anyhow::Result<SessionDetail> {
        Ok(self.service.session_detail(&self.admin, id)?)
    }

    fn attendance(&self, session: &str, student: &str) -> anyhow::Result<StudentAttendance> {
        Ok(self
            .service
            .student_attendance(&self.admin, session, student)?)
    }

    fn standing(&self, student: &str, course: &str) -> anyhow::Result<StandingsView> {
        Ok(self.service.standing(&self.admin, student, Some(course))?)
    }
}

struct HttpBackend {
    base: String,
    token: String,
    agent: ureq::Agent,
}

impl HttpBackend {
    fn get<T: DeserializeOwned>(&self, path: &str) -> anyhow::Result<T> {
        Ok(self
            .agent
            .get(format!("{}{path}", self.base))
            .header("authorization", format!("Bearer {}", self.token))
            .call()
            .with_context(|| format!("GET {path}"))?
            .body_mut()
            .read_json()?)
    }
}

impl Backend for HttpBackend {
    fn session(&self, id: &str) -> anyhow::Result<SessionDetail> {
        self.get(&format!("/sessions/{id}"))
    }

    fn attendance(&self, session: &str, student: &str) -> anyhow::Result<StudentAttendance> {
        self.get(&format!("/sessions/{session}/attendance/{student}"))
    }

    fn standing(&self, student: &str, course: &str) -> anyhow::Result<StandingsView> {
        self.get(&format!("/students/{student}/standing?course={course}"))
    }
}

/// Connection and dispatch times of every session, in order.
pub fn event_times(scenario: &Scenario) -> Vec<Timestamp> {
    let times: BTreeSet<Timestamp> = scenario
        .sessions
        .iter()
        .flat_map(|s| [s.start.plus_minutes(-CONNECT_LEAD_MINUTES), s.start])
        .collect();
    times.into_iter().collect()
}

fn wait_final(backend: &dyn Backend, scenario: &Scenario, timeout: Duration) -> anyhow::Result<()> {
    let deadline = Instant::now() + timeout;
    for s in &scenario.sessions {
        loop {
            let detail = backend.session(&s.id)?;
            if detail.state.is_final() {
                break;
            }
            if Instant::now() > deadline {
                bail!(
                    "session {} still {} after {:?}",
                    s.id,
                    detail.state,
                    timeout
                );
            }
            std::thread::sleep(Duration::from_millis(10));
        }
    }
    Ok(())
}

fn collect(
    backend: &dyn Backend,
    scenario: &Scenario,
) -> anyhow::Result<(Vec<SessionTable>, Vec<crate::report::StandingRow>)> {
    let mut sessions = Vec::with_capacity(scenario.sessions.len());
    for s in &scenario.sessions {
        let detail = backend.session(&s.id)?;
        let mut rows = Vec::new();
        let mut records = detail.records.clone();
        records.sort_by(|a, b| a.student_id.cmp(&b.student_id));
        for record in records {
            let att = backend.attendance(&s.id, &record.student_id)?;
            rows.push(AttendanceRow {
                blocks: att
                    .blocks
                    .iter()
                    .map(|&b| if b { '1' } else { '0' })
                    .collect(),
                blocks_present: record.blocks_present,
                present: record.present,
                student_id: record.student_id,
            });
        }
        sessions.push(SessionTable {
            session_id: detail.session_id,
            course_id: detail.course_id,
            state: detail.state.to_string(),
            block_count: detail.block_count,
            threshold: detail.threshold.effective,
            rows,
        });
    }
    let mut standings = Vec::new();
    for course in &scenario.courses {
        let mut students = course.students.clone();
        students.sort();
        for student in students {
            let view = backend.standing(&student, &course.id)?;
            let standing = view
                .standings
                .first()
                .ok_or_else(|| anyhow!("no standing for {student} in {}", course.id))?;
            standings.push(standing_row(standing));
        }
    }
    Ok((sessions, standings))
}

/// Runs every session of the scenario and reports the outcome.
pub fn run_scenario(file: &ScenarioFile, options: &RunOptions) -> anyhow::Result<RunReport> {
    let scenario =
        Arc::new(build_scenario(file.clone()).map_err(|e| InvalidScenario(e.to_string()))?);
    let started = Instant::now();
    let (sessions, standings) = match options.mode {
        Mode::InProcess => run_in_process(&scenario, options)?,
        Mode::Networked => run_networked(file, &scenario, options)?,
    };
    Ok(RunReport {
        mode: options.mode.as_str().into(),
        seed: scenario.seed,
        noise_sigma: scenario.noise_sigma,
        errors: recognition_errors(&scenario, &sessions),
        sessions,
        standings,
        wall_ms: started.elapsed().as_millis() as u64,
        virtual_minutes: virtual_span(&scenario),
    })
}

type Tables = (Vec<SessionTable>, Vec<crate::report::StandingRow>);

fn run_in_process(scenario: &Arc<Scenario>, options: &RunOptions) -> anyhow::Result<Tables> {
    let dir = tempfile::tempdir()?;
    let store = Store::open(dir.path().join("attenface.db"))?;
    seed_scenario(&store, scenario)?;
    let events = event_times(scenario);
    let start = events
        .first()
        .copied()
        .unwrap_or(Timestamp::ymd_hm(2026, 1, 1, 0, 0));
    let cameras = Arc::new(SimulatedCameras::new(Arc::clone(scenario)));
    let dispatcher = Arc::new(LocalDispatcher::new(
        Arc::new(DeviceProvider::new(cameras.clone())),
        EngineOptions {
            pacing: Pacing::Virtual,
            match_cost: options.match_cost,
        },
        options.sequential,
    ));
    let service = Arc::new(
        Service::new(
            store.clone(),
            Arc::new(VirtualClock::new(start.plus_minutes(-1))),
            Arc::new(SeededUsers::new(store)),
            Arc::new(CameraGateway::new(cameras)),
            dispatcher.clone(),
        )?
        .with_tau(scenario.tau),
    );
    dispatcher.attach(&service);
    for t in events {
        service.set_clock(t)?;
    }
    dispatcher.join();
    let backend = LocalBackend {
        service,
        admin: Principal {
            user_id: ADMIN_ID.into(),
            role: Role::Admin,
        },
    };
    wait_final(&backend, scenario, options.timeout)?;
    collect(&backend, scenario)
}

/// A server subprocess, killed when dropped.
pub struct Server {
    child: Child,
    /// Bound address as printed by the server.
    pub addr: String,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Starts `program args` and waits for its `listening on ADDR` line.
pub fn spawn_server(program: &PathBuf, args: &[String]) -> anyhow::Result<Server> {
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .with_context(|| format!("starting {} {}", program.display(), args[0]))?;
    let stdout = child.stdout.take().expect("piped stdout");
    let mut server = Server {
        child,
        addr: String::new(),
    };
    let mut line = String::new();
    BufReader::new(stdout).read_line(&mut line)?;
    match line.trim().strip_prefix("listening on ") {
        Some(addr) => server.addr = addr.to_string(),
        None => bail!("{} did not start: {:?}", args[0], line.trim()),
    }
    Ok(server)
}

const SECRET: &str = "attenface-simulator";

fn run_networked(
    file: &ScenarioFile,
    scenario: &Scenario,
    options: &RunOptions,
) -> anyhow::Result<Tables> {
    let program = match &options.program {
        Some(p) => p.clone(),
        None => std::env::current_exe()?,
    };
    let dir = tempfile::tempdir()?;
    let scenario_path = dir.path().join("scenario.json");
    std::fs::write(&scenario_path, serde_json::to_vec(file)?)?;
    let scenario_arg = scenario_path.display().to_string();
    let events = event_times(scenario);
    let start = events
        .first()
        .copied()
        .unwrap_or(Timestamp::ymd_hm(2026, 1, 1, 0, 0));

    let mut engine_args = vec![
        "serve-engine".to_string(),
        "--listen=127.0.0.1:0".into(),
        format!("--scenario={scenario_arg}"),
        format!("--secret={SECRET}"),
        "--pacing=virtual".into(),
    ];
    if let Some(cost) = options.match_cost {
        engine_args.push(format!("--match-cost-ms={}", cost.as_millis()));
    }
    let engine = spawn_server(&program, &engine_args)?;
    let backend_server = spawn_server(
        &program,
        &[
            "serve-backend".to_string(),
            "--listen=127.0.0.1:0".into(),
            format!("--db={}", dir.path().join("attenface.db").display()),
            format!("--scenario={scenario_arg}"),
            format!("--engine-url=http://{}", engine.addr),
            "--clock=virtual".into(),
            format!("--clock-start={}", start.plus_minutes(-1)),
            format!("--secret={SECRET}"),
        ],
    )?;
    let base = format!("http://{}", backend_server.addr);
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(60)))
        .build()
        .into();

    for t in events {
        agent
            .post(format!("{base}/internal/clock"))
            .header(attenface_engine::wire::SECRET_HEADER, SECRET)
            .send_json(serde_json::json!({ "now": t }))
            .with_context(|| format!("moving the clock to {t}"))?;
    }
    let login: attenface_backend::views::LoginResponse = agent
        .post(format!("{base}/auth/login"))
        .send_json(serde_json::json!({ "user_id": ADMIN_ID, "password": ADMIN_ID }))?
        .body_mut()
        .read_json()?;
    let backend = HttpBackend {
        base,
        token: login.token,
        agent,
    };
    wait_final(&backend, scenario, options.timeout)?;
    let tables = collect(&backend, scenario)?;
    drop(backend_server);
    drop(engine);
    Ok(tables)
}
