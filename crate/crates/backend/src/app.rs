//! Process entry point shared by the `attenface-backend` binary and the
//! simulator's networked mode.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use attenface_core::camera::{AlwaysReachable, CameraDevice, CameraGateway, SimulatedCameras};
use attenface_core::engine::{DeviceProvider, EngineOptions};
use attenface_core::scenario::load_scenario;
use attenface_core::Timestamp;

use crate::auth::SeededUsers;
use crate::clock::{Clock, VirtualClock, WallClock};
use crate::dispatch::{HttpDispatcher, JobDispatcher};
use crate::local::LocalDispatcher;
use crate::seed::seed_scenario;
use crate::store::{self, Store};
use crate::views::SessionState;
use crate::{serve, AppState, Service};

#[derive(clap::Args, Debug, Clone)]
pub struct BackendArgs {
    #[arg(long, env = "ATTENFACE_LISTEN", default_value = "127.0.0.1:8080")]
    pub listen: String,
    #[arg(long, env = "ATTENFACE_DB", default_value = "attenface.db")]
    pub db: PathBuf,
    /// Recognition server; without it jobs run in this process.
    #[arg(long, env = "ATTENFACE_ENGINE_URL")]
    pub engine_url: Option<String>,
    /// Seeded into the database and used for the simulated cameras.
    #[arg(long, env = "ATTENFACE_SCENARIO")]
    pub scenario: Option<PathBuf>,
    /// virtual: moved through POST /internal/clock; wall: real time.
    #[arg(long, env = "ATTENFACE_CLOCK", default_value = "virtual")]
    pub clock: String,
    /// Initial virtual time; defaults to an hour before the first session.
    #[arg(long, env = "ATTENFACE_CLOCK_START")]
    pub clock_start: Option<Timestamp>,
    #[arg(
        long,
        env = "ATTENFACE_SHARED_SECRET",
        default_value = "attenface-dev-secret"
    )]
    pub secret: String,
    /// Base URL the engine can reach this server at.
    #[arg(long, env = "ATTENFACE_PUBLIC_URL")]
    pub public_url: Option<String>,
    /// Tick period under the wall clock.
    #[arg(long, env = "ATTENFACE_TICK_MS", default_value_t = 1000)]
    pub tick_ms: u64,
}

fn first_start(store: &Store) -> anyhow::Result<Option<Timestamp>> {
    let conn = store.conn()?;
    let sessions = store::sessions_in_states(
        &conn,
        &[
            SessionState::Scheduled,
            SessionState::Connecting,
            SessionState::Running,
            SessionState::Complete,
            SessionState::Failed,
        ],
    )?;
    Ok(sessions.iter().map(|s| s.start).min())
}

/// Runs the server until interrupted. Prints `listening on ADDR` once bound.
pub fn run(args: BackendArgs) -> anyhow::Result<()> {
    let store = Store::open(&args.db).with_context(|| format!("opening {}", args.db.display()))?;
    let mut tau = attenface_core::DEFAULT_TAU;
    let device: Arc<dyn CameraDevice> = match &args.scenario {
        Some(path) => {
            let scenario =
                load_scenario(path).with_context(|| format!("loading {}", path.display()))?;
            seed_scenario(&store, &scenario)?;
            tau = scenario.tau;
            Arc::new(SimulatedCameras::new(Arc::new(scenario)))
        }
        None => Arc::new(AlwaysReachable),
    };

    let clock: Arc<dyn Clock> = match args.clock.as_str() {
        "virtual" => {
            let start = match args.clock_start {
                Some(t) => t,
                None => first_start(&store)?
                    .map(|t| t.plus_minutes(-60))
                    .unwrap_or_else(|| WallClock.now()),
            };
            Arc::new(VirtualClock::new(start))
        }
        "wall" => Arc::new(WallClock),
        other => anyhow::bail!("unknown clock {other:?}"),
    };

    let local = match &args.engine_url {
        Some(_) => None,
        None => Some(Arc::new(LocalDispatcher::new(
            Arc::new(DeviceProvider::new(Arc::clone(&device))),
            EngineOptions::default(),
            false,
        ))),
    };
    let dispatcher: Arc<dyn JobDispatcher> = match (&args.engine_url, &local) {
        (Some(url), _) => Arc::new(HttpDispatcher::new(url)),
        (None, Some(l)) => Arc::clone(l) as Arc<dyn JobDispatcher>,
        (None, None) => unreachable!(),
    };
    let service = Arc::new(
        Service::new(
            store.clone(),
            Arc::clone(&clock),
            Arc::new(SeededUsers::new(store)),
            Arc::new(CameraGateway::new(device)),
            dispatcher,
        )?
        .with_tau(tau),
    );
    if let Some(l) = &local {
        l.attach(&service);
    }

    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&args.listen)
            .await
            .with_context(|| format!("binding {}", args.listen))?;
        let addr = listener.local_addr()?;
        let public = args
            .public_url
            .clone()
            .unwrap_or_else(|| format!("http://{addr}"));
        service.set_callback_url(format!("{}/internal", public.trim_end_matches('/')));

        if !clock.is_virtual() {
            let ticking = Arc::clone(&service);
            let period = Duration::from_millis(args.tick_ms.max(10));
            tokio::spawn(async move {
                let mut interval = tokio::time::interval(period);
                loop {
                    interval.tick().await;
                    let s = Arc::clone(&ticking);
                    match tokio::task::spawn_blocking(move || s.tick()).await {
                        Ok(Err(e)) => log::warn!("tick failed: {e}"),
                        Err(e) => log::warn!("tick panicked: {e}"),
                        Ok(Ok(_)) => {}
                    }
                }
            });
        }

        println!("listening on {addr}");
        std::io::stdout().flush()?;
        let state = AppState {
            service,
            secret: args.secret,
        };
        serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        Ok(())
    })
}
