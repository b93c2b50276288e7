//! Process entry point shared by the `attenface-engine` binary and the
//! simulator's networked mode.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use attenface_core::camera::{AlwaysReachable, CameraDevice, SimulatedCameras};
use attenface_core::engine::{DeviceProvider, EngineOptions, Pacing};
use attenface_core::scenario::load_scenario;

use crate::{serve, Engine, EngineConfig};

#[derive(clap::Args, Debug, Clone)]
pub struct EngineArgs {
    #[arg(long, env = "ATTENFACE_LISTEN", default_value = "127.0.0.1:8081")]
    pub listen: String,
    /// Scenario that drives the simulated cameras.
    #[arg(long, env = "ATTENFACE_SCENARIO")]
    pub scenario: Option<PathBuf>,
    #[arg(
        long,
        env = "ATTENFACE_SHARED_SECRET",
        default_value = "attenface-dev-secret"
    )]
    pub secret: String,
    #[arg(long, env = "ATTENFACE_CALLBACK_URL")]
    pub callback_url: Option<String>,
    /// virtual: step between snapshot times; wall: wait for them.
    #[arg(long, env = "ATTENFACE_PACING", default_value = "virtual")]
    pub pacing: String,
    /// Extra milliseconds spent on every match.
    #[arg(long, env = "ATTENFACE_MATCH_COST_MS")]
    pub match_cost_ms: Option<u64>,
}

/// Runs the server until interrupted. Prints `listening on ADDR` once bound.
pub fn run(args: EngineArgs) -> anyhow::Result<()> {
    let pacing = match args.pacing.as_str() {
        "virtual" => Pacing::Virtual,
        "wall" => Pacing::Wall,
        other => anyhow::bail!("unknown pacing {other:?}"),
    };
    let device: Arc<dyn CameraDevice> = match &args.scenario {
        Some(path) => Arc::new(SimulatedCameras::new(Arc::new(
            load_scenario(path).with_context(|| format!("loading {}", path.display()))?,
        ))),
        None => Arc::new(AlwaysReachable),
    };
    let engine = Engine::new(
        Arc::new(DeviceProvider::new(device)),
        EngineConfig {
            secret: args.secret,
            default_callback: args.callback_url,
            options: EngineOptions {
                pacing,
                match_cost: args.match_cost_ms.map(Duration::from_millis),
            },
        },
    );

    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&args.listen)
            .await
            .with_context(|| format!("binding {}", args.listen))?;
        let addr = listener.local_addr()?;
        println!("listening on {addr}");
        std::io::stdout().flush()?;
        serve(listener, engine).await?;
        Ok(())
    })
}
