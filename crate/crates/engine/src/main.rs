use attenface_engine::app::{run, EngineArgs};
use clap::Parser;

#[derive(Parser, Debug)]
#[command(name = "attenface-engine", about = "Recognition server")]
struct Cli {
    #[command(flatten)]
    args: EngineArgs,
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    run(Cli::parse().args)
}
