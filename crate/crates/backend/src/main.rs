use attenface_backend::app::{run, BackendArgs};
use clap::Parser;

#[derive(Parser, Debug)]
#[command(name = "attenface-backend", about = "Attendance back-end")]
struct Cli {
    #[command(flatten)]
    args: BackendArgs,
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    run(Cli::parse().args)
}
