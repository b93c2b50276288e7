use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use attenface_backend::app::BackendArgs;
use attenface_backend::seed::seed_scenario;
use attenface_backend::store::Store;
use attenface_cli::run::InvalidScenario;
use attenface_cli::{diff_tables, oracle_report, run_scenario, Mode, RunOptions, RunReport};
use attenface_core::scenario::{
    build_scenario, generate_scenario, parse_scenario_file, GeneratorConfig, Scenario, ScenarioFile,
};
use attenface_engine::app::EngineArgs;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "attenface", about = "Snapshot attendance simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    #[value(name = "in_process")]
    InProcess,
    Networked,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load a scenario into a database.
    Seed {
        scenario: PathBuf,
        #[arg(long, default_value = "attenface.db")]
        db: PathBuf,
    },
    /// Run every session and compare with the oracle.
    Run {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "in_process")]
        mode: ModeArg,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Finish each session before starting the next (in_process only).
        #[arg(long)]
        sequential: bool,
        /// Extra milliseconds spent on every snapshot match.
        #[arg(long)]
        match_cost_ms: Option<u64>,
    },
    /// Print the attendance the scenario script implies.
    Oracle {
        scenario: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Compare the attendance tables of two JSON reports.
    Diff { first: PathBuf, second: PathBuf },
    /// Write a random scenario.
    Generate {
        #[arg(long, default_value_t = 2026)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        students: usize,
        #[arg(long, default_value_t = 10)]
        sessions: usize,
        #[arg(long, default_value_t = 2)]
        courses: usize,
        #[arg(long, default_value_t = 5)]
        min_blocks: u32,
        #[arg(long, default_value_t = 9)]
        max_blocks: u32,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    #[command(hide = true)]
    ServeEngine(EngineArgs),
    #[command(hide = true)]
    ServeBackend(BackendArgs),
}

/// Failure with the exit status it maps to.
struct Failure(u8, String);

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        if e.downcast_ref::<InvalidScenario>().is_some() {
            Failure(2, format!("{e:#}"))
        } else {
            Failure(1, format!("{e:#}"))
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure(2, e.to_string())
}

fn read_scenario(path: &Path) -> Result<(ScenarioFile, Scenario), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    let file =
        parse_scenario_file(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let scenario =
        build_scenario(file.clone()).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    Ok((file, scenario))
}

fn write_json(path: &Path, report: &RunReport) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Failure(1, e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Failure(1, format!("{}: {e}", path.display())))
}

fn read_report(path: &Path) -> Result<RunReport, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Seed { scenario, db } => {
            let (_, scenario) = read_scenario(&scenario)?;
            let store = Store::open(&db).map_err(|e| Failure(1, e.to_string()))?;
            let report = seed_scenario(&store, &scenario).map_err(|e| Failure(1, e.to_string()))?;
            println!(
                "seeded {}: {} users, {} rooms, {} courses, {} sessions",
                db.display(),
                report.users,
                report.rooms,
                report.courses,
                report.sessions
            );
            Ok(())
        }
        Command::Run {
            scenario,
            mode,
            json,
            sequential,
            match_cost_ms,
        } => {
            let (file, parsed) = read_scenario(&scenario)?;
            let options = RunOptions {
                mode: match mode {
                    ModeArg::InProcess => Mode::InProcess,
                    ModeArg::Networked => Mode::Networked,
                },
                sequential,
                match_cost: match_cost_ms.map(Duration::from_millis),
                ..Default::default()
            };
            let report = run_scenario(&file, &options)?;
            print!("{}", report.render());
            if let Some(path) = json {
                write_json(&path, &report)?;
            }
            let expected = oracle_report(&parsed)?;
            let differences = diff_tables(&expected, &report);
            if differences.is_empty() {
                println!("oracle: match");
                return Ok(());
            }
            println!("oracle: {} differences", differences.len());
            for d in &differences {
                eprintln!("  {d}");
            }
            // With noise the pipeline is expected to disagree; the report
            // carries the error counts.
            if parsed.noise_sigma == 0.0 {
                Err(Failure(1, "attendance differs from the oracle".into()))
            } else {
                Ok(())
            }
        }
        Command::Oracle { scenario, json } => {
            let (_, scenario) = read_scenario(&scenario)?;
            let report = oracle_report(&scenario)?;
            print!("{}", report.render());
            if let Some(path) = json {
                write_json(&path, &report)?;
            }
            Ok(())
        }
        Command::Diff { first, second } => {
            let a = read_report(&first)?;
            let b = read_report(&second)?;
            let differences = diff_tables(&a, &b);
            for d in &differences {
                println!("{d}");
            }
            if differences.is_empty() {
                println!("attendance tables are identical");
                Ok(())
            } else {
                Err(Failure(1, format!("{} differences", differences.len())))
            }
        }
        Command::Generate {
            seed,
            students,
            sessions,
            courses,
            min_blocks,
            max_blocks,
            noise,
            output,
        } => {
            if min_blocks == 0 || max_blocks < min_blocks || courses == 0 || noise < 0.0 {
                return Err(invalid(
                    "need 0 < min-blocks <= max-blocks, courses > 0, noise >= 0",
                ));
            }
            let file = generate_scenario(&GeneratorConfig {
                seed,
                students,
                sessions,
                courses,
                min_blocks,
                max_blocks,
                noise_sigma: noise,
                ..Default::default()
            });
            let text =
                serde_json::to_string_pretty(&file).map_err(|e| Failure(1, e.to_string()))?;
            match output {
                Some(path) => std::fs::write(&path, text)
                    .map_err(|e| Failure(1, format!("{}: {e}", path.display())))?,
                None => println!("{text}"),
            }
            Ok(())
        }
        Command::ServeEngine(args) => Ok(attenface_engine::app::run(args)?),
        Command::ServeBackend(args) => Ok(attenface_backend::app::run(args)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
