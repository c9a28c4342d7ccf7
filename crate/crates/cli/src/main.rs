use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use reflow_cli::commands::{self, RunArgs};
use reflow_cli::server::{router, AppState};
use reflow_core::MonitorMode;

#[derive(Parser)]
#[command(name = "reflow", version, about = "Adaptive process orchestration over expected and physical reality")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Monitor {
    Eager,
    Lazy,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario. With --auto every enabled task is assigned, started
    /// and finished from the participant scripts.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        auto: bool,
        /// Exogenous events script.
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long, value_enum)]
        monitor: Option<Monitor>,
        /// Write the event log (.cpplog) here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-apply a log and check every state hash.
    Replay { scenario: PathBuf, log: PathBuf },
    /// Run headlessly to the first gap and print the recovery plan for it.
    Plan {
        scenario: PathBuf,
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Write PDDL domain and problem files for the first gap.
    ExportPddl {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Parse and validate a scenario, listing every violation.
    Validate { scenario: PathBuf },
    /// Serve the HTTP command/query interface.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Keep one .cpplog per loaded scenario here.
        #[arg(long)]
        log_dir: Option<PathBuf>,
    },
}

fn serve(addr: SocketAddr, log_dir: Option<PathBuf>) -> anyhow::Result<i32> {
    if let Some(dir) = &log_dir {
        std::fs::create_dir_all(dir)?;
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        println!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, router(AppState::new(log_dir))).await?;
        Ok(0)
    })
}

fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    let out = &mut std::io::stdout();
    match cli.command {
        Command::Run {
            scenario,
            auto,
            events,
            monitor,
            out: log,
            seed,
        } => commands::run(
            &RunArgs {
                scenario: &scenario,
                auto,
                events: events.as_deref(),
                monitor: monitor.map(|m| match m {
                    Monitor::Eager => MonitorMode::Eager,
                    Monitor::Lazy => MonitorMode::Lazy,
                }),
                out: log.as_deref(),
                seed,
            },
            out,
        ),
        Command::Replay { scenario, log } => commands::replay_log(&scenario, &log, out),
        Command::Plan { scenario, events } => commands::plan(&scenario, events.as_deref(), out),
        Command::ExportPddl { scenario, out: dir, events } => commands::export(&scenario, events.as_deref(), &dir, out),
        Command::Validate { scenario } => commands::validate(&scenario, out),
        Command::Serve { addr, log_dir } => serve(addr, log_dir),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::EXIT_FAILURE as u8)
        }
    }
}
