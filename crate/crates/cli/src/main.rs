use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use dyadsim::assessment::ScenarioPool;
use dyadsim::config::RunConfig;
use dyadsim_cli::run::{runtime, validation};
use dyadsim_cli::service::{serve, AppState};
use dyadsim_cli::{CommandError, MetricsArgs, SimulateArgs};

#[derive(Parser)]
#[command(name = "dyadsim", version, about = "Cognitive-agent speed-dating simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one event and write results.json, summary.csv and traces.jsonl.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        participants: PathBuf,
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a participant CSV.
    Ingest {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        mapping: Option<PathBuf>,
        /// Print the full JSON rejection report.
        #[arg(long)]
        report: bool,
    },
    /// Compute the evolution report for a results file.
    Metrics {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Human records to compare decisions and ratings against.
        #[arg(long)]
        participants: Option<PathBuf>,
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long)]
        per_agent: bool,
    },
    /// Terminal personality assessment.
    Assess {
        #[arg(long, required = true)]
        interactive: bool,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        scenarios: Option<PathBuf>,
        /// Write the event log here as JSON lines.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        scenarios: Option<PathBuf>,
        /// Directory for run exports and assessment logs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn config_or_default(path: Option<&PathBuf>) -> Result<RunConfig, CommandError> {
    match path {
        Some(p) => dyadsim_cli::run::load_config(p),
        None => Ok(RunConfig::scripted(0)),
    }
}

fn pool(path: Option<&PathBuf>) -> Result<ScenarioPool, CommandError> {
    match path {
        Some(p) => ScenarioPool::from_file(p).map_err(validation),
        None => Ok(ScenarioPool::builtin()),
    }
}

fn execute(cli: Cli) -> Result<(), CommandError> {
    match cli.command {
        Command::Simulate {
            config,
            participants,
            mapping,
            out,
        } => {
            let result = dyadsim_cli::simulate(SimulateArgs {
                config: &config,
                participants: &participants,
                mapping: mapping.as_deref(),
                out: &out,
            })?;
            println!(
                "{} sessions, {} aborted, {} matches -> {}",
                result.sessions.len(),
                result.aborted.len(),
                result.matches.match_count(),
                out.display()
            );
            Ok(())
        }
        Command::Ingest { csv, mapping, report } => {
            dyadsim_cli::ingest(&csv, mapping.as_deref(), report, std::io::stdout().lock())
        }
        Command::Metrics {
            results,
            out,
            csv,
            participants,
            mapping,
            per_agent,
        } => dyadsim_cli::metrics(MetricsArgs {
            results: &results,
            out: &out,
            csv: csv.as_deref(),
            participants: participants.as_deref(),
            mapping: mapping.as_deref(),
            per_agent,
        }),
        Command::Assess {
            interactive: _,
            config,
            scenarios,
            log,
        } => {
            let cfg = config_or_default(config.as_ref())?;
            let provider = cfg.build_provider().map_err(validation)?;
            let stdin = std::io::stdin();
            dyadsim_cli::assess_interactive(&cfg, pool(scenarios.as_ref())?, provider.as_ref(), log.as_ref(), stdin.lock(), std::io::stdout().lock())?;
            Ok(())
        }
        Command::Serve {
            port,
            host,
            config,
            scenarios,
            out,
        } => {
            let cfg = config_or_default(config.as_ref())?;
            let state = AppState::new(cfg, pool(scenarios.as_ref())?, out).map_err(validation)?;
            let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
            rt.block_on(serve(Arc::new(state), SocketAddr::new(host, port))).map_err(runtime)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
