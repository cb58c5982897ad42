use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pawshake::config::Config;
use pawshake::pref::Side;
use pawshake::protocol::{
    belief_trace_csv, handshakes_csv, read_report, run_batch, run_session, write_batch, write_session,
    ProtocolError, Satisfaction, SessionOutcome, SessionReport, UserSource,
};
use pawshake_service::{BridgeClient, BridgeError, CreateSession, RouterOptions, SessionStore, StoreConfig};
use serde::Deserialize;

const EXIT_CONFIG: u8 = 2;
const EXIT_BRIDGE_TIMEOUT: u8 = 3;

#[derive(Parser)]
#[command(name = "pawshake", version, about = "Learn handshake preferences on a simulated quadruped leg")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one full session.
    Run(RunArgs),
    /// Run many oracle sessions and write the summary tables.
    Batch(BatchArgs),
    /// Print a finished report as JSON or CSV.
    Report(ReportArgs),
    /// Serve interactive sessions over HTTP.
    Serve(ServeArgs),
    /// Print the default configuration.
    Config,
}

#[derive(Args)]
struct ConfigArg {
    /// JSON configuration file; defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Named synthetic user from the configuration.
    #[arg(long)]
    oracle: Option<String>,
    /// Wait for a person to answer through a running service.
    #[arg(long)]
    interactive: bool,
    /// Replay recorded answers: {"choices": [...], "satisfaction": "..."}.
    #[arg(long)]
    replay: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value = "")]
    label: String,
    #[arg(long)]
    out: PathBuf,
    /// Service used by --interactive.
    #[arg(long, env = "PAWSHAKE_SERVICE", default_value = "http://127.0.0.1:8765")]
    service: String,
}

#[derive(Args)]
struct BatchArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, default_value = "population")]
    oracle: String,
    #[arg(long, default_value_t = 25)]
    n: usize,
    /// Session i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Table {
    Handshakes,
    Belief,
}

#[derive(Args)]
struct ReportArgs {
    /// report.json, or a session directory containing one.
    path: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Which table to print as CSV.
    #[arg(long, value_enum, default_value = "handshakes")]
    table: Table,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Bind address; also read from PAWSHAKE_ADDR.
    #[arg(long, env = pawshake_service::ADDR_ENV, default_value = pawshake_service::DEFAULT_ADDR)]
    addr: String,
    /// Session records are kept here so a restart resumes them.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    max_sessions: usize,
    /// Browser origin allowed by CORS; any origin when omitted.
    #[arg(long, env = "PAWSHAKE_UI_ORIGIN")]
    cors_origin: Option<String>,
}

/// Failures that map to a documented exit code.
#[derive(Debug)]
enum Exit {
    Config(String),
    BridgeTimeout(String),
}

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        match self {
            Exit::Config(m) | Exit::BridgeTimeout(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for Exit {}

fn load_config(arg: &ConfigArg) -> anyhow::Result<Config> {
    match &arg.config {
        Some(path) => Config::load(path).map_err(|e| Exit::Config(e.to_string()).into()),
        None => Ok(Config::default()),
    }
}

fn protocol_error(e: ProtocolError) -> anyhow::Error {
    match e {
        ProtocolError::ConfigInvalid(_) | ProtocolError::UnknownOracle(_) => Exit::Config(e.to_string()).into(),
        other => other.into(),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReplayFile {
    choices: Vec<Side>,
    satisfaction: Satisfaction,
}

fn interactive(config: &Config, seed: u64, args: &RunArgs) -> anyhow::Result<SessionOutcome> {
    let client = BridgeClient::new(&args.service)?;
    let state = client.create(&CreateSession {
        seed: Some(seed),
        label: Some(args.label.clone()),
        hand: Some(config.interactive_hand),
        overrides: Some(serde_json::to_value(config)?),
    })?;
    eprintln!("session {} is waiting at {}", state.session_id, args.service);
    let timeout = Duration::from_secs_f64(config.bridge_timeout_s);
    let served = client
        .wait_for_report(&state.session_id, timeout, Duration::from_millis(500))
        .map_err(|e| match e {
            BridgeError::Timeout { .. } => Exit::BridgeTimeout(e.to_string()).into(),
            other => anyhow::Error::from(other),
        })?;
    // Rebuild locally from the recorded answers so the logs can be written
    // next to the report.
    let report = SessionReport::from_json(&served).map_err(anyhow::Error::msg)?;
    let source = UserSource::Replay {
        choices: report.answers(),
        satisfaction: report.satisfaction,
    };
    let outcome = run_session(config, seed, &args.label, &source).map_err(protocol_error)?;
    if outcome.report.to_json() != served {
        bail!("local replay of {} differs from the served report", state.session_id);
    }
    Ok(outcome)
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let config = load_config(&args.config)?;
    let seed = args.seed.unwrap_or(config.seed);
    let outcome = if let Some(name) = &args.source.oracle {
        run_session(&config, seed, &args.label, &UserSource::Oracle(name.clone())).map_err(protocol_error)?
    } else if let Some(path) = &args.source.replay {
        let text = fs::read_to_string(path).with_context(|| path.display().to_string())?;
        let r: ReplayFile = serde_json::from_str(&text).with_context(|| path.display().to_string())?;
        let source = UserSource::Replay {
            choices: r.choices,
            satisfaction: r.satisfaction,
        };
        run_session(&config, seed, &args.label, &source).map_err(protocol_error)?
    } else {
        interactive(&config, seed, &args)?
    };
    write_session(&outcome, &args.out)?;
    let r = &outcome.report;
    println!(
        "{} optimized {:?} validation wins {:.0}% -> {}",
        r.session_id,
        r.optimized.params,
        100.0 * r.win_rate(),
        args.out.display()
    );
    Ok(())
}

fn batch(args: BatchArgs) -> anyhow::Result<()> {
    if args.n == 0 {
        bail!("--n must be at least 1");
    }
    let config = load_config(&args.config)?;
    let (summary, reports) =
        run_batch(&config, &args.oracle, args.n, args.seed.unwrap_or(config.seed)).map_err(protocol_error)?;
    write_batch(&summary, &reports, &args.out)?;
    println!("{} sessions -> {}", summary.sessions, args.out.display());
    Ok(())
}

fn report(args: ReportArgs) -> anyhow::Result<()> {
    let path = if args.path.is_dir() {
        args.path.join("report.json")
    } else {
        args.path.clone()
    };
    let report = read_report(Path::new(&path))?;
    let text = match (args.format, args.table) {
        (Format::Json, _) => report.to_json(),
        (Format::Csv, Table::Handshakes) => handshakes_csv(&[&report])?,
        (Format::Csv, Table::Belief) => belief_trace_csv(&report)?,
    };
    // Byte for byte what was written, so it can be diffed or hashed.
    print!("{text}");
    Ok(())
}

fn serve(args: ServeArgs) -> anyhow::Result<()> {
    let config = load_config(&args.config)?;
    let store = SessionStore::open(StoreConfig {
        config,
        data_dir: args.data_dir,
        max_sessions: args.max_sessions,
    })
    .map_err(|e| Exit::Config(e.to_string()))?;
    let opts = RouterOptions {
        cors_origin: args.cors_origin,
    };
    tokio::runtime::Runtime::new()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&args.addr)
            .await
            .with_context(|| format!("binding {}", args.addr))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        pawshake_service::serve(listener, Arc::new(store), opts).await?;
        Ok(())
    })
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::Batch(a) => batch(a),
        Command::Report(a) => report(a),
        Command::Serve(a) => serve(a),
        Command::Config => {
            println!("{}", Config::default().canonical_json());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Exit>() {
                Some(Exit::Config(_)) => ExitCode::from(EXIT_CONFIG),
                Some(Exit::BridgeTimeout(_)) => ExitCode::from(EXIT_BRIDGE_TIMEOUT),
                None => ExitCode::FAILURE,
            }
        }
    }
}
