use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;
use wedo_core::scenario::{run_scenario, Adapter, ScenarioError};
use wedo_core::scheduler::WallClock;
use wedo_core::EngineConfig;
use wedo_server::{router, Service, ServiceOptions, TransportKind};

#[derive(Parser)]
#[command(name = "wedo", version, about = "Collective-action mission engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run transport ingest, the scheduler and the HTTP API together.
    Serve {
        #[arg(long, env = "WEDO_LISTEN", default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        #[arg(long, env = "WEDO_DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
        /// TOML engine configuration; `WEDO_*` variables override it.
        #[arg(long, env = "WEDO_CONFIG")]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "sim")]
        transport: TransportKind,
        /// Endpoint receiving outbound posts (webhook transport only).
        #[arg(long, env = "WEDO_WEBHOOK_URL")]
        webhook_url: Option<String>,
        /// Directory of static client assets served at `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Execute a scenario script headlessly; exits 1 if any expectation fails.
    RunScenario {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "sim")]
        adapter: ScenarioAdapter,
        /// Keep the mission data here instead of a temporary directory.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ScenarioAdapter {
    Sim,
    Webhook,
}

fn load_config(path: Option<&PathBuf>) -> anyhow::Result<EngineConfig> {
    let base = match path {
        Some(p) => EngineConfig::load(p)?,
        None => EngineConfig::default(),
    };
    Ok(base.with_env(std::env::vars())?)
}

async fn serve(
    listen: SocketAddr,
    opts: ServiceOptions,
    static_dir: Option<PathBuf>,
) -> anyhow::Result<()> {
    let mut service = Service::open(opts, Arc::new(WallClock::new()), true)?;
    let app = router(service.state.clone(), static_dir);
    let listener = tokio::net::TcpListener::bind(listen)
        .await
        .with_context(|| format!("binding {listen}"))?;
    tracing::info!(%listen, "serving");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    service.shutdown();
    Ok(())
}

fn scenario(file: &PathBuf, adapter: ScenarioAdapter, data_dir: Option<PathBuf>) -> anyhow::Result<bool> {
    let script = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let adapter = match adapter {
        ScenarioAdapter::Sim => Adapter::Sim,
        ScenarioAdapter::Webhook => Adapter::Webhook,
    };
    let tmp;
    let dir = match data_dir {
        Some(d) => d,
        None => {
            tmp = tempfile::tempdir()?;
            tmp.path().to_path_buf()
        }
    };
    match run_scenario(&script, &dir, adapter) {
        Ok(outcome) => {
            print!("{}", outcome.report_text());
            Ok(outcome.passed())
        }
        Err(e @ ScenarioError::MalformedScript { .. }) => Err(e.into()),
        Err(e) => Err(anyhow::Error::new(e).context(format!("running {}", file.display()))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // scenario reports go to stdout; keep stderr quiet unless asked
    let default_level = match cli.command {
        Command::Serve { .. } => "info",
        Command::RunScenario { .. } => "warn",
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default_level)))
        .with_writer(std::io::stderr)
        .init();
    let result = match cli.command {
        Command::Serve {
            listen,
            data_dir,
            config,
            transport,
            webhook_url,
            static_dir,
        } => load_config(config.as_ref()).and_then(|config| {
            let opts = ServiceOptions {
                data_dir,
                config,
                transport,
                webhook_url,
            };
            tokio::runtime::Runtime::new()?.block_on(serve(listen, opts, static_dir))
        }),
        Command::RunScenario { file, adapter, data_dir } => match scenario(&file, adapter, data_dir) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::FAILURE,
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
