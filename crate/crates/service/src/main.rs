use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;
use tokio::net::TcpListener;
use tracing_subscriber::EnvFilter;
use zonegov::scenario::default_scenario;
use zonegov::Scenario;
use zonegov_service::{serve, EngineOptions, STREAM_CAPACITY};

#[derive(Parser, Debug)]
#[command(
    name = "zonegov-service",
    about = "HTTP control plane for the zone governor simulator"
)]
struct Args {
    /// Port to listen on.
    #[arg(long, env = "ZONEGOV_PORT", default_value_t = 8080)]
    port: u16,
    /// Address to bind.
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Zone config file. Loaded at start if present, rewritten on every change.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario to load instead of the built-in three-zone road.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Simulated seconds per wall-clock second.
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    /// Start paused instead of running.
    #[arg(long)]
    paused: bool,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let args = Args::parse();
    let scenario = match &args.scenario {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
            Scenario::parse(&text).with_context(|| path.display().to_string())?
        }
        None => default_scenario(),
    };
    let listener = TcpListener::bind((args.host.as_str(), args.port))
        .await
        .with_context(|| format!("bind {}:{}", args.host, args.port))?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    serve(
        listener,
        EngineOptions {
            scenario,
            config_path: args.config,
            speed: args.speed,
            start_running: !args.paused,
            stream_capacity: STREAM_CAPACITY,
        },
    )
    .await?;
    Ok(())
}
