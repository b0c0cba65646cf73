//! `zonegov` command line: run scenarios headless and work with frames.
//!
//! Exit status: 0 on success, 2 for bad input (usage, unreadable or invalid
//! scenario, malformed frame), 1 for anything else.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use zonegov::codec::{decode_hex, encode_frame, CodecError, Payload};
use zonegov::scenario::default_scenario;
use zonegov::{run_scenario, Scenario, ScenarioError};

#[derive(Parser)]
#[command(name = "zonegov", version, about = "Zone speed governor simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and print its metrics summary.
    Run {
        scenario: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the run length in seconds.
        #[arg(long)]
        duration: Option<f64>,
        /// Write the event trace to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scenario file without running it.
    Validate { scenario: PathBuf },
    /// Print the built-in example scenario.
    Example,
    /// Encode or decode a single frame.
    Frame {
        #[command(subcommand)]
        op: FrameOp,
    },
}

#[derive(Subcommand)]
enum FrameOp {
    /// Encode an address and data nibble, e.g. `encode 0xA5 0x3`.
    Encode {
        #[arg(value_parser = parse_int::<u16>)]
        address: u16,
        #[arg(value_parser = parse_int::<u8>)]
        data: u8,
    },
    /// Decode a four-hex-digit frame, e.g. `decode 5A53`.
    Decode { frame: String },
}

fn parse_int<T: TryFrom<u64>>(text: &str) -> Result<T, String> {
    let value = match text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => text.parse::<u64>(),
    }
    .map_err(|e| format!("{text:?}: {e}"))?;
    T::try_from(value).map_err(|_| format!("{text:?} is too large"))
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Internal(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<CodecError> for CliError {
    fn from(e: CodecError) -> Self {
        CliError::Input(e.to_string())
    }
}

fn load(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Scenario::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn describe(payload: Payload) -> String {
    match payload.symbol() {
        Ok(s) => format!(
            "symbol {} ({} {}) honk_free {}",
            s.as_char(),
            s.zone_kind().as_str(),
            match s.command() {
                zonegov::codec::Command::Active => "active",
                zonegov::codec::Command::Release => "release",
            },
            payload.honk_free
        ),
        Err(_) => format!(
            "no symbol (index {}) honk_free {}",
            payload.symbol_index, payload.honk_free
        ),
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            scenario,
            seed,
            duration,
            out,
        } => {
            let mut s = load(&scenario)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            if let Some(d) = duration {
                if !(d.is_finite() && d > 0.0) {
                    return Err(CliError::Input(format!("--duration must be positive, got {d}")));
                }
            }
            let output = run_scenario(&s, duration)?;
            if let Some(path) = out {
                std::fs::write(&path, output.trace_text())
                    .map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))?;
            }
            println!("{}", output.metrics.summary());
        }
        Command::Validate { scenario } => {
            let s = load(&scenario)?;
            println!(
                "ok: {} zones, {} vehicles, {} obstacles, {} commands",
                s.zones.len(),
                s.vehicles.len(),
                s.obstacles.len(),
                s.commands.len()
            );
        }
        Command::Example => print!("{}", default_scenario().to_toml()),
        Command::Frame {
            op: FrameOp::Encode { address, data },
        } => {
            println!("{}", encode_frame(address, data)?.to_hex());
        }
        Command::Frame {
            op: FrameOp::Decode { frame },
        } => {
            let f = decode_hex(&frame)?;
            println!(
                "addr {:02X} data {:X} {}",
                f.address,
                f.data,
                describe(Payload::unpack(f.data))
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Input(_) => ExitCode::from(2),
                CliError::Internal(_) => ExitCode::from(1),
            }
        }
    }
}
