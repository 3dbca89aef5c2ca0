use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use drmdp::estimation::CountTensor;
use drmdp::estimation::per_state_sample_counts;
use drmdp_cli::error::CliError;
use drmdp_cli::experiment::Overrides;
use drmdp_cli::ingest::{ingest_episodes, parse_dims};
use serde_json::json;

#[derive(Parser)]
#[command(name = "drmdp", version, about = "Wasserstein distributionally robust MDP experiments")]
struct Cli {
    /// Worker threads for parallel solvers (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// JSON-lines output file (appended); overrides the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
    /// Read an episode CSV and print a per-episode summary.
    Ingest {
        csv: PathBuf,
        /// `S,A`.
        #[arg(long)]
        dims: String,
    },
}

fn ingest(csv: &Path, dims: &str) -> Result<(), CliError> {
    let (s, a) = parse_dims(dims)?;
    let logs = ingest_episodes(csv, s, a)?;
    let counts = logs
        .iter()
        .map(|l| CountTensor::from_log(l, s, a))
        .collect::<drmdp::Result<Vec<_>>>()
        .map_err(|e| CliError::solver("estimation", e))?;
    let per_state = per_state_sample_counts(&counts).map_err(|e| CliError::solver("estimation", e))?;
    let episodes: Vec<_> = logs
        .iter()
        .map(|l| json!({"episode": l.episode_id, "transitions": l.len()}))
        .collect();
    println!("{}", json!({"episodes": episodes, "per_state_counts": per_state}));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Run { config, seed, out } => drmdp_cli::run(
            config,
            &Overrides {
                seed: *seed,
                output: out.clone(),
            },
        ),
        Command::Validate { config } => drmdp_cli::validate(config).map(|_| {
            println!("{}: ok", config.display());
            0
        }),
        Command::Ingest { csv, dims } => ingest(csv, dims).map(|_| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
