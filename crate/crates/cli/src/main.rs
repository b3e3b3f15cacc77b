use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ipsl_core::config::parse_config;
use ipsl_core::runner::execute;
use ipsl_core::IpslError;

/// Run an influence-structure experiment described by a config file.
#[derive(Debug, Parser)]
#[command(name = "ipsl", version)]
struct Args {
    /// Experiment config (`key = value` lines under `[section]` headers).
    config: PathBuf,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Replication count; overrides `replications`.
    #[arg(long)]
    replications: Option<usize>,
    /// Worker threads, 0 for all available; overrides `threads`.
    #[arg(long)]
    threads: Option<usize>,
}

fn run(args: Args) -> Result<Vec<PathBuf>, IpslError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|source| IpslError::Io { path: args.config.clone(), source })?;
    let mut config = parse_config(&text)?;
    if let Some(out) = args.out {
        config.output_dir = out;
    }
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(n) = args.replications {
        config.replications = n;
    }
    if let Some(n) = args.threads {
        config.threads = n;
    }
    config.validate()?;
    execute(&config)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config_path = args.config.clone();
    match run(args) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("ipsl: {}: {e}", config_path.display());
            match e {
                IpslError::Io { .. } => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
