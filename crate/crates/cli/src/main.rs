use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ghd_cli::output::OutDir;
use ghd_cli::{run, CliError, Command, RunConfig};

/// Generalized hydrodynamics through the fixed-point formulation.
#[derive(Debug, Parser)]
#[command(name = "ghd", version)]
struct Args {
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, env = "GHD_WORKERS")]
    workers: Option<usize>,
    /// Output directory for the artifacts.
    #[arg(long, default_value = "ghd-out")]
    out: PathBuf,
}

fn execute(args: &Args) -> Result<String, CliError> {
    if let Some(n) = args.workers {
        if n == 0 {
            return Err(CliError::invalid("--workers must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::invalid(e.to_string()))?;
    }
    let cfg = RunConfig::load(&args.config)?;
    let mut out = OutDir::create(&args.out)?;
    let summary = run(args.command, &cfg, &mut out);
    for p in out.written() {
        eprintln!("wrote {}", p.display());
    }
    summary
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
