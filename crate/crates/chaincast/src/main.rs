use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chaincast::{config, pipeline, CliError, Overrides};

#[derive(Parser)]
#[command(name = "chaincast", version, about = "Map bath spectral densities onto q-chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute chain coefficients, residual densities and the report.
    Run(JobArgs),
    /// Check a configuration and print it with defaults filled in.
    Validate(JobArgs),
}

#[derive(Args)]
struct JobArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `mapping_q`.
    #[arg(long)]
    q: Option<f64>,
    /// Overrides `sites`.
    #[arg(long)]
    sites: Option<usize>,
    /// Directory for relative output paths; defaults to the config's directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => job(&a).and_then(|j| {
            let dir = a.out_dir.clone().unwrap_or_else(|| j.base_dir.clone());
            let s = pipeline::run(&j, &dir)?;
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            for p in &s.written {
                println!("wrote {}", p.display());
            }
            Ok(())
        }),
        Command::Validate(a) => job(&a).map(|j| {
            println!("{}", serde_json::to_string_pretty(&j.config).expect("config serializes"));
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("chaincast: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn job(a: &JobArgs) -> Result<chaincast::ValidJob, CliError> {
    let o = Overrides { q: a.q, sites: a.sites };
    Ok(config::load(&a.config, &o)?)
}
