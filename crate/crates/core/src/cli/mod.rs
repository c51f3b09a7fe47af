//! Command-line front end.

use std::path::PathBuf;

use clap::Parser;

use crate::error::{Error, Result};

pub mod config;
pub mod run;

pub use config::{parse_config, AlgorithmChoice, Command, Format, RunConfig};
pub use run::{execute, write_atomic, Artifact};

#[derive(Debug, Parser)]
#[command(name = "excursion", version, about = "Rare-event estimation for Gaussian random field excursions")]
pub struct Args {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed, replacing `run.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path, replacing `output.path`. Without either, the document
    /// goes to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format, replacing `output.format`.
    #[arg(long, value_parser = ["json", "csv"])]
    pub format: Option<String>,
    /// Worker threads; changes speed only, never results.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Write null wall-clock times so reruns are byte-identical.
    #[arg(long)]
    pub no_timing: bool,
}

/// Loads the configuration, applies flag overrides and runs it.
pub fn run_with_args(args: &Args) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut config = parse_config(&text)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(format) = &args.format {
        config.format = format.parse()?;
    }
    if let Some(out) = &args.out {
        config.output_path = Some(out.clone());
    }
    let artifact = match args.threads {
        Some(0) => return Err(Error::config("--threads", "must be at least 1")),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Internal(e.to_string()))?
            .install(|| execute(&config, !args.no_timing))?,
        None => execute(&config, !args.no_timing)?,
    };
    match &config.output_path {
        Some(path) => {
            write_atomic(path, &artifact.document)?;
            println!("{} -> {}", artifact.summary, path.display());
        }
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&artifact.document)?;
            eprintln!("{}", artifact.summary);
        }
    }
    Ok(())
}

/// Process exit code for `result`, reporting any error on standard error.
pub fn exit_code(result: &Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.category());
            e.exit_code()
        }
    }
}
