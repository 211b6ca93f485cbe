use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use snstf_cli::{run, CliError, RunConfig, RunOptions};

#[derive(Parser)]
#[command(name = "snstf", version, about = "Optimized finite-key rates for sending-or-not-sending twin-field QKD")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory (default: `out` from the config, else ./out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Skip points already recorded in the output manifest.
        #[arg(long)]
        resume: bool,
    },
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let Command::Run { config, out, seed, threads, resume } = cli.command;
    let text = std::fs::read_to_string(&config)
        .map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
    let cfg = RunConfig::parse(&text).with_context(|| format!("reading {}", config.display()))?;
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads {n}: {e}")))?;
    }
    let opts = RunOptions {
        out: out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
        seed: seed.unwrap_or(cfg.seed),
        resume,
    };
    let summary = run(&cfg, &opts)?;
    eprintln!(
        "{} points ({} resumed) written to {}",
        summary.points,
        summary.resumed,
        summary.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<CliError>().map_or(2, CliError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
