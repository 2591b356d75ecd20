use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use tsallis_robust::scenario::{key_reference, parse_config, run};

#[derive(Parser)]
#[command(
    version,
    about = "Robust consumption and terminal wealth under Tsallis entropy on binomial lattices"
)]
#[command(after_help = key_reference())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and write CSV reports.
    #[command(after_help = key_reference())]
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        outdir: PathBuf,
        /// Overrides `seed` from the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let Command::Run {
        config,
        outdir,
        seed,
    } = cli.command;
    let mut cfg = match parse_config(&config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    match run(&cfg, &outdir) {
        Ok(out) => {
            let failed = out.checks.failures();
            eprintln!(
                "{}: {} checks, {} failed; wrote {}",
                cfg.mode,
                out.checks.rows().len(),
                failed,
                out.files.join(", ")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_non_convergence() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
