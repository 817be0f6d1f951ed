//! `sampler` command-line front end.
//!
//! Exit codes: 0 success, 1 one or more jobs failed, 2 configuration error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hadamard_langevin::harness::{self, report, HarnessError, Preset};

#[derive(Parser)]
#[command(name = "sampler", version, about = "Hadamard-Langevin experiments for l1 posteriors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `seed` in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for chain jobs (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory; beats the environment variable and the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the available presets.
    Presets,
    /// Parse and validate a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn config_failure(e: &HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Presets => {
            for p in Preset::ALL {
                println!("{:<12} {}", p.name(), p.description());
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match harness::parse_config(&config) {
            Ok(cfg) => {
                println!("ok: preset {} (config hash {})", cfg.preset, cfg.hash());
                ExitCode::SUCCESS
            }
            Err(e) => config_failure(&e),
        },
        Command::Run {
            config,
            seed,
            workers,
            out,
        } => {
            let mut cfg = match harness::parse_config(&config) {
                Ok(c) => c,
                Err(e) => return config_failure(&e),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if workers == Some(0) {
                eprintln!("error: --workers must be at least 1");
                return ExitCode::from(2);
            }
            cfg.output.dir = harness::resolve_output_dir(&cfg, out.as_deref());
            let result = hadamard_langevin::par::with_workers(workers, || harness::compute(&cfg));
            let report = match result {
                Ok(r) => r,
                Err(e) if e.is_config_error() => return config_failure(&e),
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let files = match report::write_report(&report, &cfg.output.dir) {
                Ok(f) => f,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            for f in &files {
                println!("{}", f.display());
            }
            let failed = report.failed_jobs();
            if failed > 0 {
                eprintln!("{failed} job(s) failed; see failures in summary.json");
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
    }
}
