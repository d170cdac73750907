use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use opfield_cli::{load, run, Command, EXIT_CONFIG};

/// Simulate and test operator-scaling stable random fields.
#[derive(Debug, Parser)]
#[command(name = "opfield", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML experiment document.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    verbose: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Debug
        } else {
            log::LevelFilter::Warn
        })
        .parse_default_env()
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("opfield: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    let started = Instant::now();
    let cfg = match load(&cli.config, cli.command, cli.seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("opfield: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(&cfg, &cli.out) {
        Ok(outcome) => {
            println!(
                "opfield {}: {} config_hash=0x{:016x} seed={} elapsed={:.2}s",
                cli.command.as_str(),
                if outcome.pass { "pass" } else { "fail" },
                cfg.field.config_hash(),
                cfg.field.seed,
                started.elapsed().as_secs_f64()
            );
            for v in &outcome.verdicts {
                println!("  {v}");
            }
            for f in &outcome.files {
                println!("  wrote {}", f.display());
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("opfield: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
