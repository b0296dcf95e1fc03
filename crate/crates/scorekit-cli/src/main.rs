//! `scorekit` — batch front door to the solver library. Reads one TOML
//! config per experiment, dispatches to the engines, and writes
//! reproducible reports (JSON records, CSV tables, plain-text summary).
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

mod config;
mod report;
mod run;

use config::{ExperimentConfig, Subcmd};

/// Environment variable naming the default output directory.
const OUT_DIR_ENV: &str = "SCOREKIT_OUT_DIR";

#[derive(Parser)]
#[command(name = "scorekit", version, about = "Cheap-talk score solver and audit toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment a config describes.
    Solve(JobArgs),
    /// Check a hand-written score (mode = "audit" configs).
    Audit(JobArgs),
    /// Run the config across the parameter grids in its [sweep] section.
    Sweep(JobArgs),
}

#[derive(Args)]
struct JobArgs {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Where to write reports. Overrides the config and SCOREKIT_OUT_DIR.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// RNG seed; overrides solver.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = library default); overrides solver.threads.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match &cli.cmd {
        Cmd::Solve(a) => (Subcmd::Solve, a),
        Cmd::Audit(a) => (Subcmd::Audit, a),
        Cmd::Sweep(a) => (Subcmd::Sweep, a),
    };
    match drive(cmd, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(run::Failure::Config(messages)) => {
            eprintln!("configuration error:");
            for m in &messages {
                eprintln!("  - {m}");
            }
            ExitCode::from(2)
        }
        Err(run::Failure::Runtime(message)) => {
            eprintln!("numerical failure: {message}");
            ExitCode::from(3)
        }
    }
}

fn drive(cmd: Subcmd, args: &JobArgs) -> Result<(), run::Failure> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| {
        run::Failure::Config(vec![format!("reading {}: {e}", args.config.display())])
    })?;
    let mut cfg = ExperimentConfig::parse(&text)
        .map_err(|e| run::Failure::Config(vec![format!("parsing config: {e}")]))?;

    // Flag overrides land in the config before validation and hashing, so
    // provenance reflects what actually ran.
    if let Some(seed) = args.seed {
        cfg.solver.get_or_insert_with(Default::default).seed = Some(seed);
    }
    if let Some(threads) = args.threads {
        cfg.solver.get_or_insert_with(Default::default).threads = Some(threads);
    }

    configure_threads(cfg.solver().threads.unwrap_or(0));

    let bundle = run::execute(&cfg, cmd)?;

    let out_dir = args
        .out_dir
        .clone()
        .or_else(|| cfg.output.as_ref().and_then(|o| o.dir.clone()).map(PathBuf::from))
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("scorekit-out"));
    bundle
        .write(&out_dir, &cfg.formats())
        .map_err(run::Failure::Runtime)?;

    print!("{}", bundle.summary_text());
    Ok(())
}

/// Pins the worker pool size; engine parallelism follows the one global
/// setting. Without the `parallel` feature everything is sequential and
/// the setting is ignored.
#[cfg(feature = "parallel")]
fn configure_threads(threads: usize) {
    if threads > 0 {
        // Errors only if a pool already exists, which cannot happen this
        // early in main.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(_threads: usize) {}
