use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use freqlab::cli::{self, exit, Axis, CliError, RunOptions};

/// Frequency-function experiments driven by scenario files.
#[derive(Parser)]
#[command(name = "freqlab", version)]
struct Args {
    /// Quadrature refinement level (overrides the scenario).
    #[arg(long, global = true)]
    levels: Option<u32>,
    /// Output base directory [env: FREQLAB_OUT_DIR].
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Seed recorded with the run (overrides the scenario).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweep points.
    #[arg(long, global = true, default_value_t = 1)]
    parallel: usize,
    /// Record wall-clock time in manifests.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task of a scenario.
    Run { scenario: PathBuf },
    /// Run a scenario over the cartesian product of parameter axes.
    Sweep {
        scenario: PathBuf,
        /// `path=v1,v2,...`, e.g. `solution.m=1,4,16`; repeatable.
        #[arg(long = "axis", required = true)]
        axes: Vec<Axis>,
    },
    /// Parse and validate a scenario without running it.
    Validate { scenario: PathBuf },
}

fn report(e: &CliError) -> ExitCode {
    let err = e.error();
    eprintln!("freqlab: error [{}]: {err}", err.code());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let args = Args::parse();
    let opts = RunOptions {
        levels: args.levels,
        out_dir: args.out_dir,
        seed: args.seed,
        timing: args.timing,
    };
    match args.command {
        Command::Validate { scenario } => match cli::validate_file(&scenario) {
            Ok(s) => {
                eprintln!("{}: valid, {} task(s)", s.name, s.tasks.len());
                ExitCode::from(exit::PASS as u8)
            }
            Err(e) => report(&e),
        },
        Command::Run { scenario } => match cli::run_file(&scenario, &opts) {
            Ok(m) => {
                for t in &m.tasks {
                    eprintln!("{:>3} {:<14} {:?}", t.index, t.label, t.verdict);
                }
                ExitCode::from(m.exit_code() as u8)
            }
            Err(e) => report(&e),
        },
        Command::Sweep { scenario, axes } => {
            match cli::sweep_file(&scenario, &axes, &opts, args.parallel.max(1)) {
                Ok(m) => {
                    for p in &m.points {
                        eprintln!("{:>3} {:?} {:?}", p.index, p.values, p.verdict);
                    }
                    ExitCode::from(m.exit_code() as u8)
                }
                Err(e) => report(&e),
            }
        }
    }
}
