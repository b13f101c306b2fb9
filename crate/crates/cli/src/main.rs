//! `curvemax` batch driver: every operation of the library as a subcommand
//! reading a TOML config and writing CSV/JSON into an output directory.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use curvemax::Error;

use commands::Run;

/// Default output directory when neither `--out` nor `out_dir` is given.
const OUT_DIR_ENV: &str = "CURVEMAX_OUT_DIR";

#[derive(Parser)]
#[command(name = "curvemax", version, about = "Maximal function experiments along tangential curves")]
struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config file for the subcommand.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out_dir` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample u on a space-time grid.
    Evolve(Common),
    /// Maximal profiles per radius and regime.
    Maxscan(Common),
    /// Norm-ratio sweep over R and exponent fit.
    Sweep(Common),
    /// Cube-set construction and density audits.
    Audit(Common),
    /// Stability ratio sweep.
    Stability(Common),
    /// Quick internal consistency checks.
    Selftest(SelftestArgs),
}

type Action = fn(&Run) -> curvemax::Result<()>;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation(_) | Error::Domain(_) => 2,
        Error::Budget { .. } => 3,
        Error::Io(_) => 4,
        Error::Structural(_) | Error::UndefinedRatio(_) => 1,
    }
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn run(cli: Cli) -> curvemax::Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Error::validation("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::validation(format!("thread pool: {e}")))?;
    }
    let (config, out, action): (Option<PathBuf>, Option<PathBuf>, Action) =
        match cli.command {
            Command::Evolve(c) => (Some(c.config), c.out, commands::evolve),
            Command::Maxscan(c) => (Some(c.config), c.out, commands::maxscan),
            Command::Sweep(c) => (Some(c.config), c.out, commands::sweep),
            Command::Audit(c) => (Some(c.config), c.out, commands::audit),
            Command::Stability(c) => (Some(c.config), c.out, commands::stability),
            Command::Selftest(c) => (c.config, c.out, commands::selftest),
        };
    let flag_given = out.is_some();
    let config_text = match config {
        Some(path) => std::fs::read_to_string(&path).map_err(|e| {
            Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
        })?,
        None => String::new(),
    };
    let run = Run {
        out_dir: out_dir(out),
        config_text,
        flag_given,
    };
    action(&run)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
