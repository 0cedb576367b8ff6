mod commands;
mod config;
mod exit;
mod expr;

use clap::{Parser, Subcommand};
use commands::Ctx;
use config::{Config, Overrides, Scenario};
use exit::Failure;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "zkflat", version, about = "Flatness-based boundary control of the linear ZK equation")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Treat bound and compatibility violations as errors.
    #[arg(long, global = true)]
    strict: bool,
    /// Worker threads.
    #[arg(long, global = true, env = "ZKFLAT_THREADS")]
    threads: Option<usize>,
    /// Relative terminal tolerance for null and reach.
    #[arg(long, global = true)]
    tol_terminal: Option<f64>,
    #[arg(long = "imax", global = true)]
    i_max: Option<usize>,
    #[arg(long = "jmax", global = true)]
    j_max: Option<usize>,
    /// Precomputed generating-function table.
    #[arg(long, global = true)]
    table: Option<PathBuf>,
    /// Defaults to the `scenario` key of the configuration.
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the generating-function table and check its bound.
    Gentable,
    /// Steer the configured initial state to zero.
    Null,
    /// Steer zero to the configured target.
    Reach,
    /// Uncontrolled evolution with energy checks.
    Free,
    /// Simulate a control read from CSV.
    Simulate {
        /// Control CSV with columns t, y, h.
        #[arg(long)]
        control: Option<PathBuf>,
    },
    /// Table bound, constants, energy and smoothing diagnostics.
    Bounds,
    /// Long-format CSV copies of artifacts for plotting.
    Plotdata {
        #[arg(required = true)]
        artifacts: Vec<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(e.to_string()))?;
    }
    let overrides = Overrides {
        out: cli.out,
        tol_terminal: cli.tol_terminal,
        i_max: cli.i_max,
        j_max: cli.j_max,
        table: cli.table,
    };
    let mut cfg = Config::load(cli.config.as_deref(), &overrides)?;
    if let Some(Command::Simulate { control: Some(c) }) = &cli.command {
        cfg.control = Some(c.clone());
    }
    let command = match (cli.command, cfg.scenario) {
        (Some(c), _) => c,
        (None, Some(Scenario::Null)) => Command::Null,
        (None, Some(Scenario::Reach)) => Command::Reach,
        (None, Some(Scenario::Free)) => Command::Free,
        (None, Some(Scenario::Simulate)) => Command::Simulate { control: None },
        (None, Some(Scenario::Bounds)) => Command::Bounds,
        (None, None) => return Err(Failure::config("no subcommand given and no `scenario` in the configuration")),
    };
    let ctx = Ctx {
        hash: cfg.hash(),
        cfg,
        strict: cli.strict,
    };
    match &command {
        Command::Gentable => commands::gentable(&ctx),
        Command::Null => commands::null(&ctx),
        Command::Reach => commands::reach(&ctx),
        Command::Free => commands::free(&ctx),
        Command::Simulate { .. } => commands::simulate(&ctx),
        Command::Bounds => commands::bounds(&ctx),
        Command::Plotdata { artifacts } => commands::plotdata(&ctx, artifacts),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::CONFIG } else { 0 });
        }
    };
    let start = Instant::now();
    match run(cli) {
        Ok(()) => {
            eprintln!("done in {:.2} s", start.elapsed().as_secs_f64());
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
