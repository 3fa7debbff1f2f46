use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;

use commands::Context;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] pmgate_core::Error),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numeric() => 3,
            CliError::Numeric(_) => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override a config value by dotted path, e.g. gate_sweep.gate.order=2.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides the config's "output").
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, env = "PMGATE_THREADS")]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pauli components of one gate design over Ω/ωm (and detuning).
    GateSweep(Common),
    /// Compare concatenation orders at fixed εm or fixed bandwidth.
    ConcatCompare(Common),
    /// Per-site fidelities and crosstalk of a gate over an array.
    LatticeMap(Common),
    /// Multi-tone parallel gates over an array.
    ParallelSim(Common),
    /// Four-level light-shift scheme: analytic rates, traces or shift scans.
    Lightshift(Common),
    /// Worst-case infidelity under atom position spread, per order.
    FidelityReport(Common),
}

#[derive(Debug, Parser)]
#[command(name = "pmgate", version, about = "Phase-modulated single-qubit gate sweeps and crosstalk reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::GateSweep(c)
        | Command::ConcatCompare(c)
        | Command::LatticeMap(c)
        | Command::ParallelSim(c)
        | Command::Lightshift(c)
        | Command::FidelityReport(c) => c,
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let loaded = config::load(&common.config, &common.set)?;
    let cfg = loaded.config;
    let ctx = Context {
        units: cfg.units,
        hash: loaded.hash,
        out: common.out.clone().or(cfg.output.clone()).unwrap_or_else(|| PathBuf::from(".")),
        format: common.format,
        options: cfg.options,
    };
    let missing = |name: &str| CliError::Config(format!("config has no '{name}' block"));
    match &cli.command {
        Command::GateSweep(_) => commands::gate_sweep(&ctx, cfg.gate_sweep.as_ref().ok_or_else(|| missing("gate_sweep"))?),
        Command::ConcatCompare(_) => {
            commands::concat_compare(&ctx, cfg.concat_compare.as_ref().ok_or_else(|| missing("concat_compare"))?)
        }
        Command::LatticeMap(_) => commands::lattice_map(&ctx, cfg.lattice_map.as_ref().ok_or_else(|| missing("lattice_map"))?),
        Command::ParallelSim(_) => {
            commands::parallel_sim(&ctx, cfg.parallel_sim.as_ref().ok_or_else(|| missing("parallel_sim"))?)
        }
        Command::Lightshift(_) => commands::lightshift(&ctx, cfg.lightshift.as_ref().ok_or_else(|| missing("lightshift"))?),
        Command::FidelityReport(_) => {
            commands::fidelity_report(&ctx, cfg.fidelity_report.as_ref().ok_or_else(|| missing("fidelity_report"))?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
