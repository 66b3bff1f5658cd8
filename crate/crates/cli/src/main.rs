//! `ladder-eit` command-line interface.

// `!(x > 0)` rejects NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ladder_eit::experiments::Mode;

#[derive(Parser)]
#[command(name = "ladder-eit", version, about = "Single-atom EIT in an open transmission line")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transmission spectrum versus probe detuning (CSV).
    Spectrum(Common),
    /// Power transmission over probe detuning and control amplitude (long CSV).
    Map(Common),
    /// Resonant power transmission versus control amplitude, with contrast.
    Extinction(Common),
    /// Time evolution of level populations and the probe coherence (CSV).
    Evolve(Common),
    /// Fit a transmission trace.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Trace CSV (e.g. the output of `spectrum`).
        #[arg(long)]
        trace: PathBuf,
    },
    /// Derived atom quantities and parameter checks.
    AtomInfo(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML). Defaults to the reference device.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Transmission evaluation, overriding the config.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Random seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Analytic,
    Numeric,
}

#[derive(Debug)]
pub enum CliError {
    Config(config::ConfigError),
    Domain(String),
    Io(String),
}

impl CliError {
    fn class(&self) -> &'static str {
        match self {
            CliError::Config(_) => "ConfigError",
            CliError::Domain(_) => "DomainError",
            CliError::Io(_) => "IoError",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(e) => e.to_string(),
            CliError::Domain(m) | CliError::Io(m) => m.clone(),
        }
    }
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load(common: &Common) -> Result<config::RunConfig, CliError> {
    let text = match &common.config {
        Some(p) => read(p)?,
        None => String::new(),
    };
    let mut cfg = config::parse(&text).map_err(CliError::Config)?;
    if let Some(m) = common.mode {
        cfg.mode = match m {
            ModeArg::Analytic => Mode::WeakProbeAnalytic,
            ModeArg::Numeric => Mode::FullNumeric,
        };
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, result) = match &cli.command {
        Command::Spectrum(c) => (c, load(c).and_then(|cfg| commands::spectrum(&cfg))),
        Command::Map(c) => (c, load(c).and_then(|cfg| commands::map(&cfg))),
        Command::Extinction(c) => (c, load(c).and_then(|cfg| commands::extinction(&cfg))),
        Command::Evolve(c) => (c, load(c).and_then(|cfg| commands::evolve(&cfg))),
        Command::AtomInfo(c) => (c, load(c).and_then(|cfg| commands::atom_info(&cfg))),
        Command::Fit { common, trace } => (common, load(common).and_then(|cfg| commands::fit(&cfg, &read(trace)?))),
    };
    let output = result?;
    match &common.out {
        Some(path) => {
            std::fs::write(path, output.body.as_bytes())
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        }
        None => {
            use std::io::Write;
            std::io::stdout().write_all(output.body.as_bytes()).map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    if let Some(s) = output.summary {
        eprintln!("{s}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error_class={} message={:?}", e.class(), e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
