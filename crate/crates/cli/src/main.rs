//! `vlx`: command-line front end for vlx-core.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vlx_core::VlxError;

use config::RunConfig;
use output::Format;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl From<VlxError> for CliError {
    fn from(e: VlxError) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "vlx", version, about = "Riccati-Volterra solvers and limit laws for rescaled rough Heston models")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config file, or a JSON summary written by an earlier run
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// output directory
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// time steps for VIE solves
    #[arg(long, global = true)]
    steps: Option<usize>,

    /// comma-separated decreasing epsilon values
    #[arg(long, global = true, value_delimiter = ',')]
    eps_ladder: Option<Vec<f64>>,

    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// psi_eps against psi0 for the step forcing, optionally along an epsilon ladder
    Figure1,
    /// solve one Riccati-Volterra equation
    VieSolve,
    /// tabulate psi0 = Lambda^{-1}(-f)
    Psi0,
    /// finite-dimensional log-mgf along an epsilon ladder against its subordinator limit
    Mgf,
    /// Laplace transform of first-passage times of a spectrally negative process
    Hitting,
    /// Monte Carlo oracles against analytic and VIE values
    McValidate,
    /// evaluate the Mittag-Leffler function
    MlEval,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.steps {
        cfg.steps = n;
    }
    if let Some(l) = &cli.eps_ladder {
        cfg.eps_ladder = l.clone();
    }
    cfg.validate()?;
    let report = match cli.command {
        Command::Figure1 => commands::figure1(&cfg)?,
        Command::VieSolve => commands::vie_solve(&cfg)?,
        Command::Psi0 => commands::psi0(&cfg)?,
        Command::Mgf => commands::mgf(&cfg)?,
        Command::Hitting => commands::hitting(&cfg)?,
        Command::McValidate => commands::mc_validate(&cfg)?,
        Command::MlEval => commands::ml_eval(&cfg)?,
    };
    for p in output::write(&report, &cfg, &cli.out, cli.format)? {
        println!("wrote {}", p.display());
    }
    if report.command == "mc-validate" {
        print!("{}", report.table.to_csv());
    } else {
        println!("{}", serde_json::to_string_pretty(&report.results).unwrap_or_default());
    }
    match report.failed {
        Some(msg) => Err(CliError::Numerical(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vlx: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
