//! `pohozaev` command-line front end.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 usage error,
//! 3 solver failure or non-convergence.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};

use config::{BranchChoice, Command, RunConfig};

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum ConfigFormat {
    Pairs,
    Json,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Solver(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Solver(m) => write!(f, "solver error: {m}"),
        }
    }
}

impl From<pohozaev::Error> for CliError {
    fn from(e: pohozaev::Error) -> Self {
        use pohozaev::Error as E;
        match e {
            E::Parameter(_) | E::DegenerateInput(_) | E::OutOfDomain(_) => CliError::Usage(e.to_string()),
            E::Singular(_) | E::InfeasibleBranch(_) | E::Convergence(_) => CliError::Solver(e.to_string()),
        }
    }
}

/// What a command produced: a rendered document and whether it should be
/// reported as a failure.
pub struct Output {
    pub body: String,
    pub status: Status,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    CheckFailed,
    NotConverged,
}

#[derive(Parser, Debug)]
#[command(name = "pohozaev", version, about = "Normalized solutions with combined power nonlinearities")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args, Debug)]
struct Flags {
    /// Config file (key = value or JSON); its entries override flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    q: Option<f64>,
    /// Upper exponent; defaults to the critical exponent 2N/(N-2).
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    mass: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long = "grid-R")]
    grid_radius: Option<f64>,
    #[arg(long = "grid-M")]
    grid_intervals: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    #[arg(long = "p-seq", value_delimiter = ',')]
    p_seq: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    branch: Option<BranchChoice>,
    /// Extremal estimate; `solve` rejects couplings above it.
    #[arg(long = "mu-star")]
    mu_star: Option<f64>,
    /// `|grad u|_2^2` of the norm triple.
    #[arg(long = "A")]
    grad2: Option<f64>,
    /// `|u|_q^q` of the norm triple.
    #[arg(long = "B")]
    massq: Option<f64>,
    /// `|u|_p^p` of the norm triple.
    #[arg(long = "C")]
    massp: Option<f64>,
    /// Radial function JSON file, as an alternative to the triple.
    #[arg(long)]
    function: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    masses: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    mus: Option<Vec<f64>>,
    #[arg(long = "t-grid", value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,
    #[arg(long = "dual-R")]
    dual_radius: Option<f64>,
    #[arg(long = "dual-M")]
    dual_intervals: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Print the resolved configuration (`pairs` or `json`) and exit.
    #[arg(long = "print-config", value_name = "FORMAT")]
    print_config: Option<ConfigFormat>,
}

fn resolve(cli: Cli) -> Result<(RunConfig, Option<ConfigFormat>), CliError> {
    let f = cli.flags;
    let mut cfg = RunConfig { command: cli.command, ..RunConfig::default() };
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = f.$field { cfg.$field = v; } )* };
    }
    macro_rules! set_opt {
        ($($field:ident),*) => { $( if f.$field.is_some() { cfg.$field = f.$field; } )* };
    }
    set!(dim, mass, grid_radius, grid_intervals, tol, max_iter, p_seq, branch, masses, mus, t_grid, dual_radius, dual_intervals, seed, workers);
    set_opt!(q, p, mu, mu_star, grad2, massq, massp, function, out);
    if let Some(path) = &f.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        cfg.merge_text(&text)?;
        // the command named on the command line wins
        cfg.command = cli.command;
    }
    Ok((cfg, f.print_config))
}

fn emit(cfg: &RunConfig, body: &str) -> Result<(), CliError> {
    match &cfg.out {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> Result<Status, CliError> {
        let (cfg, print) = resolve(cli)?;
        match print {
            Some(ConfigFormat::Pairs) => {
                print!("{}", cfg.to_pairs());
                return Ok(Status::Ok);
            }
            Some(ConfigFormat::Json) => {
                println!("{}", cfg.to_json());
                return Ok(Status::Ok);
            }
            None => {}
        }
        let out = commands::run(&cfg)?;
        emit(&cfg, &out.body)?;
        Ok(out.status)
    };
    match run() {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::CheckFailed) => ExitCode::from(1),
        Ok(Status::NotConverged) => ExitCode::from(3),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
