//! `rerand`: allocate units, run simulation studies and inspect spectra.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

mod allocate;
mod diagnose;
mod schema;
mod simulate;

#[derive(Parser, Debug)]
#[command(name = "rerand", version, about = "Rerandomization for two-arm experiments")]
struct Cli {
    /// Print the columns of every output file and exit
    #[arg(long)]
    schema: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw an allocation for the units in a covariate CSV
    Allocate(AllocateArgs),
    /// Run a simulation study described by a TOML config
    Simulate(SimulateArgs),
    /// Spectrum, shrinkage coefficients and per-covariate variance reductions
    Diagnose(DiagnoseArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeArg {
    Cr,
    Rer,
    Ridge,
    Pca,
}

/// Settings shared by `allocate` and `diagnose`.
#[derive(Args, Debug, Clone)]
pub struct SchemeOpts {
    #[arg(long, value_enum, default_value_t = SchemeArg::Pca)]
    pub scheme: SchemeArg,

    /// Acceptance probability
    #[arg(long = "pa", default_value_t = 0.05)]
    pub p_a: f64,

    /// Cumulative variance fraction used to pick k
    #[arg(long, default_value_t = 0.95)]
    pub gamma: f64,

    /// Ridge penalty: a number or "auto"
    #[arg(long, default_value = "auto")]
    pub lambda: String,

    /// Master seed; drawn from system entropy and printed when absent
    #[arg(long)]
    pub seed: Option<u64>,

    /// Allow odd n with one extra treated unit
    #[arg(long)]
    pub near_equal: bool,
}

impl SchemeOpts {
    pub fn lambda(&self) -> Result<Option<f64>> {
        if self.lambda.eq_ignore_ascii_case("auto") {
            return Ok(None);
        }
        let v: f64 = self
            .lambda
            .parse()
            .with_context(|| format!("--lambda must be a number or \"auto\", got {:?}", self.lambda))?;
        if !(v >= 0.0 && v.is_finite()) {
            bail!("--lambda must be finite and >= 0, got {v}");
        }
        Ok(Some(v))
    }
}

#[derive(Args, Debug)]
pub struct AllocateArgs {
    /// Covariate CSV: header row of names, one unit per row
    #[arg(long)]
    pub input: PathBuf,

    /// Output directory
    #[arg(long)]
    pub out: PathBuf,

    #[command(flatten)]
    pub opts: SchemeOpts,

    /// Give up after this many candidate draws and keep the best one
    #[arg(long, default_value_t = rerand::engine::DEFAULT_MAX_DRAWS)]
    pub max_draws: u64,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Study config (TOML)
    #[arg(long)]
    pub config: PathBuf,

    /// Output directory
    #[arg(long)]
    pub out: PathBuf,

    /// Override the seed in the config
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    /// Covariate CSV
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    pub input: Option<PathBuf>,

    /// Synthetic equicorrelated covariates as n,d,rho
    #[arg(long)]
    pub synthetic: Option<String>,

    /// Output directory
    #[arg(long)]
    pub out: PathBuf,

    #[command(flatten)]
    pub opts: SchemeOpts,
}

/// The given seed, or a fresh one announced on stdout.
pub fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        println!("seed: {s}");
        s
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match (&cli.command, cli.schema) {
        (_, true) => {
            print!("{}", schema::text());
            Ok(())
        }
        (Some(Command::Allocate(a)), _) => allocate::run(a),
        (Some(Command::Simulate(a)), _) => simulate::run(a),
        (Some(Command::Diagnose(a)), _) => diagnose::run(a),
        (None, false) => {
            eprintln!("error: a subcommand is required (see --help)");
            return ExitCode::from(2);
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
