//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "qmce",
    version,
    about = "Quantum microcanonical density of states and thermodynamics",
    allow_negative_numbers = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate Ω(E) as `E,Omega`, knots included as extra rows.
    Dos(DosArgs),
    /// Tabulate `E,S,T,C` and list critical points.
    Thermo(ThermoArgs),
    /// Tabulate the canonical partition function as `beta,Z,U`.
    Canonical(CanonicalArgs),
    /// Compare a Monte Carlo histogram of Ω(E) with the exact density.
    McVerify(McVerifyArgs),
    /// Tabulate the three-level grand density as `p,q,Omega`.
    Grand(GrandArgs),
    /// Maximize the entropy of two systems exchanging energy.
    Equilibrate(EquilibrateArgs),
    /// Print the spectrum of a periodic Ising chain.
    Ising(IsingArgs),
}

/// Exactly one of `--levels`, `--spectrum` or `--ising`.
#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Comma-separated energies.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub levels: Option<Vec<f64>>,
    /// Comma-separated multiplicities matching `--levels`.
    #[arg(long, value_delimiter = ',', requires = "levels")]
    pub degeneracy: Option<Vec<usize>>,
    /// Spectrum file: one `<energy> [<multiplicity>]` per line.
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
    /// Use a periodic Ising chain; see `--spins`, `--J`, `--B`.
    #[arg(long)]
    pub ising: bool,
    #[command(flatten)]
    pub chain: ChainArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ChainArgs {
    /// Number of spins L.
    #[arg(long)]
    pub spins: Option<usize>,
    /// Nearest-neighbour coupling J.
    #[arg(long = "J", default_value_t = 0.0)]
    pub coupling: f64,
    /// External field B.
    #[arg(long = "B", default_value_t = 0.0)]
    pub field: f64,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a gnuplot script next to `--out`.
    #[arg(long, requires = "out")]
    pub gnuplot: bool,
}

#[derive(Debug, Args)]
pub struct DosArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Number of uniform grid points across the support.
    #[arg(long, default_value_t = 1000)]
    pub grid: usize,
}

#[derive(Debug, Args)]
pub struct ThermoArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Number of grid points.
    #[arg(long, default_value_t = 1000)]
    pub grid: usize,
    /// Lower end of an energy range strictly inside the support.
    #[arg(long, requires = "e_max", conflicts_with_all = ["t_min", "t_max"])]
    pub e_min: Option<f64>,
    #[arg(long, requires = "e_min")]
    pub e_max: Option<f64>,
    /// Lower end of a temperature range on the positive branch.
    #[arg(long, requires = "t_max")]
    pub t_min: Option<f64>,
    #[arg(long, requires = "t_min")]
    pub t_max: Option<f64>,
    /// Boltzmann constant used for display.
    #[arg(long, default_value_t = 1.0)]
    pub kb: f64,
    /// Critical-point CSV; defaults to `<out>_criticals.csv`, or standard
    /// error when writing to standard output.
    #[arg(long)]
    pub criticals: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CanonicalArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// A single inverse temperature.
    #[arg(long, conflicts_with_all = ["beta_min", "beta_max"], required_unless_present = "beta_min")]
    pub beta: Option<f64>,
    #[arg(long, requires = "beta_max")]
    pub beta_min: Option<f64>,
    #[arg(long, requires = "beta_min")]
    pub beta_max: Option<f64>,
    /// Number of β values between `--beta-min` and `--beta-max` inclusive.
    #[arg(long, default_value_t = 1000)]
    pub grid: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerArg {
    Exponential,
    Gaussian,
}

#[derive(Debug, Args)]
pub struct McVerifyArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 512)]
    pub bins: usize,
    #[arg(long, value_enum, default_value_t = SamplerArg::Exponential)]
    pub sampler: SamplerArg,
}

#[derive(Debug, Args)]
pub struct GrandArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Points per axis on the unit square (cell centres).
    #[arg(long, default_value_t = 200)]
    pub grid: usize,
    /// Also write the marginal `E,Omega` to this file.
    #[arg(long)]
    pub marginal: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EquilibrateArgs {
    /// Energies of system 1.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required_unless_present = "spectrum1"
    )]
    pub levels1: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', requires = "levels1")]
    pub degeneracy1: Option<Vec<usize>>,
    #[arg(long, conflicts_with = "levels1")]
    pub spectrum1: Option<PathBuf>,
    /// Energies of system 2.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required_unless_present = "spectrum2"
    )]
    pub levels2: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', requires = "levels2")]
    pub degeneracy2: Option<Vec<usize>>,
    #[arg(long, conflicts_with = "levels2")]
    pub spectrum2: Option<PathBuf>,
    /// Initial energy per constituent of system 1.
    #[arg(long)]
    pub e1: f64,
    #[arg(long)]
    pub e2: f64,
    /// Number of constituents of system 1.
    #[arg(long, default_value_t = 1)]
    pub n1: usize,
    #[arg(long, default_value_t = 1)]
    pub n2: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IsingArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
