use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sparseplq_core::data::{Covariance, NoiseDist, Signal};

#[derive(Debug, Parser)]
#[command(name = "sparseplq", version, about = "Zero-norm regularized LAD regression solvers", args_override_self = true)]
pub struct Cli {
    /// Print every default parameter as `key = value` lines and exit.
    #[arg(long, global = true)]
    pub show_defaults: bool,

    /// Read `key = value` lines from a file; explicit flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// Only print errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic instance file.
    Gen(GenArgs),
    /// Solve one instance.
    Solve(SolveArgs),
    /// Sweep the corruption rate or λ over seeded instances.
    Sweep(SweepArgs),
    /// Run the sparse-noise table protocol.
    Table1(Table1Args),
    /// Grid search of the smoothing parameter ε for iPADMM.
    EpsSearch(EpsSearchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SyntheticArgs {
    /// Number of observations.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Number of features.
    #[arg(long, default_value_t = 1000)]
    pub p: usize,
    /// Row covariance: `ar:R` or `cs:ALPHA`.
    #[arg(long, default_value = "ar:0.8", value_parser = parse_cov)]
    pub cov: Covariance,
    /// True signal: `fixed16` or `gauss:S:VAR`.
    #[arg(long, default_value = "fixed16", value_parser = parse_signal)]
    pub signal: Signal,
    /// Noise on corrupted rows: `gauss:VAR`, `t:SCALE:DOF`, `mn`, `laplace`,
    /// `cauchy` or `scaled-cauchy`.
    #[arg(long, default_value = "gauss:2", value_parser = parse_noise)]
    pub noise: NoiseDist,
    /// Fraction of corrupted observations |I|/n.
    #[arg(long, default_value_t = 0.1)]
    pub corrupt: f64,
    /// Seed of the ChaCha8 generator.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Redraw the noise until its max-norm is below this value.
    #[arg(long)]
    pub noise_cap: Option<f64>,
}

pub const SYNTHETIC_FLAGS: [&str; 8] = ["n", "p", "cov", "signal", "noise", "corrupt", "seed", "noise_cap"];

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Regularization λ; overrides the λ rule.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// λ rule factor c in max(floor, c·⫴A⫴₁/n).
    #[arg(long, default_value_t = 0.2)]
    pub lambda_factor: f64,
    /// λ rule floor.
    #[arg(long, default_value_t = 0.05)]
    pub lambda_floor: f64,
    /// Shape parameter a of the surrogate.
    #[arg(long, default_value_t = 6.0)]
    pub a: f64,
    /// Ridge weight μ.
    #[arg(long, default_value_t = 1e-8)]
    pub mu: f64,
    /// Penalty ρ; overrides the rule based on ‖x⁰‖∞.
    #[arg(long)]
    pub rho: Option<f64>,
    /// PMM stopping tolerance on Err_k.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Err_k level at which a stable support also stops PMM.
    #[arg(long, default_value_t = 1e-4)]
    pub tol_sparse: f64,
    /// PMM iteration limit.
    #[arg(long, default_value_t = 200)]
    pub k_max: usize,
    /// Initial inner tolerance (decays by 0.8 to 1e-6).
    #[arg(long, default_value_t = 1e-5)]
    pub eps_sncg: f64,
    /// Smoothing ε for iPADMM (required by the ipadmm solver).
    #[arg(long)]
    pub eps: Option<f64>,
    /// iPADMM penalty σ (default 4.5/ε).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// iPADMM stopping tolerance.
    #[arg(long, default_value_t = 1e-5)]
    pub eps_admm: f64,
    /// iPADMM iteration limit.
    #[arg(long, default_value_t = 20000)]
    pub admm_k_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    Pmm,
    Ipadmm,
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Instance file written by `gen` (`.txt` for the text format).
    #[arg(long, value_name = "PATH", conflicts_with_all = SYNTHETIC_FLAGS)]
    pub instance: Option<PathBuf>,
    /// LIBSVM regression data.
    #[arg(long, value_name = "PATH", conflicts_with_all = SYNTHETIC_FLAGS, conflicts_with = "instance")]
    pub libsvm: Option<PathBuf>,
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
    /// Output file; `.txt` selects the text format.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Method: PMM with semismooth Newton subproblems, or iPADMM.
    #[arg(long, value_enum, default_value_t = SolverKind::Pmm)]
    pub solver: SolverKind,
    #[command(flatten)]
    pub solver_args: SolverArgs,
    /// Write the run record as CSV.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKindArg {
    Sparsity,
    Lambda,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Swept quantity: corruption rate |I|/n or λ.
    #[arg(long, value_enum, default_value_t = SweepKindArg::Sparsity)]
    pub kind: SweepKindArg,
    /// Comma-separated corruption rates or λ values.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7")]
    pub values: Vec<f64>,
    /// Number of seeds per value, starting at `--seed`.
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
    #[command(flatten)]
    pub solver_args: SolverArgs,
    /// Skip the iPADMM baseline.
    #[arg(long)]
    pub no_admm: bool,
    /// Write all run records as CSV.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Table1Args {
    /// Number of features (s* and n follow from p).
    #[arg(long, default_value_t = 5000)]
    pub p: usize,
    /// Replications per cell.
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    /// Seed of the first replication; replication r uses base_seed + r.
    #[arg(long, default_value_t = 0)]
    pub base_seed: u64,
    /// Comma-separated cell indices 0-9 (default: all).
    #[arg(long, value_delimiter = ',')]
    pub cells: Vec<usize>,
    /// Baseline mode: `none`, `ref` (published ε per cell) or `search:GRID`.
    #[arg(long, default_value = "ref")]
    pub admm: String,
    /// λ rule factor.
    #[arg(long, default_value_t = 0.12)]
    pub lambda_factor: f64,
    /// Per-run CSV; per-cell averages go to `<stem>_cells.csv`.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EpsSearchArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub solver_args: SolverArgs,
    /// Lower end of the ε interval.
    #[arg(long, default_value_t = 0.1)]
    pub lo: f64,
    /// Upper end of the ε interval.
    #[arg(long, default_value_t = 2.0)]
    pub hi: f64,
    /// Number of equispaced ε values.
    #[arg(long, default_value_t = 20)]
    pub grid: usize,
    /// Target Nz (default: true support size, or the PMM output's Nz).
    #[arg(long)]
    pub target_nz: Option<usize>,
    /// Write one run record per ε as CSV.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

fn num(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("`{s}` is not a number"))
}

pub fn parse_cov(s: &str) -> Result<Covariance, String> {
    match s.split_once(':') {
        Some(("ar", v)) => Ok(Covariance::Ar(num(v)?)),
        Some(("cs", v)) => Ok(Covariance::Cs(num(v)?)),
        _ => Err(format!("expected `ar:R` or `cs:ALPHA`, got `{s}`")),
    }
}

pub fn parse_signal(s: &str) -> Result<Signal, String> {
    if s == "fixed16" {
        return Ok(Signal::Fixed16);
    }
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["gauss", k, v] => Ok(Signal::GaussianNz {
            s_star: k.parse().map_err(|_| format!("`{k}` is not a count"))?,
            variance: num(v)?,
        }),
        _ => Err(format!("expected `fixed16` or `gauss:S:VAR`, got `{s}`")),
    }
}

pub fn parse_noise(s: &str) -> Result<NoiseDist, String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["gauss", v] => Ok(NoiseDist::Gaussian { variance: num(v)? }),
        ["t", scale, dof] => Ok(NoiseDist::ScaledT {
            scale: num(scale)?,
            dof: num(dof)?,
        }),
        ["mn"] => Ok(NoiseDist::MixtureNormal),
        ["laplace"] => Ok(NoiseDist::Laplace),
        ["cauchy"] => Ok(NoiseDist::Cauchy),
        ["scaled-cauchy"] => Ok(NoiseDist::CauchyScaledToSignal),
        _ => Err(format!(
            "expected gauss:VAR, t:SCALE:DOF, mn, laplace, cauchy or scaled-cauchy, got `{s}`"
        )),
    }
}
