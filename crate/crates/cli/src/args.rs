//! Flag definitions. Field names double as config-file keys.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "SPHCHAOS_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "sphchaos", version, about = "Hermite functionals of random spherical eigenfunctions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Legendre, Hermite, J0 and normalized associated Legendre values.
    Specfun(SpecfunArgs),
    /// Single 3j symbols or full (l, l, L; 0, 0, 0) tables.
    Wigner(WignerArgs),
    /// Legendre moments, exact and asymptotic variances.
    Moments(MomentsArgs),
    /// The constant c_q in the variance asymptotics.
    Cq(CqArgs),
    /// Monte Carlo experiment over a grid of degrees.
    Mc(McArgs),
    /// Diagram-formula fourth cumulant of h_{l;q}.
    Cum4(Cum4Args),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Specfun(_) => "specfun",
            Command::Wigner(_) => "wigner",
            Command::Moments(_) => "moments",
            Command::Cq(_) => "cq",
            Command::Mc(_) => "mc",
            Command::Cum4(_) => "cum4",
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct Common {
    /// JSON file whose keys mirror the flags; explicit flags win. A run manifest works too.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Manifest file; defaults to `<out>.manifest.json`, or stderr when writing to stdout.
    #[arg(long)]
    #[serde(default)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpecFn {
    Legendre,
    Hermite,
    J0,
    Ylm,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SpecfunArgs {
    #[arg(long = "fn", value_enum)]
    #[serde(rename = "fn")]
    pub function: SpecFn,
    /// Degree for legendre and ylm.
    #[arg(long, default_value_t = 0)]
    pub l: usize,
    /// Order for ylm; every m in 0..=l when absent.
    #[arg(long)]
    #[serde(default)]
    pub m: Option<usize>,
    /// Hermite degree.
    #[arg(long, default_value_t = 0)]
    pub q: usize,
    /// Evaluation points (comma separated).
    #[arg(long, alias = "x", value_delimiter = ',', allow_negative_numbers = true, required = true)]
    pub t: Vec<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct WignerArgs {
    #[arg(long, allow_negative_numbers = true)]
    #[serde(default)]
    pub l1: Option<i64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(default)]
    pub l2: Option<i64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(default)]
    pub l3: Option<i64>,
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    pub m1: i64,
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    pub m2: i64,
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    pub m3: i64,
    /// Print (l, l, L; 0, 0, 0) for every L in 0..=2l.
    #[arg(long, allow_negative_numbers = true, conflicts_with_all = ["l1", "l2", "l3"])]
    #[serde(default)]
    pub table: Option<i64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MomentsArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub l_grid: Vec<usize>,
    #[arg(long)]
    pub q: u32,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CqArgs {
    #[arg(long)]
    pub q: u32,
    #[arg(long, default_value_t = sphchaos::moments::DEFAULT_CQ_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = sphchaos::moments::DEFAULT_PSI_MAX)]
    pub psi_max: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct McArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub l_grid: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub q_set: Vec<u32>,
    /// Realizations per degree.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = WORKERS_ENV)]
    #[serde(default)]
    pub workers: Option<usize>,
    /// Rings per unit degree of the Defect grid; no Defect when absent.
    #[arg(long)]
    #[serde(default)]
    pub defect_res: Option<usize>,
    /// Number of odd orders kept in the Defect variance prediction.
    #[arg(long, default_value_t = 6)]
    pub defect_orders: u32,
    #[arg(long, default_value_t = sphchaos::mcstats::DEFAULT_BOOTSTRAP)]
    pub bootstrap: usize,
    /// `sign`, `indicator:<u>`, `hermite:<b0,b1,..>` or `monomial:<b0,b1,..>`.
    #[arg(long)]
    #[serde(default)]
    pub transform: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct Cum4Args {
    #[arg(long)]
    pub l: usize,
    #[arg(long)]
    pub q: u32,
    /// Monte Carlo points per family without a closed form.
    #[arg(long, default_value_t = 20_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}
