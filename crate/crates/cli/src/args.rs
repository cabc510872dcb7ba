use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use projenergy::energy::Convention;
use projenergy::transport::{CostExponent, Metric};
use serde::{Serialize, Serializer};

#[derive(Debug, Parser)]
#[command(name = "projenergy", version, about = "Projective-angle interaction energies on spheres")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Directory for output files and the run manifest.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// JSON object of flag values overriding the command line. A run
    /// manifest is accepted too.
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,

    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Energy of a measure file.
    #[command(args_override_self = true)]
    Energy(EnergyArgs),
    /// Multi-start particle ascent.
    #[command(args_override_self = true)]
    Optimize(OptimizeArgs),
    /// Bracket the exponent above which the Fejes Tóth configuration wins.
    #[command(args_override_self = true)]
    ScanAlpha(ScanArgs),
    /// Transport distance between two measure files.
    #[command(args_override_self = true)]
    Transport(TransportArgs),
    /// Run a verification suite.
    #[command(args_override_self = true)]
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> String {
        match self {
            Command::Energy(_) => "energy".into(),
            Command::Optimize(_) => "optimize".into(),
            Command::ScanAlpha(_) => "scan-alpha".into(),
            Command::Transport(_) => "transport".into(),
            Command::Verify(v) => format!("verify {}", v.suite.name()),
        }
    }
}

/// Non-finite exponents go out as strings, which JSON numbers cannot hold.
fn float_param<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else {
        s.serialize_str(&x.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConventionArg {
    Half,
    Plain,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Half => Convention::Half,
            ConventionArg::Plain => Convention::Plain,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum PArg {
    #[value(name = "1")]
    #[serde(rename = "1")]
    One,
    #[value(name = "2")]
    #[serde(rename = "2")]
    Two,
    #[value(name = "inf")]
    #[serde(rename = "inf")]
    Inf,
}

impl From<PArg> for CostExponent {
    fn from(p: PArg) -> Self {
        match p {
            PArg::One => CostExponent::One,
            PArg::Two => CostExponent::Two,
            PArg::Inf => CostExponent::Infinity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricArg {
    Sphere,
    Projective,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Sphere => Metric::Sphere,
            MetricArg::Projective => Metric::Projective,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightsArg {
    Uniform,
    /// 0.6 on the first line, the rest shared equally.
    Skewed,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct EnergyArgs {
    /// Measure file (JSON).
    #[arg(long)]
    pub measure: PathBuf,
    /// Kernel exponent; `inf` gives the orthogonality indicator.
    #[arg(long)]
    #[serde(serialize_with = "float_param")]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = ConventionArg::Half)]
    pub convention: ConventionArg,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct AscentArgs {
    #[arg(long, default_value_t = 16)]
    pub restarts: usize,
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct OptimizeArgs {
    #[arg(long)]
    pub dim: usize,
    #[arg(long)]
    pub n_points: usize,
    #[arg(long)]
    pub alpha: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub ascent: AscentArgs,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ScanArgs {
    #[arg(long)]
    pub dim: usize,
    #[arg(long)]
    pub n_points: usize,
    #[arg(long)]
    pub alpha_lo: f64,
    #[arg(long)]
    pub alpha_hi: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha_tol: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub ascent: AscentArgs,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct TransportArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, value_enum, default_value_t = PArg::One)]
    pub p: PArg,
    #[arg(long, value_enum, default_value_t = MetricArg::Sphere)]
    pub metric: MetricArg,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(subcommand)]
    pub suite: Suite,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(untagged)]
pub enum Suite {
    /// `1 - t² ≥ ((2/π) arccos|t|)^α` on [-1, 1].
    #[command(args_override_self = true)]
    Majorization(MajorizationArgs),
    /// `E_f ≤ E_g ≤ d/(d+1)` on random measures.
    #[command(args_override_self = true)]
    Chain(ChainArgs),
    /// Random d_∞-small perturbations of a measure on orthogonal lines.
    #[command(args_override_self = true)]
    Stability(StabilityArgs),
    /// Lower bound constant for summed potentials near e_0.
    #[command(args_override_self = true)]
    Aggregation(AggregationArgs),
    /// Frame bound and `E_g = 1 - Tr I²`.
    #[command(args_override_self = true)]
    Frame(FrameArgs),
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Suite::Majorization(_) => "majorization",
            Suite::Chain(_) => "chain",
            Suite::Stability(_) => "stability",
            Suite::Aggregation(_) => "aggregation",
            Suite::Frame(_) => "frame",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Suite::Majorization(_) => 0,
            Suite::Chain(a) => a.seed,
            Suite::Stability(a) => a.seed,
            Suite::Aggregation(a) => a.seed,
            Suite::Frame(a) => a.seed,
        }
    }
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct MajorizationArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 100_000)]
    pub grid: usize,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ChainArgs {
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    /// Number of random measures.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Atoms per random measure.
    #[arg(long, default_value_t = 6)]
    pub n_points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct StabilityArgs {
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    pub radius: f64,
    #[arg(long, default_value_t = 5)]
    pub k_split: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, value_enum, default_value_t = WeightsArg::Uniform)]
    pub weights: WeightsArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct AggregationArgs {
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.05)]
    pub radius: f64,
    #[arg(long, default_value_t = 0.5)]
    pub c_target: f64,
    /// Sample points in the cap around e_0.
    #[arg(long, default_value_t = 20_000)]
    pub trials: usize,
    /// Atoms per cap measure; 1 places a Dirac mass at the cap centre.
    #[arg(long, default_value_t = 1)]
    pub n_points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct FrameArgs {
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Uniform samples for the Monte-Carlo moment estimate.
    #[arg(long, default_value_t = 100_000)]
    pub n_points: usize,
    /// Random measures for the identity check.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
