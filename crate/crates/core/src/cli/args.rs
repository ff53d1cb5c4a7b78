use crate::probit::Prior;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Serialize, Serializer};
use std::fmt;
use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Parser, Debug, Clone)]
#[command(name = "regensim", version, about = "Regenerative rejection sampling experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Master seed; every random stream is derived from it
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads (results do not depend on this)
    #[arg(long, global = true, default_value = "1")]
    pub workers: NonZeroUsize,
    /// Output file; standard output when absent
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Line-oriented `key = value` file; command-line flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Record wall-clock time and samples/sec in the output
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Renewal oracles: Poisson counts, Gamma(2) residual life, solver order
    RenewalVerify(RenewalArgs),
    /// Coupled renewal processes and the coupling inequality
    Coupling(CouplingArgs),
    /// Draw points with one of the samplers
    Sample(SampleArgs),
    /// Cycle-length moments, regime flag and threshold selection
    Moments(MomentsArgs),
    /// Bias of the fixed-time and drop-last ratio estimators over a t grid
    BiasSweep(BiasSweepArgs),
    /// Ratio estimate with interval, or interval coverage over replicates
    Estimate(EstimateArgs),
    /// Bayesian probit regression on the lupus data
    Probit(ProbitArgs),
    /// Throughput of RRS and Gibbs on the probit task
    Bench(BenchArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::RenewalVerify(_) => "renewal-verify",
            Command::Coupling(_) => "coupling",
            Command::Sample(_) => "sample",
            Command::Moments(_) => "moments",
            Command::BiasSweep(_) => "bias-sweep",
            Command::Estimate(_) => "estimate",
            Command::Probit(_) => "probit",
            Command::Bench(_) => "bench",
        }
    }

    pub fn config_json(&self) -> serde_json::Value {
        let v = match self {
            Command::RenewalVerify(a) => serde_json::to_value(a),
            Command::Coupling(a) => serde_json::to_value(a),
            Command::Sample(a) => serde_json::to_value(a),
            Command::Moments(a) => serde_json::to_value(a),
            Command::BiasSweep(a) => serde_json::to_value(a),
            Command::Estimate(a) => serde_json::to_value(a),
            Command::Probit(a) => serde_json::to_value(a),
            Command::Bench(a) => serde_json::to_value(a),
        };
        v.expect("argument structs serialize")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct RenewalArgs {
    /// Rate of the Exp and Gamma(2) interarrival laws
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Poisson traces for the mean count and residual checks
    #[arg(long, default_value_t = 10_000)]
    pub traces: usize,
    /// Query time for the Poisson checks
    #[arg(long, default_value_t = 50.0)]
    pub horizon: f64,
    /// Gamma(2) traces per time in the residual-life TV check
    #[arg(long, default_value_t = 1_000_000)]
    pub tv_traces: usize,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 2.0, 3.0])]
    pub tv_grid: Vec<f64>,
    /// Coarsest step of the renewal-equation Richardson check
    #[arg(long, default_value_t = 0.02)]
    pub grid_step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    Gamma2,
    Exp,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct CouplingArgs {
    #[arg(long, value_enum, default_value_t = FamilyName::Gamma2)]
    pub family: FamilyName,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Checkpoint spacing; family default when absent
    #[arg(long)]
    pub a: Option<f64>,
    /// Width of the uniform component; family default when absent
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub runs: usize,
    #[arg(long, value_delimiter = ',', default_values_t = (1..=10).map(f64::from).collect::<Vec<_>>())]
    pub t_grid: Vec<f64>,
    /// Cells for the geometric χ² test, the last one pooling the tail
    #[arg(long, default_value_t = 25)]
    pub bins: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rs,
    Rrs,
    RrsSub,
    Imh,
    Rwm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetName {
    /// Gamma(2,1) target with an Exp proposal
    GammaExp,
    /// 2-D radial target on [-2π, 2π]² with a truncated Laplace(0,4) proposal
    SyntheticBounded,
    /// The same target on the plane with a Laplace(0,4) proposal
    SyntheticUnbounded,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SampleArgs {
    #[arg(long, value_enum, default_value_t = Method::Rrs)]
    pub method: Method,
    #[arg(long, value_enum, default_value_t = TargetName::GammaExp)]
    pub target: TargetName,
    /// RRS threshold (per-sample time for rrs-sub); target default when absent
    #[arg(long)]
    pub t: Option<f64>,
    /// Independent draws for rs/rrs, output count for rrs-sub
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Post-burn-in steps for imh/rwm
    #[arg(long, default_value_t = 10_000)]
    pub steps: usize,
    #[arg(long, default_value_t = 1000)]
    pub burnin: usize,
    /// Rejection bound C ≥ sup f/g; target default when absent
    #[arg(long)]
    pub c: Option<f64>,
    /// Exp proposal rate for gamma-exp (0.4 for rs/imh, 1 otherwise)
    #[arg(long)]
    pub proposal_rate: Option<f64>,
    /// Laplace scale of rwm steps (4 for synthetic targets, 1 otherwise)
    #[arg(long)]
    pub step_scale: Option<f64>,
    /// Append an ACF table up to this lag
    #[arg(long)]
    pub emit_acf: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentTarget {
    GammaExp,
    SyntheticBounded,
    SyntheticUnbounded,
    Probit,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct MomentsArgs {
    #[arg(long, value_enum, default_value_t = MomentTarget::GammaExp)]
    pub target: MomentTarget,
    /// Gamma shape for gamma-exp
    #[arg(long, default_value_t = 2.0)]
    pub shape: f64,
    /// Exp proposal rate for gamma-exp
    #[arg(long, default_value_t = 1.0)]
    pub proposal_rate: f64,
    /// Cycle draws
    #[arg(long = "M", default_value_t = 1_000_000)]
    #[serde(rename = "M")]
    pub m: usize,
    /// Batches for the E[W³] stability flag
    #[arg(long, default_value_t = 20)]
    pub batches: usize,
    #[arg(long, default_value_t = 10_000)]
    pub n_target: usize,
    #[arg(long, default_value_t = 1000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 10_000)]
    pub n_sub: usize,
    /// Log-scale shift of the probit target
    #[arg(long, default_value_t = 2.0)]
    pub xi: f64,
    /// Covariance inflation of the probit Laplace proposal
    #[arg(long, default_value_t = 5.0)]
    pub alpha2: f64,
    /// Also write the raw cycle lengths as CSV here
    #[arg(long)]
    pub dump_w: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HName {
    Id,
    Tanh,
    Logistic,
    /// Indicator of x > 1
    Tail1,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct BiasSweepArgs {
    #[arg(long, value_enum, default_value_t = HName::Tanh)]
    pub h: HName,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 5.0, 10.0, 20.0, 50.0, 100.0])]
    pub t_grid: Vec<f64>,
    /// Replicates per t
    #[arg(long = "M", default_value_t = 100_000)]
    #[serde(rename = "M")]
    pub m: usize,
    /// Cycle draws for the moments entering the bound
    #[arg(long, default_value_t = 1_000_000)]
    pub moment_draws: usize,
    /// Chain lengths for the Independence Sampler reference; none when empty
    #[arg(long, value_delimiter = ',')]
    pub mcmc_grid: Vec<usize>,
    /// Replicate chains for the reference; M when absent
    #[arg(long)]
    pub mcmc_m: Option<usize>,
    #[arg(long, default_value_t = 8.0)]
    pub mcmc_x0: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct EstimateArgs {
    #[arg(long, value_enum, default_value_t = HName::Id)]
    pub h: HName,
    #[arg(long, default_value_t = 200.0)]
    pub t: f64,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Independent paths; more than one reports interval coverage
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    /// Cycle draws for the bias bound (bounded h only)
    #[arg(long, default_value_t = 1_000_000)]
    pub moment_draws: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbitMethod {
    Rrs,
    Gibbs,
}

/// `flat` or `gauss:σ²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriorSpec(pub Prior);

impl FromStr for PriorSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "flat" {
            return Ok(PriorSpec(Prior::Flat));
        }
        let v = s
            .strip_prefix("gauss:")
            .ok_or_else(|| format!("expected `flat` or `gauss:<variance>`, got `{s}`"))?;
        let var: f64 = v.parse().map_err(|_| format!("bad prior variance `{v}`"))?;
        if !(var > 0.0 && var.is_finite()) {
            return Err(format!("prior variance must be positive, got {var}"));
        }
        Ok(PriorSpec(Prior::Gaussian(var)))
    }
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Prior::Flat => write!(f, "flat"),
            Prior::Gaussian(v) => write!(f, "gauss:{v}"),
        }
    }
}

impl Serialize for PriorSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ProbitArgs {
    #[arg(long, value_enum, default_value_t = ProbitMethod::Rrs)]
    pub method: ProbitMethod,
    #[arg(long, default_value_t = PriorSpec(Prior::Flat))]
    pub prior: PriorSpec,
    #[arg(long, default_value_t = 2.0)]
    pub xi: f64,
    #[arg(long, default_value_t = 5.0)]
    pub alpha2: f64,
    /// Samples after burn-in
    #[arg(long = "N", default_value_t = 10_000)]
    #[serde(rename = "N")]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub burnin: usize,
    /// Per-sample RRS time; selected from E[W] when absent
    #[arg(long, conflicts_with = "auto_t")]
    pub t: Option<f64>,
    /// Select t = ((N + burnin)/N)·E[W] (the default without --t)
    #[arg(long)]
    pub auto_t: bool,
    /// Cycle draws for estimating E[W]
    #[arg(long, default_value_t = 1_000_000)]
    pub moment_draws: usize,
    /// Dataset in the cell-grid text format; embedded data when absent
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Append an ACF table up to this lag
    #[arg(long)]
    pub emit_acf: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchTask {
    Probit,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct BenchArgs {
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = vec![ProbitMethod::Rrs, ProbitMethod::Gibbs])]
    pub method: Vec<ProbitMethod>,
    #[arg(long, value_enum, default_value_t = BenchTask::Probit)]
    pub task: BenchTask,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long = "N", default_value_t = 10_000)]
    #[serde(rename = "N")]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 2.0)]
    pub xi: f64,
    #[arg(long, default_value_t = 5.0)]
    pub alpha2: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub moment_draws: usize,
}
