//! `entbound`: certify moment bounds, evaluate and invert the deviation bound,
//! and check it by simulation.
//!
//! Exit codes: 0 success, 1 other failure, 2 usage error, 3 inadmissible `r`,
//! 4 missing tail certificate, 5 resource cap exceeded, 6 simulation FAIL.

mod commands;
mod config;
mod model_spec;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use entbound_core::montecarlo::{Centering, SweepError};

use crate::config::ConfigError;
use crate::model_spec::{ModelSpec, SpecError};
use crate::output::Format;

pub const EXIT_OTHER: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INADMISSIBLE_R: u8 = 3;
pub const EXIT_MISSING_CERTIFICATE: u8 = 4;
pub const EXIT_RESOURCE_CAP: u8 = 5;
pub const EXIT_SIMULATION_FAIL: u8 = 6;

/// Certified Bernstein-type concentration bounds for the log-likelihood of
/// discrete distributions. All entropies and thresholds are in nats.
#[derive(Debug, Parser)]
#[command(name = "entbound", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Certify sum_k p_k^(1-r) <= C_r for a model.
    Certify(CertifyArgs),
    /// Evaluate the deviation bound, or the eps reaching a target probability.
    Bound(BoundArgs),
    /// Smallest n for which the bound reaches delta at eps.
    Samplesize(SampleSizeArgs),
    /// Estimate deviation frequencies by simulation and compare with the bound.
    Simulate(SimulateArgs),
    /// Run a grid of simulations with derived per-run seeds.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CertOpts {
    /// Moment exponent r in (0, r_max); chosen by the default rule if absent.
    #[arg(long)]
    pub r: Option<f64>,
    /// Certificate slack on C_r [default: 1e-6].
    #[arg(long, value_parser = positive)]
    pub slack: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputOpts {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write the output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    /// family:params, e.g. zeta:2.0, negbinomial:2.0,0.3, tabulated:<path>
    pub model: ModelSpec,
    #[command(flatten)]
    pub cert: CertOpts,
    #[command(flatten)]
    pub output: OutputOpts,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["model", "cert_file"])))]
#[command(group(ArgGroup::new("target").required(true).args(["eps", "delta"])))]
pub struct BoundArgs {
    pub model: Option<ModelSpec>,
    /// Saved certificate JSON, used instead of certifying a model.
    #[arg(long = "cert", conflicts_with_all = ["r", "slack"])]
    pub cert_file: Option<PathBuf>,
    #[command(flatten)]
    pub cert: CertOpts,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    /// Deviation threshold in nats.
    #[arg(long, value_parser = positive)]
    pub eps: Option<f64>,
    /// Target probability; reports the eps at which the bound equals it.
    #[arg(long, value_parser = positive)]
    pub delta: Option<f64>,
    #[command(flatten)]
    pub output: OutputOpts,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["model", "cert_file"])))]
pub struct SampleSizeArgs {
    pub model: Option<ModelSpec>,
    #[arg(long = "cert", conflicts_with_all = ["r", "slack"])]
    pub cert_file: Option<PathBuf>,
    #[command(flatten)]
    pub cert: CertOpts,
    #[arg(long, value_parser = positive)]
    pub eps: f64,
    #[arg(long, value_parser = positive)]
    pub delta: f64,
    #[command(flatten)]
    pub output: OutputOpts,
}

#[derive(Debug, Clone, Args)]
pub struct RunOpts {
    /// Replicates per configuration [default: 10000].
    #[arg(long)]
    pub replicates: Option<u64>,
    /// Random seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run replicates on one thread.
    #[arg(long)]
    pub serial: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(required_unless_present = "config", conflicts_with = "config")]
    pub model: Option<ModelSpec>,
    #[command(flatten)]
    pub cert: CertOpts,
    #[arg(long, required_unless_present = "config", value_parser = clap::value_parser!(u64).range(1..))]
    pub n: Option<u64>,
    /// Comma-separated deviation thresholds in nats.
    #[arg(long, value_delimiter = ',', required_unless_present = "config", value_parser = positive)]
    pub eps: Vec<f64>,
    /// Entropy bracket width [default: min(eps)/100].
    #[arg(long, value_parser = positive)]
    pub entropy_tol: Option<f64>,
    #[arg(long, value_enum)]
    pub centering: Option<CenteringArg>,
    #[command(flatten)]
    pub run: RunOpts,
    /// JSON run configuration; replaces the model and run flags.
    #[arg(long, conflicts_with_all = ["n", "eps", "r", "slack", "entropy_tol", "centering", "replicates"])]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputOpts,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Model spec; repeat for several models.
    #[arg(
        long = "model",
        required_unless_present = "config",
        conflicts_with = "config"
    )]
    pub models: Vec<ModelSpec>,
    #[command(flatten)]
    pub cert: CertOpts,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', required_unless_present = "config", value_parser = clap::value_parser!(u64).range(1..))]
    pub n: Vec<u64>,
    /// Comma-separated deviation thresholds in nats.
    #[arg(long, value_delimiter = ',', required_unless_present = "config", value_parser = positive)]
    pub eps: Vec<f64>,
    #[command(flatten)]
    pub run: RunOpts,
    /// JSON list of run configurations.
    #[arg(long, conflicts_with_all = ["n", "eps", "r", "slack", "replicates"])]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputOpts,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum CenteringArg {
    Midpoint,
    Lower,
    Upper,
}

impl From<CenteringArg> for Centering {
    fn from(c: CenteringArg) -> Self {
        match c {
            CenteringArg::Midpoint => Centering::Midpoint,
            CenteringArg::Lower => Centering::Lower,
            CenteringArg::Upper => Centering::Upper,
        }
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{s}' must be positive and finite"))
    }
}

fn core_exit_code(e: &entbound_core::Error) -> u8 {
    use entbound_core::Error as E;
    match e {
        E::InadmissibleR { .. } => EXIT_INADMISSIBLE_R,
        E::MissingCertificate(_) => EXIT_MISSING_CERTIFICATE,
        E::ResourceLimit { .. } => EXIT_RESOURCE_CAP,
        E::InvalidModel(_)
        | E::Domain(_)
        | E::OutsideMgfRadius { .. }
        | E::MixedR { .. }
        | E::Json(_) => EXIT_USAGE,
        _ => EXIT_OTHER,
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<entbound_core::Error>() {
        return core_exit_code(e);
    }
    if let Some(e) = err.downcast_ref::<SweepError>() {
        return core_exit_code(&e.source);
    }
    if err.downcast_ref::<SpecError>().is_some() || err.downcast_ref::<ConfigError>().is_some() {
        return EXIT_USAGE;
    }
    EXIT_OTHER
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Certify(a) => commands::certify(a),
        Command::Bound(a) => commands::bound(a),
        Command::Samplesize(a) => commands::samplesize(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Sweep(a) => commands::sweep(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("entbound: error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
