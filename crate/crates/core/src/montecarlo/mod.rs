//! Seeded Monte Carlo validation of the deviation bound.
//!
//! Each replicate draws `n` outcomes, averages their log-masses and centres
//! the average with a certified entropy value. Replicate `i` uses the ChaCha8
//! stream `i` under the configured seed, so results do not depend on how the
//! replicates are scheduled.

mod report;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use report::{
    aggregate_verdict, verify_bound, write_csv, EpsRecord, SimulationReport, Verdict,
    VerdictSummary,
};

use crate::bounds::{deviation_bound, BernsteinConstants};
use crate::certify::{certify, entropy_interval, EntropyInterval};
use crate::distributions::{PmfModel, Sampler};
use crate::error::{Error, Result};
use crate::summation::CompensatedSum;

pub const MIN_REPLICATES: u64 = 100;

/// Which point of the certified entropy interval centres the statistic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Centering {
    #[default]
    Midpoint,
    Lower,
    Upper,
}

impl Centering {
    pub fn pick(self, h: &EntropyInterval) -> f64 {
        match self {
            Centering::Midpoint => h.midpoint(),
            Centering::Lower => h.lower,
            Centering::Upper => h.upper,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub model: PmfModel,
    /// Draws per replicate.
    pub n: u64,
    /// Deviation thresholds, in nats.
    pub eps: Vec<f64>,
    pub replicates: u64,
    pub seed: u64,
    pub entropy_tolerance: f64,
    /// `r` for the moment certificate; the default rule applies when absent.
    #[serde(default)]
    pub r: Option<f64>,
    pub slack: f64,
    #[serde(default)]
    pub centering: Centering,
}

impl SimulationConfig {
    /// A configuration with entropy tolerance `min(eps) / 100`, default `r`
    /// and the given certificate slack.
    pub fn new(
        model: PmfModel,
        n: u64,
        eps: Vec<f64>,
        replicates: u64,
        seed: u64,
        slack: f64,
    ) -> Self {
        let min_eps = eps.iter().copied().fold(f64::INFINITY, f64::min);
        Self {
            model,
            n,
            eps,
            replicates,
            seed,
            entropy_tolerance: min_eps / 100.0,
            r: None,
            slack,
            centering: Centering::Midpoint,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("n must be at least 1".into()));
        }
        if self.eps.is_empty() || self.eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::Domain(format!(
                "eps thresholds must be positive and finite, got {:?}",
                self.eps
            )));
        }
        if self.replicates < MIN_REPLICATES {
            return Err(Error::Domain(format!(
                "at least {MIN_REPLICATES} replicates are required, got {}",
                self.replicates
            )));
        }
        let min_eps = self.eps.iter().copied().fold(f64::INFINITY, f64::min);
        if !(self.entropy_tolerance > 0.0 && self.entropy_tolerance <= min_eps / 100.0) {
            return Err(Error::Domain(format!(
                "entropy tolerance {} must be positive and at most min(eps)/100 = {}",
                self.entropy_tolerance,
                min_eps / 100.0
            )));
        }
        Ok(())
    }
}

/// Random stream for one replicate.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Deterministic per-config seed used when a sweep is built from a base seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn replicate_deviation(
    sampler: &Sampler,
    seed: u64,
    index: u64,
    n: u64,
    center: f64,
) -> Result<f64> {
    let mut rng = replicate_rng(seed, index);
    let mut acc = CompensatedSum::new();
    for _ in 0..n {
        let (_, lp) = sampler.draw(&mut rng)?;
        acc.add(lp);
    }
    Ok((acc.value() / n as f64 + center).abs())
}

/// `|(1/n) sum_i log P(X_i) + center|` for every replicate, in replicate order.
pub fn replicate_deviations(
    cfg: &SimulationConfig,
    center: f64,
    exec: Execution,
) -> Result<Vec<f64>> {
    let sampler = Sampler::new(cfg.model.clone())?;
    let run = |i: u64| replicate_deviation(&sampler, cfg.seed, i, cfg.n, center);
    match exec {
        Execution::Serial => (0..cfg.replicates).map(run).collect(),
        Execution::Parallel => (0..cfg.replicates).into_par_iter().map(run).collect(),
    }
}

pub fn estimate_deviation_probability(cfg: &SimulationConfig) -> Result<SimulationReport> {
    estimate_deviation_probability_with(cfg, Execution::Parallel)
}

/// Runs the replicates and compares each threshold's hit frequency with the
/// analytic bound.
pub fn estimate_deviation_probability_with(
    cfg: &SimulationConfig,
    exec: Execution,
) -> Result<SimulationReport> {
    cfg.validate()?;
    let started = Instant::now();
    let mcert = certify(&cfg.model, cfg.r, cfg.slack)?;
    let constants = BernsteinConstants::new(&mcert);
    let entropy = entropy_interval(&cfg.model, &mcert, cfg.entropy_tolerance)?;
    let center = cfg.centering.pick(&entropy);
    let deviations = replicate_deviations(cfg, center, exec)?;

    let records = cfg
        .eps
        .iter()
        .map(|&eps| {
            let hits = deviations.iter().filter(|&&d| d >= eps).count() as u64;
            EpsRecord::new(
                eps,
                hits,
                cfg.replicates,
                deviation_bound(&constants, cfg.n, eps),
            )
        })
        .collect();

    Ok(SimulationReport {
        model: cfg.model.to_string(),
        n: cfg.n,
        replicates: cfg.replicates,
        seed: cfg.seed,
        certificate: mcert,
        c1: constants.c1,
        c2: constants.c2,
        entropy,
        centering: cfg.centering,
        records,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgfEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Sample mean of `exp(lambda (log P(X) + H))`, with `H` the midpoint of the
/// entropy interval, and its standard error.
pub fn estimate_mgf(
    model: &PmfModel,
    entropy: &EntropyInterval,
    lambda: f64,
    samples: u64,
    seed: u64,
) -> Result<MgfEstimate> {
    if samples < 2 {
        return Err(Error::Domain("need at least two samples".into()));
    }
    if let Ok(cert) = model.tail_certificate() {
        if !(lambda.abs() < cert.r_max()) {
            return Err(Error::OutsideMgfRadius {
                lambda,
                r: cert.r_max(),
            });
        }
    }
    let sampler = Sampler::new(model.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = entropy.midpoint();
    // Welford
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..samples {
        let (_, lp) = sampler.draw(&mut rng)?;
        let x = (lambda * (lp + h)).exp();
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let var = m2 / (samples - 1) as f64;
    Ok(MgfEstimate {
        mean,
        stderr: (var / samples as f64).sqrt(),
    })
}

/// Error from [`sweep`], carrying the reports finished before the failure.
#[derive(Debug)]
pub struct SweepError {
    pub completed: Vec<SimulationReport>,
    pub index: usize,
    pub source: Error,
}

impl std::fmt::Display for SweepError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "config {} failed after {} completed: {}",
            self.index,
            self.completed.len(),
            self.source
        )
    }
}

impl std::error::Error for SweepError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Runs every config in order, each with its own seed.
pub fn sweep(cfgs: &[SimulationConfig]) -> std::result::Result<Vec<SimulationReport>, SweepError> {
    sweep_with(cfgs, Execution::Parallel)
}

pub fn sweep_with(
    cfgs: &[SimulationConfig],
    exec: Execution,
) -> std::result::Result<Vec<SimulationReport>, SweepError> {
    let mut completed = Vec::with_capacity(cfgs.len());
    for (index, cfg) in cfgs.iter().enumerate() {
        match estimate_deviation_probability_with(cfg, exec) {
            Ok(rep) => completed.push(rep),
            Err(source) => {
                return Err(SweepError {
                    completed,
                    index,
                    source,
                })
            }
        }
    }
    Ok(completed)
}
