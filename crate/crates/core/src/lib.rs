//! Certified Bernstein-type concentration for the log-likelihood of discrete
//! distributions on a countably infinite alphabet.
//!
//! For i.i.d. draws `X_1, ..., X_n` from a pmf `{p_k}` with
//! `sum_k p_k^{1-r} <= C_r` for some `0 < r < 1`,
//!
//! ```text
//! P(|(1/n) sum_i log P(X_i) + H| >= eps) <= 2 exp(-n eps^2 / (c1 + c2 eps)),
//! c1 = 2 C_r / (sqrt(pi) r^2),  c2 = 2 / r,
//! ```
//!
//! where `H` is the Shannon entropy in nats. The crate certifies `(r, C_r)`
//! from a tail certificate, brackets `H` and the MGF of the centred
//! log-likelihood, evaluates and inverts the bound, and checks it against
//! seeded simulation.

// `!(x < y)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod certify;
pub mod distributions;
pub mod error;
pub mod montecarlo;
pub mod special;
pub mod summation;

pub use bounds::{
    bernstein_constants, chernoff_lambda_star, deviation_bound, epsilon_for,
    heterogeneous_deviation_bound, is_vacuous, mgf_exact, mgf_log_bound, min_sample_size,
    BernsteinConstants, MgfInterval, SQRT_PI,
};
pub use certify::{
    admissible_r_interval, certify, certify_moment_powerlaw, certify_moment_ratio, default_r,
    entropy_interval, entropy_upper_coarse, power_sum_partial, select_r, AdmissibleInterval,
    EntropyInterval, MomentCertificate, Provenance, INDEX_CAP,
};
pub use distributions::{sample, Family, PmfModel, Sampler, TailCertificate};
pub use error::{Error, Result};
pub use montecarlo::{
    estimate_deviation_probability, estimate_mgf, replicate_deviations, sweep, verify_bound,
    Execution, SimulationConfig, SimulationReport, Verdict,
};
