use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Mass, PmfModel};
use crate::error::{Error, Result};

/// A finitely checkable domination statement about the tail of a pmf.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum TailCertificate {
    /// `p_k <= c0 * k^{-alpha}` for every `k > k0`.
    #[serde(rename = "powerlaw")]
    PowerLaw { k0: u64, c0: f64, alpha: f64 },
    /// `p_{k+1} / p_k <= q` for every `k >= k0`.
    #[serde(rename = "ratio")]
    GeometricRatio { k0: u64, q: f64 },
}

/// Relative log-space slack for spot checks; envelopes attained with equality
/// (zeta, geometric) differ from the masses only by round-off.
const SPOT_CHECK_LOG_TOL: f64 = 1e-12;

impl TailCertificate {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TailCertificate::PowerLaw { k0, c0, alpha } => {
                if k0 == 0 {
                    return Err(Error::InvalidModel(
                        "power-law certificate needs k0 >= 1".into(),
                    ));
                }
                if !(c0 > 0.0 && c0.is_finite()) {
                    return Err(Error::InvalidModel(format!(
                        "power-law certificate needs c0 > 0, got {c0}"
                    )));
                }
                if !(alpha > 1.0 && alpha.is_finite()) {
                    return Err(Error::InvalidModel(format!(
                        "power-law certificate needs alpha > 1, got {alpha}"
                    )));
                }
            }
            TailCertificate::GeometricRatio { k0, q } => {
                if k0 == 0 {
                    return Err(Error::InvalidModel(
                        "ratio certificate needs k0 >= 1".into(),
                    ));
                }
                if !(q > 0.0 && q < 1.0) {
                    return Err(Error::InvalidModel(format!(
                        "ratio certificate needs q in (0, 1), got {q}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn k0(&self) -> u64 {
        match *self {
            TailCertificate::PowerLaw { k0, .. } | TailCertificate::GeometricRatio { k0, .. } => k0,
        }
    }

    /// Supremum of the admissible `r`: `(alpha - 1) / alpha` for a power-law
    /// tail, `1` for a ratio-dominated tail.
    pub fn r_max(&self) -> f64 {
        match *self {
            TailCertificate::PowerLaw { alpha, .. } => (alpha - 1.0) / alpha,
            TailCertificate::GeometricRatio { .. } => 1.0,
        }
    }

    /// Upper bound on `sum_{k > big_k} p_k^s`, valid once `big_k >= k0`.
    ///
    /// Returns `None` when the certificate does not control the series at this
    /// exponent or index. For a power law the bound is
    /// `c0^s * big_k^{1 - alpha s} / (alpha s - 1)`, for a ratio certificate
    /// `p_{big_k + 1}^s / (1 - q^s)`.
    pub fn tail_power_bound(&self, model: &PmfModel, s: f64, big_k: u64) -> Result<Option<f64>> {
        if big_k < self.k0() || s <= 0.0 {
            return Ok(None);
        }
        match *self {
            TailCertificate::PowerLaw { c0, alpha, .. } => {
                let decay = alpha * s - 1.0;
                if decay <= 0.0 {
                    return Ok(None);
                }
                let log_bound = s * c0.ln() - decay * (big_k as f64).ln() - decay.ln();
                Ok(Some(log_bound.exp()))
            }
            TailCertificate::GeometricRatio { q, .. } => {
                let log_next = model.mass_bound(big_k + 1)?.log_upper();
                let denom = -(s * q.ln()).exp_m1();
                Ok(Some((s * log_next).exp() / denom))
            }
        }
    }

    /// Upper bound on the single mass `p_k` implied by the certificate, given
    /// the mass (or an upper bound on it) at some anchor index `anchor >= k0`
    /// below `k`. Only used for tabulated models beyond their listed range.
    pub(crate) fn log_mass_envelope(&self, k: u64, anchor: Option<(u64, f64)>) -> Option<f64> {
        match *self {
            TailCertificate::PowerLaw { k0, c0, alpha } if k > k0 => {
                Some(c0.ln() - alpha * (k as f64).ln())
            }
            TailCertificate::GeometricRatio { k0, q } => match anchor {
                Some((at, log_p)) if at >= k0 && at < k => Some(log_p + (k - at) as f64 * q.ln()),
                _ => None,
            },
            _ => None,
        }
    }

    /// Checks the certificate at `probes` pseudo-random indices in
    /// `(k0, k0 + 10^6]`. Indices whose mass is not known exactly are skipped.
    pub fn spot_check(&self, model: &PmfModel, probes: usize, seed: u64) -> Result<bool> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k0 = self.k0();
        for _ in 0..probes {
            let k = k0 + rng.random_range(1..=1_000_000u64);
            let ok = match *self {
                TailCertificate::PowerLaw { c0, alpha, .. } => match model.mass_bound(k)? {
                    Mass::Exact(lp) => {
                        let env = c0.ln() - alpha * (k as f64).ln();
                        lp <= env + SPOT_CHECK_LOG_TOL * env.abs().max(1.0)
                    }
                    Mass::Upper(_) => true,
                },
                TailCertificate::GeometricRatio { q, .. } => {
                    match (model.mass_bound(k)?, model.mass_bound(k + 1)?) {
                        (Mass::Exact(a), Mass::Exact(b)) => {
                            b - a <= q.ln() + SPOT_CHECK_LOG_TOL * a.abs().max(1.0)
                        }
                        _ => true,
                    }
                }
            };
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
