//! The MGF envelope, the two-sided deviation bound
//! `2 exp(-n eps^2 / (c1 + c2 eps))` and its inversions.

use serde::{Deserialize, Serialize};

use crate::certify::{EntropyInterval, MomentCertificate, ENTROPY_START_INDEX, INDEX_CAP};
use crate::distributions::{Mass, PmfModel};
use crate::error::{Error, Result};
use crate::summation::{widen, CompensatedSum};

/// sqrt(pi) at full double precision; the only place it is defined.
pub const SQRT_PI: f64 = 1.772_453_850_905_516_f64;

/// `c1 = 2 C_r / (sqrt(pi) r^2)` and `c2 = 2 / r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernsteinConstants {
    pub c1: f64,
    pub c2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<MomentCertificate>,
}

impl BernsteinConstants {
    pub fn new(mcert: &MomentCertificate) -> Self {
        let r = mcert.r;
        Self {
            c1: 2.0 * mcert.c_r / (SQRT_PI * r * r),
            c2: 2.0 / r,
            source: Some(*mcert),
        }
    }

    /// Constants given directly, with no certificate behind them.
    pub fn from_values(c1: f64, c2: f64) -> Self {
        Self {
            c1,
            c2,
            source: None,
        }
    }
}

pub fn bernstein_constants(mcert: &MomentCertificate) -> BernsteinConstants {
    BernsteinConstants::new(mcert)
}

/// Whether a bound value is uninformative (`>= 1`).
pub fn is_vacuous(bound: f64) -> bool {
    bound >= 1.0
}

/// `2 exp(-n eps^2 / (c1 + c2 eps))`. Values above 1 are returned unclamped.
pub fn deviation_bound(c: &BernsteinConstants, n: u64, eps: f64) -> f64 {
    if eps == 0.0 {
        return 2.0;
    }
    let exponent = -(n as f64) * eps * eps / (c.c1 + c.c2 * eps);
    2.0 * exponent.exp()
}

/// Log of the MGF envelope,
/// `C_r (lambda^2 / r^2) / (1 - |lambda| / r) / (2 sqrt(pi))`, for `|lambda| < r`.
pub fn mgf_log_bound(mcert: &MomentCertificate, lambda: f64) -> Result<f64> {
    let r = mcert.r;
    if !(lambda.abs() < r) {
        return Err(Error::OutsideMgfRadius { lambda, r });
    }
    let ratio = lambda / r;
    Ok(mcert.c_r * ratio * ratio / (1.0 - lambda.abs() / r) / (2.0 * SQRT_PI))
}

/// Certified bracket on the exact MGF value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgfInterval {
    pub lower: f64,
    pub upper: f64,
}

impl MgfInterval {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

/// Brackets `M(lambda) = (sum_k p_k^{1+lambda}) exp(lambda H)`.
///
/// The power series is truncated at `K` (doubling from 64) with the
/// certificate's remainder at exponent `1 + lambda`, which exceeds `1 - r`
/// inside the radius. The entropy factor uses the interval endpoints. `tol`
/// bounds the contribution of the series bracket to the final width.
pub fn mgf_exact(
    model: &PmfModel,
    mcert: &MomentCertificate,
    entropy: &EntropyInterval,
    lambda: f64,
    tol: f64,
) -> Result<MgfInterval> {
    let r = mcert.r;
    if !(lambda.abs() < r) {
        return Err(Error::OutsideMgfRadius { lambda, r });
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if lambda == 0.0 {
        // the masses sum to one
        return Ok(MgfInterval {
            lower: 1.0,
            upper: 1.0,
        });
    }
    let cert = model.tail_certificate()?;
    let s = 1.0 + lambda;
    let (f_lo, f_hi) = if lambda > 0.0 {
        (
            (lambda * entropy.lower).exp(),
            (lambda * entropy.upper).exp(),
        )
    } else {
        (
            (lambda * entropy.upper).exp(),
            (lambda * entropy.lower).exp(),
        )
    };

    let mut head = CompensatedSum::new();
    let mut bounded = CompensatedSum::new();
    let mut done = 0u64;
    let ceiling = model.truncation_ceiling();
    let mut big_k = ENTROPY_START_INDEX;
    loop {
        if let Some(c) = ceiling {
            big_k = big_k.min(c);
        }
        if big_k > INDEX_CAP {
            return Err(Error::ResourceLimit {
                what: "MGF truncation index",
                index: big_k as f64,
                cap: INDEX_CAP,
            });
        }
        for k in done + 1..=big_k {
            match model.mass_bound(k)? {
                Mass::Exact(lp) => head.add((s * lp).exp()),
                Mass::Upper(lu) => bounded.add((s * lu).exp()),
            }
        }
        done = big_k;
        if let Some(rem) = cert.tail_power_bound(model, s, big_k)? {
            let gap = rem + bounded.value();
            if gap * f_hi <= tol {
                let lo = head.value();
                let (lower, upper) = widen(lo * f_lo, (lo + gap) * f_hi);
                return Ok(MgfInterval { lower, upper });
            }
        }
        if ceiling == Some(big_k) {
            return Err(Error::ResourceLimit {
                what: "MGF truncation index (tail beyond the table is only bounded)",
                index: big_k as f64,
                cap: big_k,
            });
        }
        big_k *= 2;
    }
}

/// The Chernoff parameter `t / (n C_r / (sqrt(pi) r^2) + t / r)`.
pub fn chernoff_lambda_star(mcert: &MomentCertificate, n: u64, t: f64) -> f64 {
    let r = mcert.r;
    t / (n as f64 * mcert.c_r / (SQRT_PI * r * r) + t / r)
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "eps must be positive and finite, got {eps}"
        )))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    // targets in [1, 2) are vacuous but still well defined
    if delta > 0.0 && delta < 2.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "delta must lie in (0, 2), got {delta}"
        )))
    }
}

/// Smallest `n` with `deviation_bound(c, n, eps) <= delta`.
///
/// Starts from `ceil((c1 + c2 eps) log(2/delta) / eps^2)` and corrects by
/// direct evaluation at the boundary.
pub fn min_sample_size(c: &BernsteinConstants, eps: f64, delta: f64) -> Result<u64> {
    check_eps(eps)?;
    check_delta(delta)?;
    let l = (2.0 / delta).ln();
    let guess = ((c.c1 + c.c2 * eps) * l / (eps * eps)).ceil();
    if !(guess < 1e18) {
        return Err(Error::ResourceLimit {
            what: "sample size",
            index: guess,
            cap: u64::MAX,
        });
    }
    let mut n = (guess as u64).max(1);
    while n > 1 && deviation_bound(c, n - 1, eps) <= delta {
        n -= 1;
    }
    while deviation_bound(c, n, eps) > delta {
        n += 1;
    }
    Ok(n)
}

/// The `eps` at which `deviation_bound(c, n, eps) = delta`: the positive root
/// of `n eps^2 - c2 L eps - c1 L = 0`, `L = log(2/delta)`.
pub fn epsilon_for(c: &BernsteinConstants, n: u64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    let l = (2.0 / delta).ln();
    let nf = n as f64;
    let b = c.c2 * l;
    Ok((b + (b * b + 4.0 * nf * c.c1 * l).sqrt()) / (2.0 * nf))
}

/// Deviation bound for independent, non-identical draws: the average of the
/// `C_{r,i}` replaces `C_r`. All certificates must share the same `r`.
pub fn heterogeneous_deviation_bound(
    mcerts: &[MomentCertificate],
    n: u64,
    eps: f64,
) -> Result<f64> {
    if mcerts.len() as u64 != n || n == 0 {
        return Err(Error::Domain(format!(
            "need one certificate per draw: got {} certificates for n = {n}",
            mcerts.len()
        )));
    }
    let r = mcerts[0].r;
    if let Some(other) = mcerts.iter().find(|m| m.r != r) {
        return Err(Error::MixedR {
            first: r,
            other: other.r,
        });
    }
    let mean_c: f64 = mcerts
        .iter()
        .map(|m| m.c_r)
        .collect::<CompensatedSum>()
        .value()
        / n as f64;
    let c = BernsteinConstants::from_values(2.0 * mean_c / (SQRT_PI * r * r), 2.0 / r);
    Ok(deviation_bound(&c, n, eps))
}
