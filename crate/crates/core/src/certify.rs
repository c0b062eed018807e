//! Certification of the moment condition `sum_k p_k^{1-r} <= C_r`.
//!
//! Power-law tails use the truncation index
//! `k1 = max{k0, ceil((eps (alpha(1-r) - 1) / c0)^{-1/(alpha(1-r) - 1)})}`;
//! ratio-dominated tails truncate where the dominating geometric series drops
//! below the slack. All partial sums are compensated and run in increasing `k`.

use std::f64::consts::E;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::distributions::{Mass, PmfModel, TailCertificate};
use crate::error::{Error, Result};
use crate::summation::{widen, CompensatedSum};

/// Largest truncation index any certification routine will visit.
pub const INDEX_CAP: u64 = 1_000_000_000;

/// First truncation index tried by [`entropy_interval`] and doubled from there.
pub const ENTROPY_START_INDEX: u64 = 64;

/// Number of candidate `r` values in [`select_r`].
pub const R_GRID_POINTS: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Power-law tail, truncation index from the closed-form `k1`.
    PowerLaw,
    /// Ratio-dominated tail, truncation where the geometric remainder fits.
    Ratio,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::PowerLaw => "powerlaw",
            Provenance::Ratio => "ratio",
        })
    }
}

/// A verified pair `(r, C_r)` with `sum_k p_k^{1-r} <= C_r <= sum + slack`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCertificate")]
pub struct MomentCertificate {
    pub r: f64,
    #[serde(rename = "C_r")]
    pub c_r: f64,
    pub slack: f64,
    pub truncation_index: u64,
    pub provenance: Provenance,
}

#[derive(Deserialize)]
struct RawCertificate {
    r: f64,
    #[serde(rename = "C_r")]
    c_r: f64,
    slack: f64,
    truncation_index: u64,
    provenance: Provenance,
}

impl TryFrom<RawCertificate> for MomentCertificate {
    type Error = Error;

    fn try_from(raw: RawCertificate) -> Result<Self> {
        MomentCertificate::new(
            raw.r,
            raw.c_r,
            raw.slack,
            raw.truncation_index,
            raw.provenance,
        )
    }
}

impl MomentCertificate {
    /// Assembles a certificate from its parts. `C_r = 0` is accepted as a
    /// degenerate value.
    pub fn new(
        r: f64,
        c_r: f64,
        slack: f64,
        truncation_index: u64,
        provenance: Provenance,
    ) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Domain(format!(
                "certificate r must lie in (0, 1), got {r}"
            )));
        }
        if !(c_r >= 0.0 && c_r.is_finite()) {
            return Err(Error::Domain(format!(
                "certificate C_r must be finite and nonnegative, got {c_r}"
            )));
        }
        if !(slack >= 0.0 && slack.is_finite()) {
            return Err(Error::Domain(format!(
                "certificate slack must be finite and nonnegative, got {slack}"
            )));
        }
        Ok(Self {
            r,
            c_r,
            slack,
            truncation_index,
            provenance,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("certificate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// The open interval `(0, r_max)` of admissible `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleInterval {
    pub r_max: f64,
}

impl AdmissibleInterval {
    pub fn contains(&self, r: f64) -> bool {
        r > 0.0 && r < self.r_max
    }

    fn check(&self, r: f64) -> Result<()> {
        if self.contains(r) {
            Ok(())
        } else {
            Err(Error::InadmissibleR {
                r,
                r_max: self.r_max,
            })
        }
    }
}

impl fmt::Display for AdmissibleInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(0, {})", self.r_max)
    }
}

/// Certified bracket `[lower, upper]` on the Shannon entropy, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyInterval {
    pub lower: f64,
    pub upper: f64,
    pub tolerance: f64,
}

impl EntropyInterval {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn contains(&self, h: f64) -> bool {
        self.lower <= h && h <= self.upper
    }
}

/// Admissible `r` for the model: `(0, (alpha - 1)/alpha)` under a power-law
/// tail, `(0, 1)` under a ratio-dominated tail.
pub fn admissible_r_interval(model: &PmfModel) -> Result<AdmissibleInterval> {
    let cert = model.tail_certificate()?;
    Ok(AdmissibleInterval {
        r_max: cert.r_max(),
    })
}

/// Default choice of `r`: half of `r_max` for power-law tails, `1/2` for
/// ratio-dominated tails.
pub fn default_r(cert: &TailCertificate) -> f64 {
    match cert {
        TailCertificate::PowerLaw { .. } => cert.r_max() / 2.0,
        TailCertificate::GeometricRatio { .. } => 0.5,
    }
}

fn check_slack(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "slack must be positive and finite, got {eps}"
        )))
    }
}

/// `sum_{k=from}^{to} p_k^s` over exactly known masses, plus the same sum over
/// upper bounds for masses that are only bounded.
struct PowerSums {
    exact: CompensatedSum,
    bounded: CompensatedSum,
}

impl PowerSums {
    fn new() -> Self {
        Self {
            exact: CompensatedSum::new(),
            bounded: CompensatedSum::new(),
        }
    }

    fn extend(&mut self, model: &PmfModel, s: f64, from: u64, to: u64) -> Result<()> {
        for k in from..=to {
            match model.mass_bound(k)? {
                Mass::Exact(lp) => self.exact.add((s * lp).exp()),
                Mass::Upper(lu) => self.bounded.add((s * lu).exp()),
            }
        }
        Ok(())
    }

    fn total(&self) -> f64 {
        self.exact.value() + self.bounded.value()
    }
}

/// Certifies `C_r` for a power-law dominated tail.
///
/// The returned slack is the requested `eps`, unless the rigorous remainder
/// `c0^{1-r} k1^{-(alpha(1-r)-1)} / (alpha(1-r)-1)` at the truncation index
/// exceeds it (possible when `c0 < 1`), in which case that remainder is added
/// instead and reported as the slack.
pub fn certify_moment_powerlaw(
    model: &PmfModel,
    cert: &TailCertificate,
    r: f64,
    eps: f64,
) -> Result<MomentCertificate> {
    let TailCertificate::PowerLaw { k0, c0, alpha } = *cert else {
        return Err(Error::Domain(
            "certify_moment_powerlaw needs a power-law certificate".into(),
        ));
    };
    AdmissibleInterval {
        r_max: cert.r_max(),
    }
    .check(r)?;
    check_slack(eps)?;
    let k1 = powerlaw_truncation_index(k0, c0, alpha, r, eps)?;
    let s = 1.0 - r;
    let mut sums = PowerSums::new();
    sums.extend(model, s, 1, k1)?;
    let remainder = cert
        .tail_power_bound(model, s, k1)?
        .expect("k1 >= k0 and r is admissible");
    let slack = eps.max(remainder);
    MomentCertificate::new(r, sums.total() + slack, slack, k1, Provenance::PowerLaw)
}

/// `max{k0, ceil((eps (alpha(1-r) - 1) / c0)^{-1/(alpha(1-r) - 1)})}`, capped
/// at [`INDEX_CAP`].
pub fn powerlaw_truncation_index(k0: u64, c0: f64, alpha: f64, r: f64, eps: f64) -> Result<u64> {
    let d = alpha * (1.0 - r) - 1.0;
    let raw = (eps * d / c0).powf(-1.0 / d).ceil();
    let k1 = raw.max(k0 as f64);
    if !(k1 <= INDEX_CAP as f64) {
        return Err(Error::ResourceLimit {
            what: "power-law truncation index",
            index: k1,
            cap: INDEX_CAP,
        });
    }
    Ok(k1 as u64)
}

/// Certifies `C_r` for a ratio-dominated tail: the smallest `m >= k0` with
/// `p_{m+1}^{1-r} / (1 - q^{1-r}) <= eps` fixes `C_r = sum_{k<=m} p_k^{1-r} + eps`.
pub fn certify_moment_ratio(
    model: &PmfModel,
    cert: &TailCertificate,
    r: f64,
    eps: f64,
) -> Result<MomentCertificate> {
    let TailCertificate::GeometricRatio { k0, .. } = *cert else {
        return Err(Error::Domain(
            "certify_moment_ratio needs a ratio certificate".into(),
        ));
    };
    AdmissibleInterval { r_max: 1.0 }.check(r)?;
    check_slack(eps)?;
    let s = 1.0 - r;
    let mut sums = PowerSums::new();
    if k0 > 1 {
        sums.extend(model, s, 1, k0 - 1)?;
    }
    let mut m = k0;
    loop {
        if m > INDEX_CAP {
            return Err(Error::ResourceLimit {
                what: "ratio truncation search",
                index: m as f64,
                cap: INDEX_CAP,
            });
        }
        sums.extend(model, s, m, m)?;
        let remainder = cert.tail_power_bound(model, s, m)?.expect("m >= k0");
        if remainder <= eps {
            return MomentCertificate::new(r, sums.total() + eps, eps, m, Provenance::Ratio);
        }
        m += 1;
    }
}

/// Certifies `C_r` with whichever routine matches the model's tail
/// certificate; `r` defaults to [`default_r`].
pub fn certify(model: &PmfModel, r: Option<f64>, eps: f64) -> Result<MomentCertificate> {
    let cert = model.tail_certificate()?;
    let r = r.unwrap_or_else(|| default_r(&cert));
    match cert {
        TailCertificate::PowerLaw { .. } => certify_moment_powerlaw(model, &cert, r, eps),
        TailCertificate::GeometricRatio { .. } => certify_moment_ratio(model, &cert, r, eps),
    }
}

/// Picks `r` from a 21-point grid over `(0, r_max)` minimising the bound
/// denominator `c1 + c2 * target_eps`. Grid points whose certification
/// exceeds the index cap are skipped.
pub fn select_r(model: &PmfModel, slack: f64, target_eps: f64) -> Result<MomentCertificate> {
    let r_max = admissible_r_interval(model)?.r_max;
    let mut best: Option<(f64, MomentCertificate)> = None;
    let mut last_err = None;
    for j in 1..=R_GRID_POINTS {
        let r = r_max * j as f64 / (R_GRID_POINTS + 1) as f64;
        match certify(model, Some(r), slack) {
            Ok(mc) => {
                let c = crate::bounds::BernsteinConstants::new(&mc);
                let score = c.c1 + c.c2 * target_eps;
                if best.as_ref().is_none_or(|(b, _)| score < *b) {
                    best = Some((score, mc));
                }
            }
            Err(e @ Error::ResourceLimit { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    match (best, last_err) {
        (Some((_, mc)), _) => Ok(mc),
        (None, Some(e)) => Err(e),
        (None, None) => unreachable!("grid is non-empty"),
    }
}

/// `sum_{k=1}^{big_k} p_k^{1-r}`: an uncertified lower bound on the series.
pub fn power_sum_partial(model: &PmfModel, r: f64, big_k: u64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("r must lie in (0, 1), got {r}")));
    }
    let s = 1.0 - r;
    let mut acc = CompensatedSum::new();
    for k in 1..=big_k {
        acc.add((s * model.log_pmf(k)?).exp());
    }
    Ok(acc.value())
}

/// Certified entropy bracket.
///
/// The head `sum_{k<=K} -p_k log p_k` is summed exactly; every tail term obeys
/// `-p log p <= p^{1-r} / (e r)`, so the certified power-sum remainder divided
/// by `e r` bounds the rest. `K` doubles from 64 until that bound is within
/// `tol`.
pub fn entropy_interval(
    model: &PmfModel,
    mcert: &MomentCertificate,
    tol: f64,
) -> Result<EntropyInterval> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Domain(format!(
            "entropy tolerance must be positive, got {tol}"
        )));
    }
    let cert = model.tail_certificate()?;
    let r = mcert.r;
    AdmissibleInterval {
        r_max: cert.r_max(),
    }
    .check(r)?;
    let s = 1.0 - r;
    let scale = 1.0 / (E * r);

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
                what: "entropy truncation index",
                index: big_k as f64,
                cap: INDEX_CAP,
            });
        }
        for k in done + 1..=big_k {
            match model.mass_bound(k)? {
                Mass::Exact(lp) => head.add(-lp.exp() * lp),
                Mass::Upper(lu) => bounded.add((s * lu).exp() * scale),
            }
        }
        done = big_k;
        if let Some(rem) = cert.tail_power_bound(model, s, big_k)? {
            let width = rem * scale + bounded.value();
            if width <= tol {
                let (lower, upper) = widen(head.value(), head.value() + width);
                return Ok(EntropyInterval {
                    lower,
                    upper,
                    tolerance: tol,
                });
            }
        }
        if ceiling == Some(big_k) {
            return Err(Error::ResourceLimit {
                what: "entropy truncation index (tail beyond the table is only bounded)",
                index: big_k as f64,
                cap: big_k,
            });
        }
        big_k *= 2;
    }
}

/// `C_r / (e r)`, an upper bound on the entropy.
pub fn entropy_upper_coarse(mcert: &MomentCertificate) -> f64 {
    mcert.c_r / (E * mcert.r)
}
