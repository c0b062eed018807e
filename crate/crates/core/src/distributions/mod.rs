//! Discrete distributions on the positive integers `{1, 2, ...}`.
//!
//! Every family is evaluated in log-space. Families that live naturally on
//! the counts `{0, 1, ...}` (Poisson, negative binomial) are shifted so that
//! outcome `k` corresponds to count `k - 1`.

mod sampler;
mod tail;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use sampler::{sample, Sampler};
pub use tail::TailCertificate;

use crate::error::{Error, Result};
use crate::special::{ln_gamma, zeta};

/// Slack allowed on the total of a tabulated pmf.
pub const TABULATED_NORMALIZATION_TOL: f64 = 1e-12;

/// Parametric family or tabulated masses, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Poisson {
        rate: f64,
    },
    Geometric {
        p: f64,
    },
    NegativeBinomial {
        size: f64,
        p: f64,
    },
    Zeta {
        exponent: f64,
    },
    Tabulated {
        probs: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tail: Option<TailCertificate>,
    },
}

/// On-disk layout of a tabulated pmf.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TabulatedDoc {
    pub probs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailCertificate>,
}

/// What is known about a single mass `p_k`, in log-space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Mass {
    Exact(f64),
    /// Only an upper bound is known (tabulated pmf past its listed range).
    Upper(f64),
}

impl Mass {
    pub(crate) fn log_upper(self) -> f64 {
        match self {
            Mass::Exact(v) | Mass::Upper(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Precomputed {
    Poisson {
        ln_rate: f64,
    },
    Geometric {
        ln_p: f64,
        ln_q: f64,
    },
    NegativeBinomial {
        ln_gamma_size: f64,
        size_ln_p: f64,
        ln_q: f64,
    },
    Zeta {
        ln_zeta: f64,
    },
    Tabulated {
        log_probs: Arc<[f64]>,
        total: f64,
    },
}

/// A validated probability mass function on `{1, 2, ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Family", into = "Family")]
pub struct PmfModel {
    family: Family,
    #[serde(skip)]
    pre: Precomputed,
}

fn open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!(
            "{name} must lie in (0, 1), got {v}"
        )))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl PmfModel {
    pub fn new(family: Family) -> Result<Self> {
        let pre = match &family {
            Family::Poisson { rate } => {
                positive("poisson rate", *rate)?;
                Precomputed::Poisson { ln_rate: rate.ln() }
            }
            Family::Geometric { p } => {
                open_unit("geometric success probability", *p)?;
                Precomputed::Geometric {
                    ln_p: p.ln(),
                    ln_q: (-p).ln_1p(),
                }
            }
            Family::NegativeBinomial { size, p } => {
                positive("negative binomial size", *size)?;
                open_unit("negative binomial success probability", *p)?;
                Precomputed::NegativeBinomial {
                    ln_gamma_size: ln_gamma(*size),
                    size_ln_p: size * p.ln(),
                    ln_q: (-p).ln_1p(),
                }
            }
            Family::Zeta { exponent } => {
                if !(*exponent > 1.0 && exponent.is_finite()) {
                    return Err(Error::InvalidModel(format!(
                        "zeta exponent must exceed 1, got {exponent}"
                    )));
                }
                Precomputed::Zeta {
                    ln_zeta: zeta(*exponent).ln(),
                }
            }
            Family::Tabulated { probs, tail } => validate_table(probs, tail.as_ref())?,
        };
        Ok(Self { family, pre })
    }

    pub fn poisson(rate: f64) -> Result<Self> {
        Self::new(Family::Poisson { rate })
    }

    pub fn geometric(p: f64) -> Result<Self> {
        Self::new(Family::Geometric { p })
    }

    pub fn negative_binomial(size: f64, p: f64) -> Result<Self> {
        Self::new(Family::NegativeBinomial { size, p })
    }

    pub fn zeta(exponent: f64) -> Result<Self> {
        Self::new(Family::Zeta { exponent })
    }

    pub fn tabulated(probs: Vec<f64>, tail: Option<TailCertificate>) -> Result<Self> {
        Self::new(Family::Tabulated { probs, tail })
    }

    /// Parses the tabulated JSON layout `{"probs": [...], "tail": {...}}`.
    pub fn from_tabulated_json(text: &str) -> Result<Self> {
        let doc: TabulatedDoc = serde_json::from_str(text)?;
        Self::tabulated(doc.probs, doc.tail)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// `log p_k` for `k >= 1`.
    pub fn log_pmf(&self, k: u64) -> Result<f64> {
        match self.mass_bound(k)? {
            Mass::Exact(v) => Ok(v),
            Mass::Upper(_) => Err(Error::MassUnknown { k }),
        }
    }

    pub fn pmf(&self, k: u64) -> Result<f64> {
        self.log_pmf(k).map(f64::exp)
    }

    pub(crate) fn mass_bound(&self, k: u64) -> Result<Mass> {
        if k == 0 {
            return Err(Error::Domain("outcomes are indexed from 1".into()));
        }
        let kf = k as f64;
        let count = kf - 1.0;
        let v = match (&self.family, &self.pre) {
            (Family::Poisson { rate }, Precomputed::Poisson { ln_rate }) => {
                -rate + count * ln_rate - ln_gamma(kf)
            }
            (Family::Geometric { .. }, Precomputed::Geometric { ln_p, ln_q }) => {
                ln_p + count * ln_q
            }
            (
                Family::NegativeBinomial { size, .. },
                Precomputed::NegativeBinomial {
                    ln_gamma_size,
                    size_ln_p,
                    ln_q,
                },
            ) => ln_gamma(count + size) - ln_gamma_size - ln_gamma(kf) + size_ln_p + count * ln_q,
            (Family::Zeta { exponent }, Precomputed::Zeta { ln_zeta }) => {
                -exponent * kf.ln() - ln_zeta
            }
            (Family::Tabulated { tail, .. }, Precomputed::Tabulated { log_probs, total }) => {
                if let Some(lp) = log_probs.get((k - 1) as usize) {
                    return Ok(Mass::Exact(*lp));
                }
                let Some(cert) = tail else {
                    return Err(Error::MassUnknown { k });
                };
                let len = log_probs.len() as u64;
                let anchor = Some((len, log_probs[log_probs.len() - 1]));
                let missing = (1.0 - total).max(0.0).ln();
                let bound = match cert.log_mass_envelope(k, anchor) {
                    Some(env) => env.min(missing),
                    None => missing,
                };
                return Ok(Mass::Upper(bound));
            }
            _ => unreachable!("precomputed data always matches its family"),
        };
        Ok(Mass::Exact(v))
    }

    /// Number of explicitly listed masses for a tabulated model.
    pub fn listed_len(&self) -> Option<u64> {
        match &self.pre {
            Precomputed::Tabulated { log_probs, .. } => Some(log_probs.len() as u64),
            _ => None,
        }
    }

    /// Whether the listed masses of a tabulated model account for the whole
    /// distribution (always true for parametric families).
    pub fn is_complete(&self) -> bool {
        match &self.pre {
            Precomputed::Tabulated { total, .. } => *total >= 1.0 - TABULATED_NORMALIZATION_TOL,
            _ => true,
        }
    }

    /// Last index worth summing explicitly: past the listed range of an
    /// incomplete table only upper bounds are known, so the certified
    /// remainder from there on is as good as any longer partial sum.
    pub(crate) fn truncation_ceiling(&self) -> Option<u64> {
        if self.is_complete() {
            return None;
        }
        let k0 = self.tail_certificate().map(|c| c.k0()).unwrap_or(1);
        self.listed_len().map(|len| len.max(k0))
    }

    /// Closed-form survival function `P(X > k)` where one is available.
    pub(crate) fn survival(&self, k: u64) -> Option<f64> {
        match (&self.family, &self.pre) {
            (Family::Geometric { .. }, Precomputed::Geometric { ln_q, .. }) => {
                Some((k as f64 * ln_q).exp())
            }
            (Family::Zeta { exponent }, Precomputed::Zeta { ln_zeta }) => {
                Some((crate::special::hurwitz_zeta(*exponent, k as f64 + 1.0).ln() - ln_zeta).exp())
            }
            _ => None,
        }
    }

    /// Domination statement for the tail of the pmf.
    ///
    /// Zeta(a) gets the exact power law `c0 = 1/zeta(a)`. The light-tailed
    /// families get ratio certificates: Geometric(p) has constant ratio
    /// `1 - p`, Poisson(rate) has ratio `rate / k <= 1/2` from
    /// `k0 = ceil(2 rate)`, and the negative binomial ratio
    /// `(k - 1 + size) / k * (1 - p)` falls below `q = 1 - p/2` from the first
    /// index where it does so (the ratio is monotone in `k`).
    pub fn tail_certificate(&self) -> Result<TailCertificate> {
        match &self.family {
            Family::Zeta { exponent } => Ok(TailCertificate::PowerLaw {
                k0: 1,
                c0: 1.0 / zeta(*exponent),
                alpha: *exponent,
            }),
            Family::Geometric { p } => Ok(TailCertificate::GeometricRatio { k0: 1, q: 1.0 - p }),
            Family::Poisson { rate } => Ok(TailCertificate::GeometricRatio {
                k0: ((2.0 * rate).ceil() as u64).max(1),
                q: 0.5,
            }),
            Family::NegativeBinomial { size, p } => {
                let rho = 1.0 - p;
                let q = 1.0 - 0.5 * p;
                let ratio = |k: u64| (k as f64 - 1.0 + size) / k as f64 * rho;
                let mut k0 = if *size <= 1.0 {
                    1
                } else {
                    ((size - 1.0) / (q / rho - 1.0)).ceil().max(1.0) as u64
                };
                while k0 > 1 && ratio(k0 - 1) <= q {
                    k0 -= 1;
                }
                while ratio(k0) > q {
                    k0 += 1;
                }
                Ok(TailCertificate::GeometricRatio { k0, q })
            }
            Family::Tabulated { tail, .. } => {
                tail.ok_or_else(|| Error::MissingCertificate(self.to_string()))
            }
        }
    }
}

fn validate_table(probs: &[f64], tail: Option<&TailCertificate>) -> Result<Precomputed> {
    if probs.is_empty() {
        return Err(Error::InvalidModel(
            "tabulated pmf needs at least one mass".into(),
        ));
    }
    if let Some((i, p)) = probs
        .iter()
        .enumerate()
        .find(|(_, p)| !(**p > 0.0 && **p <= 1.0))
    {
        return Err(Error::InvalidModel(format!(
            "mass p_{} = {p} is not in (0, 1]",
            i + 1
        )));
    }
    let total: f64 = probs
        .iter()
        .copied()
        .collect::<crate::summation::CompensatedSum>()
        .value();
    if total > 1.0 + TABULATED_NORMALIZATION_TOL {
        return Err(Error::InvalidModel(format!(
            "tabulated masses sum to {total} > 1"
        )));
    }
    if let Some(cert) = tail {
        cert.validate()?;
    }
    let missing = 1.0 - total;
    if missing > TABULATED_NORMALIZATION_TOL {
        let Some(cert) = tail else {
            return Err(Error::InvalidModel(format!(
                "tabulated masses sum to {total}; a tail certificate is required for the missing mass"
            )));
        };
        let len = probs.len() as u64;
        // necessary condition: the certified envelope must be able to carry the missing mass
        let capacity = match *cert {
            TailCertificate::PowerLaw { k0, c0, alpha } if k0 <= len => {
                Some(c0 * (len as f64).powf(1.0 - alpha) / (alpha - 1.0))
            }
            TailCertificate::GeometricRatio { k0, q } if k0 <= len => {
                Some(probs[probs.len() - 1] * q / (1.0 - q))
            }
            _ => None,
        };
        if let Some(cap) = capacity {
            if cap < missing {
                return Err(Error::InvalidModel(format!(
                    "tail certificate allows at most {cap:e} of mass beyond index {len}, but {missing:e} is missing"
                )));
            }
        }
    }
    Ok(Precomputed::Tabulated {
        log_probs: probs.iter().map(|p| p.ln()).collect(),
        total,
    })
}

impl TryFrom<Family> for PmfModel {
    type Error = Error;

    fn try_from(family: Family) -> Result<Self> {
        PmfModel::new(family)
    }
}

impl From<PmfModel> for Family {
    fn from(model: PmfModel) -> Self {
        model.family
    }
}

impl fmt::Display for PmfModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::Poisson { rate } => write!(f, "poisson:{rate}"),
            Family::Geometric { p } => write!(f, "geometric:{p}"),
            Family::NegativeBinomial { size, p } => write!(f, "negbinomial:{size},{p}"),
            Family::Zeta { exponent } => write!(f, "zeta:{exponent}"),
            Family::Tabulated { probs, .. } => write!(f, "tabulated[{}]", probs.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn closed_form_log_masses() {
        let g = PmfModel::geometric(0.5).unwrap();
        assert_relative_eq!(
            g.log_pmf(3).unwrap(),
            (1.0f64 / 8.0).ln(),
            max_relative = 1e-15
        );

        let p = PmfModel::poisson(1.0).unwrap();
        assert_relative_eq!(p.log_pmf(1).unwrap(), -1.0, max_relative = 1e-15);
        // count 4: e^{-1} / 24
        assert_relative_eq!(
            p.log_pmf(5).unwrap(),
            -1.0 - 24f64.ln(),
            max_relative = 1e-14
        );

        let z = PmfModel::zeta(2.0).unwrap();
        assert_relative_eq!(
            z.log_pmf(1).unwrap(),
            (6.0 / (PI * PI)).ln(),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            z.log_pmf(1).unwrap(),
            -0.497_700_302_470_745_3,
            max_relative = 1e-14
        );
    }

    #[test]
    fn negative_binomial_matches_direct_product() {
        // size 2: P(count j) = (j + 1) p^2 (1-p)^j
        let nb = PmfModel::negative_binomial(2.0, 0.3).unwrap();
        for k in 1..30u64 {
            let j = (k - 1) as f64;
            let direct = (j + 1.0) * 0.09 * 0.7f64.powf(j);
            assert_relative_eq!(nb.pmf(k).unwrap(), direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn no_underflow_far_out() {
        let p = PmfModel::poisson(1.0).unwrap();
        let v = p.log_pmf(1_000_000).unwrap();
        assert!(v.is_finite() && v < -1e7);
        let nb = PmfModel::negative_binomial(3.5, 0.2).unwrap();
        assert!(nb.log_pmf(1_000_000).unwrap().is_finite());
    }

    #[test]
    fn domain_and_unknown_mass_errors() {
        let g = PmfModel::geometric(0.5).unwrap();
        assert!(matches!(g.log_pmf(0), Err(Error::Domain(_))));

        let t = PmfModel::tabulated(vec![0.5, 0.25, 0.25], None).unwrap();
        assert!(matches!(t.log_pmf(4), Err(Error::MassUnknown { k: 4 })));
        assert!(t.is_complete());
    }

    #[test]
    fn parameter_domains_are_enforced() {
        assert!(PmfModel::poisson(0.0).is_err());
        assert!(PmfModel::geometric(1.0).is_err());
        assert!(PmfModel::geometric(0.0).is_err());
        assert!(PmfModel::negative_binomial(-1.0, 0.5).is_err());
        assert!(PmfModel::zeta(1.0).is_err());
        assert!(PmfModel::tabulated(vec![], None).is_err());
        assert!(PmfModel::tabulated(vec![0.5, 0.0, 0.5], None).is_err());
        assert!(PmfModel::tabulated(vec![0.7, 0.7], None).is_err());
    }

    #[test]
    fn incomplete_table_needs_consistent_certificate() {
        assert!(PmfModel::tabulated(vec![0.5, 0.25], None).is_err());
        // ratio 1/2 from the last mass carries exactly 0.25 more
        let ok = PmfModel::tabulated(
            vec![0.5, 0.25],
            Some(TailCertificate::GeometricRatio { k0: 1, q: 0.5 }),
        )
        .unwrap();
        assert!(!ok.is_complete());
        assert!(matches!(ok.log_pmf(3), Err(Error::MassUnknown { .. })));
        let too_thin = PmfModel::tabulated(
            vec![0.5, 0.25],
            Some(TailCertificate::GeometricRatio { k0: 1, q: 0.1 }),
        );
        assert!(too_thin.is_err());
        let thin_power = PmfModel::tabulated(
            vec![0.5, 0.25],
            Some(TailCertificate::PowerLaw {
                k0: 1,
                c0: 0.01,
                alpha: 2.0,
            }),
        );
        assert!(thin_power.is_err());
    }

    #[test]
    fn tabulated_json_layout() {
        let m = PmfModel::from_tabulated_json(
            r#"{"probs": [0.5, 0.25], "tail": {"type": "ratio", "k0": 1, "q": 0.5}}"#,
        )
        .unwrap();
        assert_eq!(
            m.tail_certificate().unwrap(),
            TailCertificate::GeometricRatio { k0: 1, q: 0.5 }
        );
        let m = PmfModel::from_tabulated_json(
            r#"{"probs": [0.6, 0.2], "tail": {"type": "powerlaw", "k0": 2, "c0": 1.0, "alpha": 2.0}}"#,
        )
        .unwrap();
        assert!(matches!(
            m.tail_certificate().unwrap(),
            TailCertificate::PowerLaw { .. }
        ));
        let complete = PmfModel::from_tabulated_json(r#"{"probs": [0.5, 0.5]}"#).unwrap();
        assert!(matches!(
            complete.tail_certificate(),
            Err(Error::MissingCertificate(_))
        ));
        assert!(PmfModel::from_tabulated_json(r#"{"probs": [0.5]}"#).is_err());
    }

    #[test]
    fn family_certificates() {
        assert_eq!(
            PmfModel::geometric(0.5)
                .unwrap()
                .tail_certificate()
                .unwrap(),
            TailCertificate::GeometricRatio { k0: 1, q: 0.5 }
        );
        assert_eq!(
            PmfModel::poisson(1.0).unwrap().tail_certificate().unwrap(),
            TailCertificate::GeometricRatio { k0: 2, q: 0.5 }
        );
        match PmfModel::zeta(2.0).unwrap().tail_certificate().unwrap() {
            TailCertificate::PowerLaw { k0, c0, alpha } => {
                assert_eq!(k0, 1);
                assert_eq!(alpha, 2.0);
                assert_relative_eq!(c0, 0.607_927_101_854_026_6, max_relative = 1e-14);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn poisson_ratio_certificate_is_tight_by_brute_force_scan() {
        // the first 1-based index from which every ratio up to 10^3 is <= 1/2
        for &rate in &[0.3, 1.0, 2.5, 7.0] {
            let m = PmfModel::poisson(rate).unwrap();
            let ratio = |k: u64| (m.log_pmf(k + 1).unwrap() - m.log_pmf(k).unwrap()).exp();
            let first = (1..1000u64)
                .find(|&k| (k..1000).all(|j| ratio(j) <= 0.5 + 1e-12))
                .unwrap();
            assert_eq!(m.tail_certificate().unwrap().k0(), first, "rate {rate}");
        }
    }

    #[test]
    fn negative_binomial_certificate_holds_from_k0() {
        for &(size, p) in &[(2.0, 0.3), (0.5, 0.4), (10.0, 0.05), (1.0, 0.9)] {
            let m = PmfModel::negative_binomial(size, p).unwrap();
            let TailCertificate::GeometricRatio { k0, q } = m.tail_certificate().unwrap() else {
                panic!("expected ratio certificate")
            };
            assert!(q < 1.0);
            for k in k0..k0 + 2000 {
                let r = (m.log_pmf(k + 1).unwrap() - m.log_pmf(k).unwrap()).exp();
                assert!(
                    r <= q * (1.0 + 1e-12),
                    "size {size} p {p} k {k} ratio {r} q {q}"
                );
            }
            if k0 > 1 {
                let r = (m.log_pmf(k0).unwrap() - m.log_pmf(k0 - 1).unwrap()).exp();
                assert!(r > q, "k0 is not the smallest index");
            }
        }
    }

    #[test]
    fn certificates_pass_spot_checks() {
        let models = [
            PmfModel::geometric(0.5).unwrap(),
            PmfModel::geometric(0.01).unwrap(),
            PmfModel::poisson(1.0).unwrap(),
            PmfModel::poisson(40.0).unwrap(),
            PmfModel::negative_binomial(2.0, 0.3).unwrap(),
            PmfModel::zeta(2.0).unwrap(),
            PmfModel::zeta(1.5).unwrap(),
        ];
        for m in &models {
            let cert = m.tail_certificate().unwrap();
            assert!(cert.spot_check(m, 1000, 11).unwrap(), "{m}");
        }
    }

    #[test]
    fn bogus_certificate_fails_spot_check() {
        let m = PmfModel::zeta(2.0).unwrap();
        let cert = TailCertificate::PowerLaw {
            k0: 1,
            c0: 0.5,
            alpha: 2.0,
        };
        assert!(!cert.spot_check(&m, 100, 3).unwrap());
        let g = PmfModel::geometric(0.3).unwrap();
        let cert = TailCertificate::GeometricRatio { k0: 1, q: 0.5 };
        assert!(!cert.spot_check(&g, 100, 3).unwrap());
    }

    #[test]
    fn serde_round_trip_revalidates() {
        let m = PmfModel::negative_binomial(2.0, 0.3).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        let back: PmfModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<PmfModel>(r#"{"family":"zeta","exponent":0.5}"#).is_err());
    }
}
