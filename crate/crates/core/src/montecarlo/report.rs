use std::io::Write;

use serde::{Deserialize, Serialize};

use super::Centering;
use crate::bounds::is_vacuous;
use crate::certify::{EntropyInterval, MomentCertificate};
use crate::error::{Error, Result};

/// Margin, in standard errors, before an exceedance counts as a failure.
pub const VERDICT_SIGMAS: f64 = 3.0;

/// Below this many hits the Wilson score half-width replaces the Wald one.
pub const WILSON_BELOW_HITS: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Vacuous,
    Fail,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Vacuous => "VACUOUS",
            Verdict::Fail => "FAIL",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsRecord {
    pub eps: f64,
    pub hit_count: u64,
    pub frequency: f64,
    pub stderr: f64,
    pub bound_value: f64,
    pub verdict: Verdict,
}

/// Wald standard error, or the one-sigma Wilson score half-width when fewer
/// than [`WILSON_BELOW_HITS`] hits were seen.
pub fn frequency_stderr(hits: u64, replicates: u64) -> f64 {
    let n = replicates as f64;
    let f = hits as f64 / n;
    if hits >= WILSON_BELOW_HITS {
        (f * (1.0 - f) / n).sqrt()
    } else {
        (f * (1.0 - f) / n + 1.0 / (4.0 * n * n)).sqrt() / (1.0 + 1.0 / n)
    }
}

pub fn verdict_for(frequency: f64, stderr: f64, bound: f64) -> Verdict {
    if is_vacuous(bound) {
        Verdict::Vacuous
    } else if frequency - VERDICT_SIGMAS * stderr > bound {
        Verdict::Fail
    } else {
        Verdict::Pass
    }
}

impl EpsRecord {
    pub fn new(eps: f64, hit_count: u64, replicates: u64, bound_value: f64) -> Self {
        let frequency = hit_count as f64 / replicates as f64;
        let stderr = frequency_stderr(hit_count, replicates);
        Self {
            eps,
            hit_count,
            frequency,
            stderr,
            bound_value,
            verdict: verdict_for(frequency, stderr, bound_value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub model: String,
    pub n: u64,
    pub replicates: u64,
    pub seed: u64,
    pub certificate: MomentCertificate,
    pub c1: f64,
    pub c2: f64,
    pub entropy: EntropyInterval,
    pub centering: Centering,
    pub records: Vec<EpsRecord>,
    pub wall_time_secs: f64,
}

impl SimulationReport {
    pub fn verdict(&self) -> Verdict {
        summarize(self.records.iter().map(|r| r.verdict)).overall
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictSummary {
    pub pass: usize,
    pub vacuous: usize,
    pub fail: usize,
    pub overall: Verdict,
}

fn summarize(verdicts: impl Iterator<Item = Verdict>) -> VerdictSummary {
    let (mut pass, mut vacuous, mut fail) = (0, 0, 0);
    for v in verdicts {
        match v {
            Verdict::Pass => pass += 1,
            Verdict::Vacuous => vacuous += 1,
            Verdict::Fail => fail += 1,
        }
    }
    let overall = if fail > 0 {
        Verdict::Fail
    } else if pass > 0 {
        Verdict::Pass
    } else {
        Verdict::Vacuous
    };
    VerdictSummary {
        pass,
        vacuous,
        fail,
        overall,
    }
}

/// FAIL if any report fails.
pub fn aggregate_verdict(reports: &[SimulationReport]) -> Verdict {
    summarize(
        reports
            .iter()
            .flat_map(|r| r.records.iter().map(|x| x.verdict)),
    )
    .overall
}

/// Re-derives frequency, standard error and verdict from the stored counts
/// and rejects the report if any stored field disagrees.
pub fn verify_bound(report: &SimulationReport) -> Result<VerdictSummary> {
    if report.replicates == 0 {
        return Err(Error::Integrity("report has zero replicates".into()));
    }
    for rec in &report.records {
        if rec.hit_count > report.replicates {
            return Err(Error::Integrity(format!(
                "eps {}: {} hits out of {} replicates",
                rec.eps, rec.hit_count, report.replicates
            )));
        }
        let fresh = EpsRecord::new(rec.eps, rec.hit_count, report.replicates, rec.bound_value);
        if (fresh.frequency - rec.frequency).abs() > 1e-12 {
            return Err(Error::Integrity(format!(
                "eps {}: stored frequency {} but {} / {} = {}",
                rec.eps, rec.frequency, rec.hit_count, report.replicates, fresh.frequency
            )));
        }
        if (fresh.stderr - rec.stderr).abs() > 1e-12 {
            return Err(Error::Integrity(format!(
                "eps {}: stored stderr {} but recomputed {}",
                rec.eps, rec.stderr, fresh.stderr
            )));
        }
        if fresh.verdict != rec.verdict {
            return Err(Error::Integrity(format!(
                "eps {}: stored verdict {} but recomputed {}",
                rec.eps, rec.verdict, fresh.verdict
            )));
        }
    }
    Ok(summarize(report.records.iter().map(|r| r.verdict)))
}

#[derive(Serialize)]
struct CsvRow<'a> {
    model: &'a str,
    n: u64,
    replicates: u64,
    seed: u64,
    r: f64,
    #[serde(rename = "C_r")]
    c_r: f64,
    slack: f64,
    c1: f64,
    c2: f64,
    entropy_lower: f64,
    entropy_upper: f64,
    eps: f64,
    hit_count: u64,
    frequency: f64,
    stderr: f64,
    bound_value: f64,
    verdict: Verdict,
}

/// One row per `(report, eps)`. Wall time is left out so that identical runs
/// produce identical files.
pub fn write_csv<W: Write>(reports: &[SimulationReport], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for rep in reports {
        for rec in &rep.records {
            w.serialize(CsvRow {
                model: &rep.model,
                n: rep.n,
                replicates: rep.replicates,
                seed: rep.seed,
                r: rep.certificate.r,
                c_r: rep.certificate.c_r,
                slack: rep.certificate.slack,
                c1: rep.c1,
                c2: rep.c2,
                entropy_lower: rep.entropy.lower,
                entropy_upper: rep.entropy.upper,
                eps: rec.eps,
                hit_count: rec.hit_count,
                frequency: rec.frequency,
                stderr: rec.stderr,
                bound_value: rec.bound_value,
                verdict: rec.verdict,
            })?;
        }
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::Provenance;

    fn report_with(records: Vec<EpsRecord>, replicates: u64) -> SimulationReport {
        SimulationReport {
            model: "geometric:0.5".into(),
            n: 200,
            replicates,
            seed: 42,
            certificate: MomentCertificate::new(0.5, 2.4142136, 1e-6, 44, Provenance::Ratio)
                .unwrap(),
            c1: 10.89657,
            c2: 4.0,
            entropy: EntropyInterval {
                lower: 1.386294,
                upper: 1.386295,
                tolerance: 1e-6,
            },
            centering: Centering::Midpoint,
            records,
            wall_time_secs: 0.0,
        }
    }

    #[test]
    fn verdict_examples() {
        // frequency 0.10 with stderr 0.001 against 0.1543
        let pass = EpsRecord::new(0.4, 9_000, 90_000, 0.1543);
        assert!((pass.frequency - 0.10).abs() < 1e-15 && (pass.stderr - 0.001).abs() < 1e-12);
        assert_eq!(pass.verdict, Verdict::Pass);
        // frequency 0.30 with stderr 0.001
        let fail = EpsRecord::new(0.4, 63_000, 210_000, 0.1543);
        assert!((fail.stderr - 0.001).abs() < 1e-12);
        assert_eq!(fail.verdict, Verdict::Fail);
        let vac = EpsRecord::new(0.4, 200_000, 210_000, 1.7);
        assert_eq!(vac.verdict, Verdict::Vacuous);

        let rep = report_with(vec![pass], 90_000);
        assert_eq!(verify_bound(&rep).unwrap().overall, Verdict::Pass);
        assert_eq!(verify_bound(&rep).unwrap(), verify_bound(&rep).unwrap());
        let rep = report_with(vec![fail], 210_000);
        assert_eq!(verify_bound(&rep).unwrap().overall, Verdict::Fail);
        let rep = report_with(vec![vac], 210_000);
        assert_eq!(verify_bound(&rep).unwrap().overall, Verdict::Vacuous);
    }

    #[test]
    fn tampered_reports_are_rejected() {
        let mut rec = EpsRecord::new(0.4, 63_000, 210_000, 0.1543);
        rec.verdict = Verdict::Pass;
        assert!(matches!(
            verify_bound(&report_with(vec![rec], 210_000)),
            Err(Error::Integrity(_))
        ));
        let mut rec = EpsRecord::new(0.4, 9_000, 90_000, 0.1543);
        rec.frequency = 0.05;
        assert!(matches!(
            verify_bound(&report_with(vec![rec], 90_000)),
            Err(Error::Integrity(_))
        ));
        let rec = EpsRecord::new(0.4, 9_000, 90_000, 0.1543);
        assert!(matches!(
            verify_bound(&report_with(vec![rec], 100)),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn wilson_fallback_has_positive_width_at_zero() {
        let se = frequency_stderr(0, 10_000);
        assert!(se > 0.0 && se < 1e-4);
        assert_eq!(frequency_stderr(5, 100), (0.05f64 * 0.95 / 100.0).sqrt());
    }

    #[test]
    fn csv_has_one_row_per_eps() {
        let rep = report_with(
            vec![
                EpsRecord::new(0.2, 10, 1000, 0.9),
                EpsRecord::new(0.4, 1, 1000, 0.3),
            ],
            1000,
        );
        let mut buf = Vec::new();
        write_csv(&[rep.clone(), rep], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text
            .lines()
            .next()
            .unwrap()
            .starts_with("model,n,replicates,seed,r,C_r"));
        assert!(text.contains(",PASS"));
    }
}
