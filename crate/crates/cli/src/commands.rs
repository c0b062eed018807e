use std::path::Path;

use anyhow::{bail, Context, Result};
use entbound_core::montecarlo::{
    aggregate_verdict, derive_seed, estimate_deviation_probability_with, sweep_with, write_csv,
    Centering, Execution, SimulationConfig, SimulationReport, SweepError, Verdict,
};
use entbound_core::{
    admissible_r_interval, certify as certify_model, deviation_bound, epsilon_for, is_vacuous,
    min_sample_size, verify_bound, BernsteinConstants, MomentCertificate, PmfModel,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    self, ConfigDoc, ConfigError, DEFAULT_REPLICATES, DEFAULT_SEED, DEFAULT_SLACK,
};
use crate::model_spec::ModelSpec;
use crate::output::{self, csv_record, emit, header, table, Format, Setting};
use crate::{
    BoundArgs, CertOpts, CertifyArgs, OutputOpts, RunOpts, SampleSizeArgs, SimulateArgs, SweepArgs,
    EXIT_SIMULATION_FAIL,
};

type Record = Vec<(&'static str, Value)>;

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Renders a single-row result in the requested format.
fn render_record(
    command: &str,
    settings: &[Setting],
    record: &Record,
    format: Format,
) -> Result<String> {
    let names: Vec<&str> = record.iter().map(|(k, _)| *k).collect();
    let cells: Vec<String> = record.iter().map(|(_, v)| cell(v)).collect();
    Ok(match format {
        Format::Text => header(command, settings) + &table(&names, &[cells]),
        Format::Csv => csv_record(&names, &cells)?,
        Format::Json => {
            let map: serde_json::Map<String, Value> = record
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect();
            output::json(&json!({ "settings": settings, "result": map }))?
        }
    })
}

/// Machine formats carry no comment lines; their header goes to stderr.
fn write_output(command: &str, settings: &[Setting], body: &str, out: &OutputOpts) -> Result<()> {
    if out.format != Format::Text {
        eprint!("{}", header(command, settings));
    }
    emit(out.out.as_deref(), body)
}

struct Resolved {
    mcert: MomentCertificate,
    settings: Vec<Setting>,
}

fn slack_setting(opts: &CertOpts) -> (f64, Setting) {
    let slack = opts.slack.unwrap_or(DEFAULT_SLACK);
    (slack, Setting::new("slack", slack, opts.slack.is_some()))
}

fn certify_spec(spec: &ModelSpec, opts: &CertOpts) -> Result<Resolved> {
    let (slack, slack_st) = slack_setting(opts);
    let mcert = certify_model(spec.model(), opts.r, slack)?;
    let r_st = match opts.r {
        Some(r) => Setting::given("r", r),
        None => Setting::rule("r", mcert.r),
    };
    Ok(Resolved {
        mcert,
        settings: vec![Setting::given("model", spec), r_st, slack_st],
    })
}

fn load_certificate(path: &Path) -> Result<Resolved> {
    let body = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read certificate {}", path.display()))?;
    let mcert = MomentCertificate::from_json(&body)?;
    Ok(Resolved {
        mcert,
        settings: vec![
            Setting::given("cert", path.display()),
            Setting::given("r", mcert.r),
            Setting::given("C_r", mcert.c_r),
            Setting::given("slack", mcert.slack),
        ],
    })
}

fn resolve(
    model: Option<&ModelSpec>,
    cert_file: Option<&Path>,
    opts: &CertOpts,
) -> Result<Resolved> {
    match (model, cert_file) {
        (_, Some(path)) => load_certificate(path),
        (Some(spec), None) => certify_spec(spec, opts),
        (None, None) => unreachable!("clap requires a model or a certificate"),
    }
}

pub fn certify(a: CertifyArgs) -> Result<u8> {
    let admissible = admissible_r_interval(a.model.model())?;
    let Resolved {
        mcert,
        mut settings,
    } = certify_spec(&a.model, &a.cert)?;
    settings.push(Setting::given("admissible r", admissible));
    let body = match a.output.format {
        // exactly the document `--cert` reads back
        Format::Json => output::json(&mcert)?,
        Format::Csv => csv_record(
            &[
                "model",
                "r",
                "C_r",
                "slack",
                "truncation_index",
                "provenance",
                "r_max",
            ],
            &[
                a.model.to_string(),
                mcert.r.to_string(),
                mcert.c_r.to_string(),
                mcert.slack.to_string(),
                mcert.truncation_index.to_string(),
                mcert.provenance.to_string(),
                admissible.r_max.to_string(),
            ],
        )?,
        Format::Text => {
            let rows = [
                ("r", mcert.r.to_string()),
                ("C_r", mcert.c_r.to_string()),
                ("slack", mcert.slack.to_string()),
                ("truncation_index", mcert.truncation_index.to_string()),
                ("provenance", mcert.provenance.to_string()),
                ("admissible r", admissible.to_string()),
            ];
            let rows: Vec<Vec<String>> = rows
                .iter()
                .map(|(k, v)| vec![k.to_string(), v.clone()])
                .collect();
            header("certify", &settings) + &table(&["field", "value"], &rows)
        }
    };
    write_output("certify", &settings, &body, &a.output)?;
    Ok(0)
}

pub fn bound(a: BoundArgs) -> Result<u8> {
    let Resolved {
        mcert,
        mut settings,
    } = resolve(a.model.as_ref(), a.cert_file.as_deref(), &a.cert)?;
    let c = BernsteinConstants::new(&mcert);
    settings.push(Setting::given("n", a.n));
    let mut record: Record = vec![
        ("r", json!(mcert.r)),
        ("C_r", json!(mcert.c_r)),
        ("n", json!(a.n)),
    ];
    match (a.eps, a.delta) {
        (Some(eps), _) => {
            settings.push(Setting::given("eps", eps));
            let b = deviation_bound(&c, a.n, eps);
            record.extend([
                ("eps", json!(eps)),
                ("c1", json!(c.c1)),
                ("c2", json!(c.c2)),
                ("bound", json!(b)),
                ("vacuous", json!(is_vacuous(b))),
            ]);
        }
        (None, Some(delta)) => {
            settings.push(Setting::given("delta", delta));
            let eps = epsilon_for(&c, a.n, delta)?;
            record.extend([
                ("delta", json!(delta)),
                ("c1", json!(c.c1)),
                ("c2", json!(c.c2)),
                ("eps", json!(eps)),
            ]);
        }
        (None, None) => unreachable!("clap requires eps or delta"),
    }
    let body = render_record("bound", &settings, &record, a.output.format)?;
    write_output("bound", &settings, &body, &a.output)?;
    Ok(0)
}

pub fn samplesize(a: SampleSizeArgs) -> Result<u8> {
    let Resolved {
        mcert,
        mut settings,
    } = resolve(a.model.as_ref(), a.cert_file.as_deref(), &a.cert)?;
    let c = BernsteinConstants::new(&mcert);
    settings.push(Setting::given("eps", a.eps));
    settings.push(Setting::given("delta", a.delta));
    let n = min_sample_size(&c, a.eps, a.delta)?;
    let record: Record = vec![
        ("r", json!(mcert.r)),
        ("C_r", json!(mcert.c_r)),
        ("eps", json!(a.eps)),
        ("delta", json!(a.delta)),
        ("n", json!(n)),
        ("bound_at_n", json!(deviation_bound(&c, n, a.eps))),
    ];
    let body = render_record("samplesize", &settings, &record, a.output.format)?;
    write_output("samplesize", &settings, &body, &a.output)?;
    Ok(0)
}

/// One simulation's inputs before defaults are filled in.
struct RunSpec {
    spec: ModelSpec,
    n: u64,
    eps: Vec<f64>,
    replicates: Option<u64>,
    seed: Option<u64>,
    entropy_tol: Option<f64>,
    r: Option<f64>,
    slack: Option<f64>,
    centering: Option<Centering>,
}

impl RunSpec {
    fn from_doc(doc: ConfigDoc) -> Result<Self> {
        Ok(RunSpec {
            spec: doc.spec()?,
            n: doc.n,
            eps: doc.eps.into_vec(),
            replicates: doc.replicates,
            seed: doc.seed,
            entropy_tol: doc.entropy_tolerance,
            r: doc.r,
            slack: doc.slack,
            centering: doc.centering,
        })
    }

    /// The core configuration, and the settings it was built from with
    /// defaults marked. `fallback_seed` stands in for a missing seed.
    fn build(
        self,
        fallback_seed: Setting,
        seed_value: u64,
    ) -> Result<(SimulationConfig, Vec<Setting>)> {
        if self.eps.is_empty() {
            bail!(ConfigError("at least one eps threshold is required".into()));
        }
        let replicates = self.replicates.unwrap_or(DEFAULT_REPLICATES);
        let slack = self.slack.unwrap_or(DEFAULT_SLACK);
        let seed = self.seed.unwrap_or(seed_value);
        let model: PmfModel = self.spec.model().clone();
        let mut cfg =
            SimulationConfig::new(model, self.n, self.eps.clone(), replicates, seed, slack);
        cfg.r = self.r;
        if let Some(t) = self.entropy_tol {
            cfg.entropy_tolerance = t;
        }
        cfg.centering = self.centering.unwrap_or_default();

        let eps_text = self
            .eps
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(",");
        let settings = vec![
            Setting::given("model", &self.spec),
            Setting::given("n", self.n),
            Setting::given("eps", eps_text),
            Setting::new("replicates", replicates, self.replicates.is_some()),
            match self.seed {
                Some(s) => Setting::given("seed", s),
                None => fallback_seed,
            },
            match self.r {
                Some(r) => Setting::given("r", r),
                None => Setting::rule("r", "see certificate"),
            },
            Setting::new("slack", slack, self.slack.is_some()),
            match self.entropy_tol {
                Some(t) => Setting::given("entropy_tolerance", t),
                None => Setting::rule("entropy_tolerance", cfg.entropy_tolerance),
            },
            Setting::new(
                "centering",
                centering_name(cfg.centering),
                self.centering.is_some(),
            ),
        ];
        Ok((cfg, settings))
    }
}

fn centering_name(c: Centering) -> &'static str {
    match c {
        Centering::Midpoint => "midpoint",
        Centering::Lower => "lower",
        Centering::Upper => "upper",
    }
}

fn execution(run: &RunOpts) -> (Execution, Setting) {
    if run.serial {
        (Execution::Serial, Setting::given("execution", "serial"))
    } else {
        (
            Execution::Parallel,
            Setting::new("execution", "parallel", false),
        )
    }
}

#[derive(Serialize)]
struct SimulationDoc<'a> {
    settings: &'a [Setting],
    reports: &'a [SimulationReport],
}

fn certificate_lines(rep: &SimulationReport) -> String {
    let c = &rep.certificate;
    format!(
        "# [{} n={} seed={}] certificate r = {}, C_r = {}, slack = {}, truncation_index = {}, provenance = {}\n\
         # [{} n={} seed={}] c1 = {}, c2 = {}, entropy in [{}, {}]\n",
        rep.model, rep.n, rep.seed, c.r, c.c_r, c.slack, c.truncation_index, c.provenance,
        rep.model, rep.n, rep.seed, rep.c1, rep.c2, rep.entropy.lower, rep.entropy.upper,
    )
}

fn render_reports(
    command: &str,
    settings: &[Setting],
    reports: &[SimulationReport],
    format: Format,
) -> Result<String> {
    Ok(match format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_csv(reports, &mut buf)?;
            String::from_utf8(buf)?
        }
        Format::Json => output::json(&SimulationDoc { settings, reports })?,
        Format::Text => {
            let mut s = header(command, settings);
            for rep in reports {
                s.push_str(&certificate_lines(rep));
            }
            let rows: Vec<Vec<String>> = reports
                .iter()
                .flat_map(|rep| {
                    rep.records.iter().map(move |rec| {
                        vec![
                            rep.model.clone(),
                            rep.n.to_string(),
                            rec.eps.to_string(),
                            rec.hit_count.to_string(),
                            rec.frequency.to_string(),
                            rec.stderr.to_string(),
                            rec.bound_value.to_string(),
                            rec.verdict.to_string(),
                        ]
                    })
                })
                .collect();
            s + &table(
                &[
                    "model",
                    "n",
                    "eps",
                    "hits",
                    "frequency",
                    "stderr",
                    "bound",
                    "verdict",
                ],
                &rows,
            )
        }
    })
}

fn finish(
    command: &str,
    settings: &[Setting],
    reports: &[SimulationReport],
    out: &OutputOpts,
) -> Result<u8> {
    for rep in reports {
        verify_bound(rep)?;
    }
    let body = render_reports(command, settings, reports, out.format)?;
    write_output(command, settings, &body, out)?;
    Ok(if aggregate_verdict(reports) == Verdict::Fail {
        EXIT_SIMULATION_FAIL
    } else {
        0
    })
}

pub fn simulate(a: SimulateArgs) -> Result<u8> {
    let run_spec = match &a.config {
        Some(path) => {
            let mut docs = config::load(path)?;
            if docs.len() != 1 {
                bail!(ConfigError(format!(
                    "simulate takes one configuration, {} holds {}; use sweep",
                    path.display(),
                    docs.len()
                )));
            }
            let mut rs = RunSpec::from_doc(docs.remove(0))?;
            if a.run.seed.is_some() && rs.seed.is_none() {
                rs.seed = a.run.seed;
            }
            rs
        }
        None => RunSpec {
            spec: a
                .model
                .clone()
                .expect("clap requires a model without --config"),
            n: a.n.expect("clap requires n without --config"),
            eps: a.eps.clone(),
            replicates: a.run.replicates,
            seed: a.run.seed,
            entropy_tol: a.entropy_tol,
            r: a.cert.r,
            slack: a.cert.slack,
            centering: a.centering.map(Into::into),
        },
    };
    let spec_text = run_spec.spec.to_string();
    let (cfg, mut settings) =
        run_spec.build(Setting::new("seed", DEFAULT_SEED, false), DEFAULT_SEED)?;
    let (exec, exec_st) = execution(&a.run);
    settings.push(exec_st);
    let mut rep = estimate_deviation_probability_with(&cfg, exec)?;
    rep.model = spec_text;
    finish("simulate", &settings, &[rep], &a.output)
}

pub fn sweep(a: SweepArgs) -> Result<u8> {
    let base = a.run.seed.unwrap_or(DEFAULT_SEED);
    let mut settings = vec![Setting::new("base seed", base, a.run.seed.is_some())];
    let specs: Vec<RunSpec> = match &a.config {
        Some(path) => config::load(path)?
            .into_iter()
            .map(RunSpec::from_doc)
            .collect::<Result<_>>()?,
        None => {
            let mut out = Vec::new();
            for spec in &a.models {
                for &n in &a.n {
                    out.push(RunSpec {
                        spec: spec.clone(),
                        n,
                        eps: a.eps.clone(),
                        replicates: a.run.replicates,
                        seed: None,
                        entropy_tol: None,
                        r: a.cert.r,
                        slack: a.cert.slack,
                        centering: None,
                    });
                }
            }
            out
        }
    };
    let mut cfgs = Vec::with_capacity(specs.len());
    let mut labels = Vec::with_capacity(specs.len());
    for (i, rs) in specs.into_iter().enumerate() {
        let seed = derive_seed(base, i as u64);
        labels.push(rs.spec.to_string());
        let (cfg, run_settings) = rs.build(Setting::rule("seed", seed), seed)?;
        if i == 0 {
            // shared defaults; per-run values appear in the report rows
            settings.extend(
                run_settings
                    .into_iter()
                    .filter(|s| matches!(s.name, "replicates" | "slack" | "r" | "centering")),
            );
        }
        cfgs.push(cfg);
    }
    settings.push(Setting::given("configs", cfgs.len()));
    let (exec, exec_st) = execution(&a.run);
    settings.push(exec_st);

    let relabel = |reports: &mut [SimulationReport]| {
        for (rep, label) in reports.iter_mut().zip(&labels) {
            rep.model = label.clone();
        }
    };
    match sweep_with(&cfgs, exec) {
        Ok(mut reports) => {
            relabel(&mut reports);
            finish("sweep", &settings, &reports, &a.output)
        }
        Err(SweepError {
            mut completed,
            index,
            source,
        }) => {
            relabel(&mut completed);
            if !completed.is_empty() {
                let body = render_reports("sweep", &settings, &completed, a.output.format)?;
                write_output("sweep", &settings, &body, &a.output)?;
            }
            Err(SweepError {
                completed,
                index,
                source,
            }
            .into())
        }
    }
}
