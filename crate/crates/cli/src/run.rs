use std::collections::BTreeSet;
use std::io::Write;
use std::time::SystemTime;

use serde::Serialize;
use serde_json::{json, Value};

use qtower::integrals::{
    adjointness_report, almost_schur_report, divergence_identity_report, gauss_bonnet_report, q_yamabe_report,
    schur_constancy_report, Report, ReportOptions,
};
use qtower::jets::Backend;
use qtower::verify::{identity_suite, point_report, sample_points, SuiteOptions};

use crate::config::{Command, ReportKind, RunConfig};
use crate::error::{CliError, Result};
use crate::metric::{eps_values, Target};

#[derive(Serialize)]
struct Document<'a> {
    tool: &'static str,
    version: &'static str,
    generated_at: String,
    command: &'static str,
    config: &'a RunConfig,
    pass: bool,
    #[serde(flatten)]
    body: Value,
}

/// One ε of a report run.
struct Run {
    eps: Option<f64>,
    reports: Vec<Report>,
}

/// Run a parsed command line. `Ok(false)` means a check failed.
pub fn run(cli: &Command) -> Result<bool> {
    let (args, positional) = match cli {
        Command::Eval(a) | Command::Verify(a) => (a, &[][..]),
        Command::Report { which, args } => (args, &which[..]),
    };
    let cfg = RunConfig::resolve(args, positional)?;
    let sweep = eps_values(&cfg)?;
    let is_report = matches!(cli, Command::Report { .. });
    if !is_report {
        if sweep.len() > 1 {
            return Err(CliError::Usage(
                "ε-sweeps (eps=a,b,...) apply to the report command".into(),
            ));
        }
        // a shared config file may carry report settings; only the flags are errors here
        if args.csv {
            return Err(CliError::Usage("--csv applies to the report command".into()));
        }
        if !args.reports.is_empty() {
            return Err(CliError::Usage("--report applies to the report command".into()));
        }
    } else if cfg.report.is_empty() {
        let names: Vec<String> = ReportKind::ALL.iter().map(|k| k.to_string()).collect();
        return Err(CliError::Usage(format!(
            "no report selected (one of {})",
            names.join(", ")
        )));
    }

    let (pass, body, runs) = match cli {
        Command::Eval(_) => {
            let (pass, body) = eval(&cfg, sweep[0])?;
            (pass, body, Vec::new())
        }
        Command::Verify(_) => {
            let t = Target::build(&cfg, sweep[0])?;
            let opts = SuiteOptions {
                fd_step: cfg.fd_step,
                tolerances: cfg.tol.clone(),
                ..SuiteOptions::default()
            };
            let reports = identity_suite(t.field.as_ref(), &opts)?;
            let pass = reports.iter().all(|r| r.pass);
            (
                pass,
                json!({ "metric": t.field.name(), "reports": reports }),
                Vec::new(),
            )
        }
        Command::Report { .. } => {
            let mut runs = Vec::new();
            for eps in &sweep {
                let t = Target::build(&cfg, *eps)?;
                let reports = cfg
                    .report
                    .iter()
                    .map(|k| report(&cfg, &t, *k))
                    .collect::<Result<Vec<_>>>()?;
                runs.push(Run { eps: *eps, reports });
            }
            let pass = runs.iter().flat_map(|r| &r.reports).all(|r| r.pass);
            let body = json!({
                "runs": runs.iter().map(|r| json!({ "eps": r.eps, "reports": r.reports })).collect::<Vec<_>>()
            });
            (pass, body, runs)
        }
    };

    let text = if is_report && cfg.csv {
        csv_table(&runs)?
    } else {
        let doc = Document {
            tool: "qtower",
            version: env!("CARGO_PKG_VERSION"),
            generated_at: humantime::format_rfc3339_seconds(SystemTime::now()).to_string(),
            command: cli.name(),
            config: &cfg,
            pass,
            body,
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("documents are plain JSON");
        s.push('\n');
        s
    };
    match &cfg.out {
        Some(path) => {
            std::fs::write(path, text).map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
            eprintln!(
                "{}: {} → {}",
                cli.name(),
                if pass { "pass" } else { "FAIL" },
                path.display()
            );
        }
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io {
                path: "stdout".into(),
                source,
            })?,
    }
    Ok(pass)
}

fn eval(cfg: &RunConfig, eps: Option<f64>) -> Result<(bool, Value)> {
    let t = Target::build(cfg, eps)?;
    let f = t.field.as_ref();
    let point = match &cfg.point {
        Some(p) if p.len() != f.dim() => {
            return Err(CliError::Usage(format!(
                "--point has {} coordinates, the metric has {}",
                p.len(),
                f.dim()
            )))
        }
        Some(p) => p.clone(),
        None => f.sample_domain().sample(&vec![0.5; f.dim()]),
    };
    let opts = SuiteOptions {
        tolerances: cfg.tol.clone(),
        ..SuiteOptions::default()
    };
    let (bundle, rep) = point_report(f, &point, &opts)?;
    let ok = rep.pass || !cfg.strict;
    Ok((
        ok,
        json!({ "metric": f.name(), "point": point, "bundle": bundle.to_json(), "report": rep }),
    ))
}

fn report(cfg: &RunConfig, t: &Target, kind: ReportKind) -> Result<Report> {
    let opts = ReportOptions {
        tolerances: cfg.tol.clone(),
        chi: cfg
            .chi
            .or(t.field.euler_characteristic().filter(|_| cfg.user.is_some())),
        skip_coarse: false,
    };
    let grid = || t.grid(kind, cfg.grid);
    Ok(match kind {
        ReportKind::GaussBonnet => gauss_bonnet_report(&grid()?, None, &opts)?,
        ReportKind::AlmostSchur => almost_schur_report(&grid()?, &opts)?,
        ReportKind::QYamabe => q_yamabe_report(&grid()?, &opts)?,
        ReportKind::Schur => schur_constancy_report(&grid()?, &opts)?,
        ReportKind::Adjointness => adjointness_report(&grid()?, &t.test_pairs(3), &opts)?,
        ReportKind::Divergence => {
            let f = t.field.as_ref();
            let points = match &cfg.point {
                Some(p) => vec![p.clone()],
                None => sample_points(f, if f.backend() == Backend::Fd { 5 } else { 20 }, 1),
            };
            divergence_identity_report(f, &points, cfg.fd_step, &opts)?
        }
    })
}

/// Shortest round-trip form, with an exponent where that is shorter.
fn number(v: f64) -> String {
    if v.is_finite() {
        Value::from(v).to_string()
    } else {
        v.to_string()
    }
}

/// One row per (ε, report); columns are the union of scalar names.
fn csv_table(runs: &[Run]) -> Result<String> {
    let keys: BTreeSet<&String> = runs
        .iter()
        .flat_map(|r| &r.reports)
        .flat_map(|r| r.scalars.keys())
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["eps".to_string(), "report".into(), "status".into(), "pass".into()];
    header.extend(keys.iter().map(|k| k.to_string()));
    let io = |e: csv::Error| CliError::Io {
        path: "csv".into(),
        source: e.into(),
    };
    w.write_record(&header).map_err(io)?;
    for run in runs {
        for r in &run.reports {
            let mut row = vec![
                run.eps.map_or(String::new(), number),
                r.name.clone(),
                serde_json::to_value(r.status)
                    .expect("status")
                    .as_str()
                    .unwrap_or_default()
                    .to_string(),
                r.pass.to_string(),
            ];
            row.extend(
                keys.iter()
                    .map(|k| r.scalars.get(*k).map_or(String::new(), |v| number(*v))),
            );
            w.write_record(&row).map_err(io)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io {
        path: "csv".into(),
        source: e.into_error(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv of UTF-8 fields"))
}
