//! Flags, the config file, and their merge into one validated [`RunConfig`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::expr::UserMetric;

#[derive(Parser, Debug)]
#[command(
    name = "qtower",
    version,
    about = "Q-curvature, the J-tensor and their identities on coordinate charts"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the full curvature bundle at one point
    Eval(Args),
    /// Run the pointwise identity suite; exit 0 iff every identity passes
    Verify(Args),
    /// Run global reports (gauss-bonnet, almost-schur, q-yamabe, adjointness, divergence, schur)
    Report {
        /// Reports to run (same as repeated --report)
        #[arg(value_name = "NAME")]
        which: Vec<String>,
        #[command(flatten)]
        args: Args,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Eval(_) => "eval",
            Command::Verify(_) => "verify",
            Command::Report { .. } => "report",
        }
    }
}

#[derive(clap::Args, Debug, Default)]
pub struct Args {
    /// Config file (TOML, keys mirror the flags); flags override it
    #[arg(long, short = 'c', value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// flat, torus, sphere, hyperbolic, product-spheres, or user
    #[arg(long)]
    pub metric: Option<String>,
    /// Metric parameter, e.g. n=4, r=2, eps=0.05 (repeatable)
    #[arg(long = "param", value_name = "K=V")]
    pub params: Vec<String>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    /// Finite-difference step (default: chosen per derivative order)
    #[arg(long, value_name = "H")]
    pub fd_step: Option<f64>,
    /// Quadrature nodes per axis
    #[arg(long, value_name = "N")]
    pub grid: Option<usize>,
    /// Report to run (repeatable)
    #[arg(long = "report", value_name = "NAME")]
    pub reports: Vec<String>,
    /// Evaluation point "x1,...,xn"
    #[arg(long, value_name = "X", allow_hyphen_values = true)]
    pub point: Option<String>,
    /// Euler characteristic for gauss-bonnet
    #[arg(long, value_name = "N", allow_hyphen_values = true)]
    pub chi: Option<i64>,
    /// Exit 1 when an eval cross-check exceeds its tolerance
    #[arg(long)]
    pub strict: bool,
    /// Tolerance override (repeatable)
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    pub tols: Vec<String>,
    /// Write the document here instead of stdout
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Emit a flat CSV table (one row per ε and report) instead of JSON
    #[arg(long)]
    pub csv: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendArg {
    Analytic,
    Fd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportKind {
    GaussBonnet,
    AlmostSchur,
    QYamabe,
    Adjointness,
    Divergence,
    Schur,
}

impl ReportKind {
    pub const ALL: [ReportKind; 6] = [
        ReportKind::GaussBonnet,
        ReportKind::AlmostSchur,
        ReportKind::QYamabe,
        ReportKind::Adjointness,
        ReportKind::Divergence,
        ReportKind::Schur,
    ];

    fn parse(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.to_string() == s).ok_or_else(|| {
            let names: Vec<String> = Self::ALL.iter().map(|k| k.to_string()).collect();
            CliError::Usage(format!("unknown report '{s}' (expected one of {})", names.join(", ")))
        })
    }
}

impl fmt::Display for ReportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportKind::GaussBonnet => "gauss-bonnet",
            ReportKind::AlmostSchur => "almost-schur",
            ReportKind::QYamabe => "q-yamabe",
            ReportKind::Adjointness => "adjointness",
            ReportKind::Divergence => "divergence",
            ReportKind::Schur => "schur",
        })
    }
}

/// The config file. Keys mirror the long flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    metric: Option<String>,
    #[serde(default)]
    param: BTreeMap<String, toml::Value>,
    backend: Option<BackendArg>,
    fd_step: Option<f64>,
    grid: Option<usize>,
    #[serde(default)]
    report: Vec<String>,
    point: Option<Vec<f64>>,
    chi: Option<i64>,
    strict: Option<bool>,
    #[serde(default)]
    tol: BTreeMap<String, f64>,
    out: Option<PathBuf>,
    csv: Option<bool>,
    user: Option<UserMetric>,
}

/// Everything a run needs, validated before any computation. Echoed into
/// the output document.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct RunConfig {
    pub metric: String,
    pub param: BTreeMap<String, String>,
    pub backend: BackendArg,
    pub fd_step: Option<f64>,
    pub grid: Option<usize>,
    pub report: Vec<ReportKind>,
    pub point: Option<Vec<f64>>,
    pub chi: Option<i64>,
    pub strict: bool,
    pub tol: BTreeMap<String, f64>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub csv: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub user: Option<UserMetric>,
}

fn split_kv(s: &str, what: &str) -> Result<(String, String)> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() && !v.trim().is_empty() => {
            Ok((k.trim().to_string(), v.trim().to_string()))
        }
        _ => Err(CliError::Usage(format!("{what} expects NAME=VALUE, got '{s}'"))),
    }
}

/// Parse a comma-separated list of numbers.
pub fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Usage(format!("{what}: '{}' is not a finite number", t.trim())))
        })
        .collect()
}

fn toml_to_string(v: &toml::Value, key: &str) -> Result<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Array(a) => a
            .iter()
            .map(|x| toml_to_string(x, key))
            .collect::<Result<Vec<_>>>()?
            .join(","),
        _ => {
            return Err(CliError::Config(format!(
                "param.{key} must be a number, string or array"
            )))
        }
    })
}

fn read_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
}

impl RunConfig {
    /// Merge the config file (if any) with the flags; flags win.
    pub fn resolve(args: &Args, positional_reports: &[String]) -> Result<Self> {
        let file = match &args.config {
            Some(p) => read_file(p)?,
            None => FileConfig::default(),
        };
        let mut param = BTreeMap::new();
        for (k, v) in &file.param {
            param.insert(k.clone(), toml_to_string(v, k)?);
        }
        for s in &args.params {
            let (k, v) = split_kv(s, "--param")?;
            param.insert(k, v);
        }
        let mut tol = file.tol.clone();
        for s in &args.tols {
            let (k, v) = split_kv(s, "--tol")?;
            let t = v
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("--tol {k}: '{v}' is not a number")))?;
            tol.insert(k, t);
        }
        if let Some((k, v)) = tol.iter().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(CliError::Usage(format!("tolerance {k} must be positive, got {v}")));
        }

        let names: Vec<&String> = if positional_reports.is_empty() && args.reports.is_empty() {
            file.report.iter().collect()
        } else {
            positional_reports.iter().chain(&args.reports).collect()
        };
        let mut report = Vec::new();
        for n in names {
            let k = ReportKind::parse(n)?;
            if !report.contains(&k) {
                report.push(k);
            }
        }

        let point = match &args.point {
            Some(s) => Some(parse_list(s, "--point")?),
            None => file.point.clone(),
        };
        let fd_step = args.fd_step.or(file.fd_step);
        if let Some(h) = fd_step {
            if !(h.is_finite() && h > 0.0) {
                return Err(CliError::Usage(format!("--fd-step must be positive, got {h}")));
            }
        }
        let grid = args.grid.or(file.grid);
        if grid.is_some_and(|g| g < 2) {
            return Err(CliError::Usage("--grid needs at least 2 nodes per axis".into()));
        }

        let user = file.user.clone();
        let metric = match (args.metric.clone().or(file.metric.clone()), &user) {
            (Some(m), _) => m,
            (None, Some(_)) => "user".to_string(),
            (None, None) => {
                return Err(CliError::Usage(
                    "no metric given (--metric NAME or 'metric' in the config)".into(),
                ))
            }
        };
        if metric == "user" && user.is_none() {
            return Err(CliError::Config(
                "metric 'user' needs a [user] table in the config file".into(),
            ));
        }
        if metric != "user" && user.is_some() {
            return Err(CliError::Config(format!(
                "a [user] table was given but the metric is '{metric}'"
            )));
        }
        let backend = args.backend.or(file.backend).unwrap_or(if user.is_some() {
            BackendArg::Fd
        } else {
            BackendArg::Analytic
        });
        if user.is_some() && backend == BackendArg::Analytic {
            return Err(CliError::Usage(
                "user metrics have no analytic jets; use --backend fd".into(),
            ));
        }

        Ok(RunConfig {
            metric,
            param,
            backend,
            fd_step,
            grid,
            report,
            point,
            chi: args.chi.or(file.chi),
            strict: args.strict || file.strict.unwrap_or(false),
            tol,
            out: args.out.clone().or(file.out),
            csv: args.csv || file.csv.unwrap_or(false),
            user,
        })
    }
}
