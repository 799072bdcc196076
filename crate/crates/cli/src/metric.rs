//! Turning a [`RunConfig`] into metric fields and quadrature grids.

use std::collections::BTreeMap;
use std::sync::Arc;

use qtower::integrals::{GridKind, GridSpec, TestPair};
use qtower::jets::{FdField, MetricField};
use qtower::metrics::{Family, Model, Pole, SphereChart};

use crate::config::{parse_list, BackendArg, ReportKind, RunConfig};
use crate::error::{CliError, Result};

const BUMP_KEYS: [&str; 3] = ["eps", "bump-width", "bump-center"];

/// The metric of one run (one ε of a sweep).
pub struct Target {
    model: Option<Model>,
    /// Primary chart, already on the requested backend.
    pub field: Arc<dyn MetricField>,
    fd: bool,
    fd_step: Option<f64>,
}

/// The ε values of a run: `eps=a,b,c` is a sweep, no `eps` a single
/// undeformed run.
pub fn eps_values(cfg: &RunConfig) -> Result<Vec<Option<f64>>> {
    match cfg.param.get("eps") {
        None => Ok(vec![None]),
        Some(s) => Ok(parse_list(s, "param eps")?.into_iter().map(Some).collect()),
    }
}

struct Params<'a> {
    family: &'a str,
    map: &'a BTreeMap<String, String>,
}

impl Params<'_> {
    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for k in self.map.keys() {
            if !allowed.contains(&k.as_str()) && !BUMP_KEYS.contains(&k.as_str()) {
                let mut all: Vec<&str> = allowed.to_vec();
                all.extend(BUMP_KEYS);
                return Err(CliError::Usage(format!(
                    "unknown parameter '{k}' for metric {} (expected {})",
                    self.family,
                    all.join(", ")
                )));
            }
        }
        Ok(())
    }

    fn f64_or(&self, k: &str, default: Option<f64>) -> Result<f64> {
        match self.map.get(k) {
            Some(s) => s
                .parse()
                .map_err(|_| CliError::Usage(format!("parameter {k}: '{s}' is not a number"))),
            None => default.ok_or_else(|| CliError::Usage(format!("metric {} needs parameter {k}", self.family))),
        }
    }

    fn dim(&self) -> Result<usize> {
        let s = self
            .map
            .get("n")
            .ok_or_else(|| CliError::Usage(format!("metric {} needs parameter n", self.family)))?;
        s.parse()
            .map_err(|_| CliError::Usage(format!("parameter n: '{s}' is not a dimension")))
    }
}

fn sphere_chart(s: Option<&String>) -> Result<SphereChart> {
    Ok(match s.map(String::as_str) {
        None | Some("stereographic") | Some("stereographic-north") => SphereChart::Stereographic(Pole::North),
        Some("stereographic-south") => SphereChart::Stereographic(Pole::South),
        Some("spherical") => SphereChart::Spherical,
        Some(other) => {
            return Err(CliError::Usage(format!(
                "unknown sphere chart '{other}' (expected stereographic, stereographic-south, spherical)"
            )))
        }
    })
}

fn model(cfg: &RunConfig, eps: Option<f64>) -> Result<Model> {
    let p = Params {
        family: &cfg.metric,
        map: &cfg.param,
    };
    let mut m = match cfg.metric.as_str() {
        "flat" => {
            p.check_keys(&["n"])?;
            Model::new(Family::Flat { n: p.dim()? })
        }
        "torus" => {
            p.check_keys(&["n"])?;
            Model::new(Family::Torus { n: p.dim()? })
        }
        "sphere" => {
            p.check_keys(&["n", "r", "chart"])?;
            Model::new(Family::Sphere {
                n: p.dim()?,
                r: p.f64_or("r", Some(1.0))?,
            })
            .with_chart(sphere_chart(cfg.param.get("chart"))?)
        }
        "hyperbolic" => {
            p.check_keys(&["n", "cap"])?;
            Model::new(Family::Hyperbolic {
                n: p.dim()?,
                cap: p.f64_or("cap", Some(0.5))?,
            })
        }
        "product-spheres" => {
            p.check_keys(&["a", "b"])?;
            Model::new(Family::ProductSpheres {
                a: p.f64_or("a", Some(1.0))?,
                b: p.f64_or("b", Some(1.0))?,
            })
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown metric '{other}' (expected flat, torus, sphere, hyperbolic, product-spheres, user)"
            )))
        }
    };
    // validates the family parameters
    m.field()?;
    let width = cfg
        .param
        .get("bump-width")
        .map(|_| p.f64_or("bump-width", None))
        .transpose()?;
    let center = cfg
        .param
        .get("bump-center")
        .map(|s| parse_list(s, "param bump-center"))
        .transpose()?;
    if let Some(e) = eps {
        let bump = m.bump(center.as_deref(), width)?;
        m = m.with_conformal(bump, e)?;
    } else if width.is_some() || center.is_some() {
        return Err(CliError::Usage("bump-width and bump-center need eps".into()));
    }
    Ok(m)
}

impl Target {
    pub fn build(cfg: &RunConfig, eps: Option<f64>) -> Result<Self> {
        let fd = cfg.backend == BackendArg::Fd;
        if let Some(user) = &cfg.user {
            if cfg.param.keys().any(|k| k != "eps") || eps.is_some() {
                return Err(CliError::Usage("user metrics take no --param values".into()));
            }
            return Ok(Target {
                model: None,
                field: user.field(cfg.chi, cfg.fd_step)?,
                fd,
                fd_step: cfg.fd_step,
            });
        }
        let m = model(cfg, eps)?;
        let analytic: Arc<dyn MetricField> = Arc::new(m.field()?);
        let field = if fd {
            Arc::new(FdField::new(analytic, cfg.fd_step))
        } else {
            analytic
        };
        Ok(Target {
            model: Some(m),
            field,
            fd,
            fd_step: cfg.fd_step,
        })
    }

    /// The quadrature grid a report runs on.
    pub fn grid(&self, kind: ReportKind, resolution: Option<usize>) -> Result<GridSpec> {
        let Some(m) = &self.model else {
            // user fields are already FD
            let k = if self.field.domain().is_periodic() {
                GridKind::Torus(self.field.clone())
            } else {
                GridKind::Patch(self.field.clone())
            };
            return Ok(GridSpec::new(k, resolution));
        };
        // test pairs are not rotationally symmetric
        let spec = if kind == ReportKind::Adjointness && matches!(m.family, Family::Sphere { .. }) {
            GridSpec::sphere_product(m, resolution)?
        } else {
            GridSpec::for_model(m, resolution)?
        };
        Ok(if self.fd { spec.with_fd(self.fd_step) } else { spec })
    }

    pub fn test_pairs(&self, count: u64) -> Vec<TestPair> {
        (0..count)
            .map(|k| match &self.model {
                Some(m) => TestPair::random(m, k),
                None => TestPair::chart(self.field.dim(), k),
            })
            .collect()
    }
}
