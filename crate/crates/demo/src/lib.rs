//! WebAssembly bindings behind `www/index.html`: the curvature bundle at a
//! point, Q along a chart axis, and an Almost-Schur ε-sweep.
//!
//! Each binding is a thin wrapper over a plain function returning JSON text,
//! so the logic is testable natively.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use qtower::curvature::CurvatureBundle;
use qtower::integrals::{almost_schur_report, GridSpec, ReportOptions};
use qtower::jets::MetricField;
use qtower::metrics::{Family, Model};
use qtower::{Error, Result};

/// `sphere`, `torus` or `hyperbolic` in dimension `n`, with the family's
/// default bump at amplitude `eps` (0 for the undeformed metric).
pub fn model(metric: &str, n: usize, eps: f64) -> Result<Model> {
    let base = match metric {
        "sphere" => Model::new(Family::Sphere { n, r: 1.0 }),
        "torus" => Model::new(Family::Torus { n }),
        "hyperbolic" => Model::new(Family::Hyperbolic { n, cap: 0.5 }),
        other => return Err(Error::InvalidParameter(format!("unknown metric '{other}'"))),
    };
    if eps == 0.0 {
        base.field()?;
        return Ok(base);
    }
    let bump = base.bump(None, None)?;
    base.with_conformal(bump, eps)
}

fn summary(b: &CurvatureBundle) -> Value {
    json!({
        "q": b.q,
        "scalar": b.scalar,
        "weyl_norm_sq": b.weyl_norm_sq(),
        "j_traceless_norm_sq": b.j_traceless_norm_sq(),
        "sigma1_j": b.sigma1_j,
        "sigma2_j": b.sigma2_j,
        "min_ricci_eigenvalue": b.min_ricci_eigenvalue(),
        "trace_j_minus_q": b.checks.trace_j_minus_q,
        "q_routes": b.checks.q_routes,
        "j_vs_adjoint": b.checks.j_vs_adjoint,
    })
}

/// Scalars of the bundle at `point`; the sample-domain centre when empty.
pub fn point_bundle_json(metric: &str, n: usize, eps: f64, point: &[f64]) -> Result<String> {
    let f = model(metric, n, eps)?.field()?;
    let p = if point.is_empty() {
        f.sample_domain().sample(&vec![0.5; n])
    } else {
        point.to_vec()
    };
    if !f.domain().contains(&p) {
        return Err(Error::OutsideDomain {
            metric: f.name(),
            point: p,
        });
    }
    let b = CurvatureBundle::from_jet(&f.jet(&p, 4)?)?;
    Ok(json!({ "metric": f.name(), "point": p, "bundle": summary(&b) }).to_string())
}

/// Q and |J̊|² at `samples` points along the first chart axis, the other
/// coordinates held at the centre of the sample domain.
pub fn q_profile_json(metric: &str, n: usize, eps: f64, samples: usize) -> Result<String> {
    let f = model(metric, n, eps)?.field()?;
    let dom = f.sample_domain();
    let mut rows = Vec::with_capacity(samples);
    for k in 0..samples.max(2) {
        let mut u = vec![0.5; n];
        u[0] = k as f64 / (samples.max(2) - 1) as f64;
        let p = dom.sample(&u);
        let b = CurvatureBundle::from_jet(&f.jet(&p, 4)?)?;
        rows.push(json!({ "x": p[0], "q": b.q, "j_traceless_norm_sq": b.j_traceless_norm_sq() }));
    }
    Ok(json!({ "metric": f.name(), "rows": rows }).to_string())
}

/// The Almost-Schur ratio on zonal sphere bumps for each ε.
pub fn almost_schur_json(n: usize, eps: &[f64]) -> Result<String> {
    let mut rows = Vec::with_capacity(eps.len());
    for &e in eps {
        let spec = GridSpec::for_model(&model("sphere", n, e)?, None)?;
        let r = almost_schur_report(&spec, &ReportOptions::default())?;
        rows.push(json!({
            "eps": e,
            "status": r.status,
            "ratio": r.get("ratio"),
            "lhs": r.get("lhs"),
            "rhs": r.get("rhs"),
            "min_ricci_eigenvalue": r.get("min_ricci_eigenvalue"),
            "notes": r.notes,
        }));
    }
    Ok(json!({ "n": n, "rows": rows }).to_string())
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn point_bundle(metric: &str, n: usize, eps: f64, point: Vec<f64>) -> std::result::Result<String, JsError> {
    js(point_bundle_json(metric, n, eps, &point))
}

#[wasm_bindgen]
pub fn q_profile(metric: &str, n: usize, eps: f64, samples: usize) -> std::result::Result<String, JsError> {
    js(q_profile_json(metric, n, eps, samples))
}

#[wasm_bindgen]
pub fn almost_schur_sweep(n: usize, eps: Vec<f64>) -> std::result::Result<String, JsError> {
    js(almost_schur_json(n, &eps))
}
