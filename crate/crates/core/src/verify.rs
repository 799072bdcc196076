//! The pointwise identity suite: every cross-check between independent
//! code paths of the curvature tower, at seeded random chart points.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::curvature::{self, relative_gap, CurvatureBundle, Tower};
use crate::error::Result;
use crate::fields::{ScalarField, Sym2Field};
use crate::integrals::{divergence_identity_report, Report, ReportOptions};
use crate::jets::{coordinate_jets, Backend, MetricField};
use crate::tensor;

#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub points: usize,
    pub functions: usize,
    pub seed: u64,
    pub fd_step: Option<f64>,
    pub tolerances: BTreeMap<String, f64>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            points: 20,
            functions: 5,
            seed: 1,
            fd_step: None,
            tolerances: BTreeMap::new(),
        }
    }
}

/// Seeded interior points, kept away from the chart boundary.
pub fn sample_points(field: &dyn MetricField, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dom = field.sample_domain();
    (0..count)
        .map(|_| {
            let u: Vec<f64> = (0..field.dim()).map(|_| rng.gen_range(0.1..0.9)).collect();
            dom.sample(&u)
        })
        .collect()
}

fn has_embedding(field: &dyn MetricField) -> Option<usize> {
    field
        .ambient(&coordinate_jets(&vec![0.0; field.dim()], 0))
        .map(|a| a.len())
}

/// Random smooth test functions suited to the chart.
pub fn test_functions(field: &dyn MetricField, count: usize, seed: u64) -> Vec<ScalarField> {
    (0..count as u64)
        .map(|k| match has_embedding(field) {
            Some(m) => ScalarField::ambient_poly(m, seed.wrapping_add(k)),
            None => ScalarField::chart_trig(field.dim(), seed.wrapping_add(k)),
        })
        .collect()
}

/// Random smooth symmetric directions suited to the chart.
pub fn test_directions(field: &dyn MetricField, count: usize, seed: u64) -> Vec<Sym2Field> {
    (0..count as u64)
        .map(|k| match has_embedding(field) {
            Some(m) => Sym2Field::ambient_linear(m, seed.wrapping_add(k)),
            None => Sym2Field::chart_trig(field.dim(), seed.wrapping_add(k)),
        })
        .collect()
}

/// Running maximum of one residual, with the point where it occurred.
struct Worst {
    value: f64,
    at: usize,
}

impl Worst {
    fn new() -> Self {
        Worst { value: 0.0, at: 0 }
    }
    fn add(&mut self, v: f64, at: usize) {
        if !(v <= self.value) {
            self.value = v;
            self.at = at;
        }
    }
}

fn tol(opts: &SuiteOptions, r: &mut Report, name: &str, default: f64) -> f64 {
    let v = opts.tolerances.get(name).copied().unwrap_or(default);
    r.tolerances.insert(name.to_string(), v);
    v
}

fn simple(
    name: &str,
    field: &dyn MetricField,
    opts: &SuiteOptions,
    entries: &[(&str, &Worst, f64)],
    start: Instant,
) -> Report {
    let mut r = Report::new(name);
    r.input("metric", field.name());
    r.input("backend", field.backend().to_string());
    r.input("points", opts.points);
    r.input("seed", opts.seed);
    for (k, w, default) in entries {
        let t = tol(opts, &mut r, k, *default);
        r.scalar(k, w.value);
        r.scalar(&format!("{k}.worst_point"), w.at as f64);
        r.check(&format!("{k} <= {t:e}"), w.value <= t);
    }
    r.wall_time_s = start.elapsed().as_secs_f64();
    r
}

/// The bundle at one point, with its internal cross-checks judged against
/// the suite tolerances (relaxed for FD jets, as in [`identity_suite`]).
pub fn point_report(field: &dyn MetricField, point: &[f64], opts: &SuiteOptions) -> Result<(CurvatureBundle, Report)> {
    let start = Instant::now();
    if !field.domain().contains(point) {
        return Err(crate::Error::OutsideDomain {
            metric: field.name(),
            point: point.to_vec(),
        });
    }
    let b = CurvatureBundle::from_jet(&field.jet(point, 4)?)?;
    let relax = if field.backend() == Backend::Fd { 1e3 } else { 1.0 };
    let c = &b.checks;
    let bach = c
        .bach_def_vs_expanded
        .max(c.bach_def_vs_lichnerowicz)
        .max(c.bach_expanded_vs_lichnerowicz);
    let mut r = Report::new("point");
    r.input("metric", field.name());
    r.input("backend", field.backend().to_string());
    r.input("point", point.to_vec());
    for (k, v, default) in [
        ("trace_j_minus_q", c.trace_j_minus_q, 1e-9),
        ("bach_routes", bach, 1e-8),
        ("q_routes", c.q_routes, 1e-9),
        ("j_vs_adjoint", c.j_vs_adjoint, 1e-8),
        ("weyl_cotton", c.weyl_cotton, 1e-8),
    ] {
        let t = tol(opts, &mut r, k, default * relax);
        r.scalar(k, v);
        r.check(&format!("{k} <= {t:e}"), v <= t);
    }
    r.scalar("q", b.q);
    r.wall_time_s = start.elapsed().as_secs_f64();
    Ok((b, r))
}

/// Run every pointwise identity and return one report per identity.
pub fn identity_suite(field: &dyn MetricField, opts: &SuiteOptions) -> Result<Vec<Report>> {
    let n = field.dim();
    let fd = field.backend() == Backend::Fd;
    // Jet identities are algebraic, so they hold for FD jets too; the
    // relaxation only absorbs the larger roundoff of noisy high partials.
    let relax = if fd { 1e3 } else { 1.0 };
    // Checks against known values measure the FD error itself.
    let fd_accuracy = |analytic: f64| if fd { 1e-5 } else { analytic };
    let points = sample_points(field, opts.points, opts.seed);
    let functions = test_functions(field, opts.functions, opts.seed.wrapping_mul(31));
    let directions = test_directions(field, 1, opts.seed.wrapping_mul(37));

    let start = Instant::now();
    let mut trace_j = Worst::new();
    let mut bach = Worst::new();
    let mut q_routes = Worst::new();
    let mut j_adj = Worst::new();
    let mut weyl = Worst::new();
    let mut bach_tr = Worst::new();
    let mut eq15 = Worst::new();
    let mut tr_one = Worst::new();
    let mut gamma_fd = Worst::new();
    let mut sj_trace = Worst::new();
    let mut einstein_q = Worst::new();
    let mut einstein_tensors = Worst::new();
    let mut einstein_points = 0usize;
    let mut adj_div = Worst::new();

    for (k, p) in points.iter().enumerate() {
        let jet = field.jet(p, 4)?;
        let t = Tower::new(&jet)?;
        let b = CurvatureBundle::from_tower(&t)?;
        let c = &b.checks;
        trace_j.add(c.trace_j_minus_q, k);
        bach.add(
            c.bach_def_vs_expanded
                .max(c.bach_def_vs_lichnerowicz)
                .max(c.bach_expanded_vs_lichnerowicz),
            k,
        );
        q_routes.add(c.q_routes, k);
        j_adj.add(c.j_vs_adjoint, k);
        weyl.add(c.weyl_cotton, k);
        bach_tr.add(c.bach_trace.max(c.t_trace), k);

        let gi = &b.metric.g_inv;
        let q = t.q_curvature();
        for f in &functions {
            let fj = field.scalar_jet(&f.formula, p, 4)?.f;
            let lhs = tensor::trace(gi, &t.gamma_star_q(&fj).value()?)?;
            let pf = t.paneitz(&fj, &q).value()?;
            let rhs = 0.5 * (pf - (n as f64 + 4.0) / 2.0 * b.q * fj.value()?);
            let scale = lhs.abs().max(rhs.abs()).max(c.scale4 * fj.value()?.abs());
            eq15.add(relative_gap((lhs - rhs).abs(), scale), k);
        }
        let tr1 = tensor::trace(gi, &b.j_adjoint)? * -2.0;
        tr_one.add(relative_gap((tr1 + 2.0 * b.q).abs(), b.q.abs().max(c.scale4)), k);

        for h in &directions {
            let hj = field.sym2_jet(&h.formula, p, 3)?;
            let closed = curvature::gamma_scalar(&jet, &hj)?;
            let numeric = curvature::linearize_scalar_fd(&jet, &hj, None)?;
            let scale = closed
                .abs()
                .max(numeric.abs())
                .max(b.ricci.max_abs() * hj.value()?.max_abs())
                .max(1e-300);
            gamma_fd.add((closed - numeric).abs() / scale, k);
        }

        if let (Some(s1), true) = (b.sigma1_j, n != 4) {
            sj_trace.add(
                relative_gap((s1 - b.q / (4.0 * (n as f64 - 1.0))).abs(), b.q.abs().max(c.scale4)),
                k,
            );
        }

        let (einstein, gap) = curvature::einstein_q_residual(&b, if fd { 1e-5 } else { 1e-8 });
        if einstein {
            einstein_points += 1;
            einstein_q.add(gap, k);
            let scale = c.scale4.max(f64::MIN_POSITIVE);
            let jq = b.j_tensor.minus(&b.metric.g.scaled(b.q / n as f64)).max_abs();
            let worst = [
                b.cotton.max_abs(),
                b.bach.max_abs(),
                b.t_tensor.max_abs(),
                b.j_traceless.max_abs(),
                jq,
            ]
            .into_iter()
            .fold(0.0, f64::max);
            einstein_tensors.add(relative_gap(worst, scale), k);
        }

        if !fd {
            // δΓ*f = ½ f dQ, i.e. div Γ*f = −½ f dQ, from order-5 jets.
            let jet5 = field.jet(p, 5)?;
            let t5 = Tower::new(&jet5)?;
            let f = &functions[0];
            let fj = field.scalar_jet(&f.formula, p, 5)?.f;
            let gs = t5.gamma_star_q(&fj);
            let div = t5.conn.divergence_sym2(&gs).value()?;
            // coordinate size of the terms, the roundoff reference when dQ = 0
            let mut term = gs.value()?.max_abs() * t5.conn.christoffel.value()?.max_abs();
            for i in 0..n {
                term = term.max(gs.try_map(|c| c.d(i).value())?.max_abs());
            }
            let q5 = t5.q_curvature();
            let f0 = fj.value()?;
            let mut gap: f64 = 0.0;
            let mut mag: f64 = 0.0;
            for i in 0..n {
                let expect = -0.5 * f0 * q5.d(i).value()?;
                gap = gap.max((div.data()[i] - expect).abs());
                mag = mag.max(expect.abs()).max(div.data()[i].abs());
            }
            adj_div.add(relative_gap(gap, mag + 1e-4 * term), k);
        }
    }

    let mut reports = vec![
        simple(
            "trace-j-equals-q",
            field,
            opts,
            &[("trace_j_minus_q", &trace_j, 1e-9 * relax)],
            start,
        ),
        simple(
            "bach-routes",
            field,
            opts,
            &[
                ("bach_routes", &bach, 1e-8 * relax),
                ("bach_t_traces", &bach_tr, 1e-8 * relax),
            ],
            start,
        ),
        simple("q-routes", field, opts, &[("q_routes", &q_routes, 1e-9 * relax)], start),
        simple(
            "j-equals-adjoint",
            field,
            opts,
            &[("j_vs_adjoint", &j_adj, 1e-8 * relax)],
            start,
        ),
        simple(
            "weyl-divergence-cotton",
            field,
            opts,
            &[("weyl_cotton", &weyl, 1e-8 * relax)],
            start,
        ),
        simple(
            "trace-adjoint-paneitz",
            field,
            opts,
            &[
                ("trace_adjoint_vs_paneitz", &eq15, 1e-8 * relax),
                ("trace_adjoint_of_one", &tr_one, 1e-9 * relax),
            ],
            start,
        ),
        simple(
            "scalar-linearization",
            field,
            opts,
            &[("gamma_closed_vs_fd", &gamma_fd, 1e-6)],
            start,
        ),
    ];
    if !fd {
        reports.push(simple(
            "adjoint-divergence",
            field,
            opts,
            &[("div_adjoint_vs_half_f_dq", &adj_div, 1e-6)],
            start,
        ));
    }
    if n != 4 {
        reports.push(simple(
            "j-schouten-trace",
            field,
            opts,
            &[("trace_sj_vs_q", &sj_trace, 1e-10 * relax)],
            start,
        ));
    } else {
        let mut r = Report::new("j-schouten-trace");
        r.input("metric", field.name());
        r.notes
            .push("skipped: n = 4, the J-Schouten tensor has a 1/(n−4) factor".into());
        reports.push(r);
    }
    let mut e = simple(
        "einstein-degeneracy",
        field,
        opts,
        &[
            ("einstein_q_formula", &einstein_q, fd_accuracy(1e-9)),
            ("einstein_tensors", &einstein_tensors, fd_accuracy(1e-8)),
        ],
        start,
    );
    e.scalar("einstein_points", einstein_points as f64);
    if einstein_points == 0 {
        e.notes.push("no sampled point is Einstein; nothing to check".into());
    }
    reports.push(e);

    let mut div = divergence_identity_report(
        field,
        &points[..points.len().min(if fd { 4 } else { points.len() })],
        opts.fd_step,
        &ReportOptions {
            tolerances: opts.tolerances.clone(),
            ..Default::default()
        },
    )?;
    div.input("metric", field.name());
    reports.push(div);

    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::Analytic;
    use crate::metrics::{Family, Model};

    fn run(m: Model) -> Vec<Report> {
        let f: Analytic = m.field().unwrap();
        identity_suite(
            &f,
            &SuiteOptions {
                points: 4,
                functions: 2,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn suite_passes_on_round_sphere() {
        for r in run(Model::new(Family::Sphere { n: 5, r: 1.0 })) {
            assert!(r.pass, "{} {:?} {:?}", r.name, r.scalars, r.notes);
        }
    }

    #[test]
    fn n4_skips_j_schouten_with_notice() {
        let reports = run(Model::new(Family::Torus { n: 4 }));
        let sj = reports.iter().find(|r| r.name == "j-schouten-trace").unwrap();
        assert!(sj.notes.iter().any(|s| s.contains("n = 4")));
    }
}
