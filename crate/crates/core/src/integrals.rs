//! Quadrature over closed built-ins and the global reports.
//!
//! Grids are product rules in angle or torus coordinates: trapezoid on
//! periodic axes, Gauss–Jacobi in `cos θ` on polar axes (the `sinᵐ θ` of the
//! round measure is the Jacobi weight, so polynomials in the embedding
//! coordinates integrate exactly). Integrands are scalar
//! invariants, so each sphere node is *evaluated* in whichever stereographic
//! chart is better conditioned there; its weight carries the Jacobian from
//! the angle chart. Rotationally symmetric sphere models use a 1-D rule in
//! the polar angle.
//!
//! Every reduction is a pairwise sum in node order, so reports are
//! bit-reproducible.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::Arc;
use std::time::Instant;

use gauss_quad::jacobi::GaussJacobi;
use gauss_quad::legendre::GaussLegendre;
use gauss_quad::FiniteAboveNegOneF64;
use serde::Serialize;
use serde_json::Value;

use crate::curvature::{self, Tower};
use crate::error::{Error, Result};
use crate::fields::{ScalarField, Sym2Field};
use crate::jets::{ChartDomain, FdField, MetricField, MetricJet};
use crate::metrics::{ambient_to_stereo, angles_to_ambient, Family, Model, Pole, Scaled};
use crate::tensor;

/// One quadrature node: a point in one of the grid's evaluation charts and
/// its weight with respect to that chart's coordinate (Lebesgue) measure.
#[derive(Clone, Debug)]
pub struct Node {
    pub chart: usize,
    pub point: Vec<f64>,
    pub weight: f64,
}

pub struct QuadratureGrid {
    pub charts: Vec<Arc<dyn MetricField>>,
    pub nodes: Vec<Node>,
    pub scheme: &'static str,
    pub resolution: usize,
    /// Whether the nodes cover a closed manifold (integration by parts valid).
    pub closed: bool,
}

#[derive(Clone)]
pub enum GridKind {
    /// Periodic box chart, trapezoid rule on every axis.
    Torus(Arc<dyn MetricField>),
    /// Nested-angle product rule on `Sⁿ`, evaluated in the `[north, south]`
    /// stereographic charts.
    Sphere([Arc<dyn MetricField>; 2]),
    /// Gauss–Jacobi in the polar angle from `e_{n+1}`, for zonal models.
    SphereZonal([Arc<dyn MetricField>; 2]),
    /// Product of two nested-angle `S²` rules; charts indexed NN, NS, SN, SS.
    ProductSpheres([Arc<dyn MetricField>; 4]),
    /// Gauss–Legendre product rule inside an open chart. Volumes refer to
    /// that patch only.
    Patch(Arc<dyn MetricField>),
}

#[derive(Clone)]
pub struct GridSpec {
    pub kind: GridKind,
    pub resolution: usize,
}

/// Nodes per axis used when no resolution is given.
pub fn default_resolution(kind: &GridKind) -> usize {
    let n = grid_dim(kind);
    match kind {
        GridKind::SphereZonal(_) => 48,
        GridKind::ProductSpheres(_) => 8,
        GridKind::Patch(_) => 4,
        GridKind::Torus(_) | GridKind::Sphere(_) => match n {
            0..=3 => 16,
            4 => 12,
            5 => 6,
            _ => 4,
        },
    }
}

fn grid_dim(kind: &GridKind) -> usize {
    match kind {
        GridKind::Torus(f) | GridKind::Patch(f) => f.dim(),
        GridKind::Sphere(c) | GridKind::SphereZonal(c) => c[0].dim(),
        GridKind::ProductSpheres(_) => 4,
    }
}

fn arc(a: crate::jets::Analytic) -> Arc<dyn MetricField> {
    Arc::new(a)
}

impl GridSpec {
    /// The natural grid for a model: zonal when the model is rotationally
    /// symmetric, a full product rule otherwise, a patch for open models.
    pub fn for_model(model: &Model, resolution: Option<usize>) -> Result<Self> {
        let kind = match model.family {
            Family::Torus { .. } => GridKind::Torus(arc(model.field()?)),
            Family::Sphere { .. } => {
                let charts = [
                    arc(model.sphere_field(Pole::North)?),
                    arc(model.sphere_field(Pole::South)?),
                ];
                if model.is_zonal() {
                    GridKind::SphereZonal(charts)
                } else {
                    GridKind::Sphere(charts)
                }
            }
            Family::ProductSpheres { .. } => {
                let p = |a, b| model.product_field((a, b)).map(arc);
                GridKind::ProductSpheres([
                    p(Pole::North, Pole::North)?,
                    p(Pole::North, Pole::South)?,
                    p(Pole::South, Pole::North)?,
                    p(Pole::South, Pole::South)?,
                ])
            }
            Family::Flat { .. } | Family::Hyperbolic { .. } => GridKind::Patch(arc(model.field()?)),
        };
        Ok(Self::new(kind, resolution))
    }

    /// A full product rule on a sphere model even when it is zonal.
    pub fn sphere_product(model: &Model, resolution: Option<usize>) -> Result<Self> {
        let charts = [
            arc(model.sphere_field(Pole::North)?),
            arc(model.sphere_field(Pole::South)?),
        ];
        Ok(Self::new(GridKind::Sphere(charts), resolution))
    }

    pub fn new(kind: GridKind, resolution: Option<usize>) -> Self {
        let resolution = resolution.unwrap_or_else(|| default_resolution(&kind));
        GridSpec { kind, resolution }
    }

    pub fn dim(&self) -> usize {
        grid_dim(&self.kind)
    }

    pub fn is_closed(&self) -> bool {
        !matches!(self.kind, GridKind::Patch(_))
    }

    pub fn with_resolution(&self, resolution: usize) -> Self {
        GridSpec {
            kind: self.kind.clone(),
            resolution,
        }
    }

    /// The comparison grid for error estimates: two thirds of the nodes per axis.
    pub fn coarse(&self) -> Self {
        self.with_resolution((2 * self.resolution / 3).max(2))
    }

    /// The same grid with every chart metric replaced by `f(chart)`.
    pub fn map_charts<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(&Arc<dyn MetricField>) -> Result<Arc<dyn MetricField>>,
    {
        let kind = match &self.kind {
            GridKind::Torus(a) => GridKind::Torus(f(a)?),
            GridKind::Patch(a) => GridKind::Patch(f(a)?),
            GridKind::Sphere([a, b]) => GridKind::Sphere([f(a)?, f(b)?]),
            GridKind::SphereZonal([a, b]) => GridKind::SphereZonal([f(a)?, f(b)?]),
            GridKind::ProductSpheres([a, b, c, d]) => GridKind::ProductSpheres([f(a)?, f(b)?, f(c)?, f(d)?]),
        };
        Ok(GridSpec {
            kind,
            resolution: self.resolution,
        })
    }

    /// Every chart metric multiplied by `c²`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        self.map_charts(|f| Ok(Arc::new(Scaled::new(f.clone(), c)?)))
    }

    /// Every chart differentiated by finite differences instead.
    pub fn with_fd(&self, step: Option<f64>) -> Self {
        self.map_charts(|f| Ok(Arc::new(FdField::new(f.clone(), step))))
            .expect("wrapping cannot fail")
    }

    pub fn build(&self) -> Result<QuadratureGrid> {
        let r = self.resolution;
        if r < 2 {
            return Err(Error::InvalidParameter(format!("grid resolution must be ≥ 2, got {r}")));
        }
        let n = self.dim();
        let (charts, nodes, scheme): (Vec<Arc<dyn MetricField>>, Vec<Node>, &'static str) = match &self.kind {
            GridKind::Torus(f) => {
                let ChartDomain::Box(axes) = f.domain() else {
                    return Err(Error::Precondition(format!("{} has no periodic box chart", f.name())));
                };
                if !axes.iter().all(|a| a.periodic) {
                    return Err(Error::Precondition(format!(
                        "{} is not periodic on every axis",
                        f.name()
                    )));
                }
                let rules: Vec<Vec<(f64, f64)>> = axes.iter().map(|a| trapezoid(a.lo, a.hi, r)).collect();
                let nodes = tensor_product(&rules)
                    .into_iter()
                    .map(|(point, weight)| Node {
                        chart: 0,
                        point,
                        weight,
                    })
                    .collect();
                (vec![f.clone()], nodes, "trapezoid")
            }
            GridKind::Patch(f) => {
                let rules: Vec<Vec<(f64, f64)>> = match f.domain() {
                    ChartDomain::Box(axes) => axes.iter().map(|a| legendre(a.lo, a.hi, r)).collect(),
                    ChartDomain::Ball { dim, radius } => {
                        let h = radius / (dim as f64).sqrt();
                        vec![legendre(-h, h, r); dim]
                    }
                    ChartDomain::Balls(blocks) => blocks
                        .iter()
                        .flat_map(|&(d, rad)| {
                            let h = rad / (d as f64).sqrt();
                            vec![legendre(-h, h, r); d]
                        })
                        .collect(),
                };
                let nodes = tensor_product(&rules)
                    .into_iter()
                    .map(|(point, weight)| Node {
                        chart: 0,
                        point,
                        weight,
                    })
                    .collect();
                (vec![f.clone()], nodes, "gauss-legendre-patch")
            }
            GridKind::Sphere(charts) => (charts.to_vec(), sphere_nodes(n, r), "angles-gauss-jacobi-trapezoid"),
            GridKind::SphereZonal(charts) => (charts.to_vec(), zonal_nodes(n, r), "zonal-gauss-jacobi"),
            GridKind::ProductSpheres(charts) => {
                let s2 = sphere_nodes(2, r);
                let mut nodes = Vec::with_capacity(s2.len() * s2.len());
                for a in &s2 {
                    for b in &s2 {
                        let mut point = a.point.clone();
                        point.extend_from_slice(&b.point);
                        nodes.push(Node {
                            chart: 2 * a.chart + b.chart,
                            point,
                            weight: a.weight * b.weight,
                        });
                    }
                }
                (charts.to_vec(), nodes, "product-angles")
            }
        };
        if nodes.iter().any(|nd: &Node| !(nd.weight > 0.0)) {
            return Err(Error::Precondition("non-positive quadrature weight".into()));
        }
        Ok(QuadratureGrid {
            charts,
            nodes,
            scheme,
            resolution: r,
            closed: self.is_closed(),
        })
    }
}

fn trapezoid(lo: f64, hi: f64, r: usize) -> Vec<(f64, f64)> {
    let h = (hi - lo) / r as f64;
    (0..r).map(|k| (lo + k as f64 * h, h)).collect()
}

fn legendre(lo: f64, hi: f64, r: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(r).expect("r ≥ 1"));
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    rule.as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (mid + half * x, half * w))
        .collect()
}

fn tensor_product(rules: &[Vec<(f64, f64)>]) -> Vec<(Vec<f64>, f64)> {
    let mut out = vec![(Vec::new(), 1.0)];
    for rule in rules {
        let mut next = Vec::with_capacity(out.len() * rule.len());
        for (p, w) in &out {
            for &(x, wx) in rule {
                let mut q = p.clone();
                q.push(x);
                next.push((q, w * wx));
            }
        }
        out = next;
    }
    out
}

/// `(2/(1+|y|²))ⁿ`, the unit round density in stereographic coordinates.
fn stereo_density(y: &[f64]) -> f64 {
    let s: f64 = y.iter().map(|v| v * v).sum();
    (2.0 / (1.0 + s)).powi(y.len() as i32)
}

/// Stereographic node for a unit-sphere point with angle-chart weight `w`.
fn stereo_node(x: &[f64], w: f64) -> Node {
    let (pole, y) = ambient_to_stereo(x);
    let weight = w / stereo_density(&y);
    Node {
        chart: if pole == Pole::North { 0 } else { 1 },
        point: y,
        weight,
    }
}

/// Gauss–Jacobi rule for `∫₀^π F(θ) sin^m θ dθ`, in `u = cos θ` with weight
/// `(1 − u²)^{(m−1)/2}`. Exact when `F` is a polynomial in `cos θ`, `sin² θ`.
fn polar(m: usize, r: usize) -> Vec<(f64, f64)> {
    let a = FiniteAboveNegOneF64::new((m as f64 - 1.0) / 2.0).expect("exponent ≥ 0");
    GaussJacobi::new(NonZeroUsize::new(r).expect("r ≥ 1"), a, a)
        .as_node_weight_pairs()
        .iter()
        .map(|&(u, w)| (u.clamp(-1.0, 1.0).acos(), w))
        .collect()
}

fn sphere_nodes(n: usize, r: usize) -> Vec<Node> {
    // dA = Π_k sin^{n−1−k} θ_k dθ_k · dφ; the sine powers live in the rules.
    let mut rules: Vec<Vec<(f64, f64)>> = (0..n - 1).map(|k| polar(n - 1 - k, r)).collect();
    rules.push(trapezoid(0.0, 2.0 * PI, r));
    tensor_product(&rules)
        .into_iter()
        .map(|(angles, w)| {
            let x = angles_to_ambient(&angles, |a| a.sin(), |a| a.cos(), |a, b| a * b);
            stereo_node(&x, w)
        })
        .collect()
}

/// Area of the unit sphere `S^m`.
pub fn unit_sphere_area(m: usize) -> f64 {
    match m {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (m as f64 - 1.0) * unit_sphere_area(m - 2),
    }
}

fn zonal_nodes(n: usize, r: usize) -> Vec<Node> {
    let shell = unit_sphere_area(n - 1);
    polar(n - 1, r)
        .into_iter()
        .map(|(theta, w)| {
            let mut x = vec![0.0; n + 1];
            x[0] = theta.sin();
            x[n] = theta.cos();
            stereo_node(&x, w * shell)
        })
        .collect()
}

/// Everything a pointwise integrand may need at one node.
pub struct NodeContext<'a> {
    pub field: &'a dyn MetricField,
    pub point: &'a [f64],
    pub jet: MetricJet,
}

/// Per-node integrand values and volume elements `w·√det g`.
#[derive(Clone, Debug)]
pub struct Samples {
    pub values: Vec<Vec<f64>>,
    pub dv: Vec<f64>,
}

/// Pairwise summation with a fixed split, independent of thread count.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

impl Samples {
    pub fn volume(&self) -> f64 {
        pairwise_sum(&self.dv)
    }

    pub fn integral(&self, k: usize) -> f64 {
        self.integral_of(|v| v[k])
    }

    pub fn integral_of(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let terms: Vec<f64> = self.values.iter().zip(&self.dv).map(|(v, dv)| dv * f(v)).collect();
        pairwise_sum(&terms)
    }

    pub fn min(&self, k: usize) -> f64 {
        self.values.iter().map(|v| v[k]).fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self, k: usize) -> f64 {
        self.values.iter().map(|v| v[k]).fold(f64::NEG_INFINITY, f64::max)
    }
}

impl QuadratureGrid {
    pub fn dim(&self) -> usize {
        self.charts[0].dim()
    }

    /// Evaluate `f` at every node from metric jets of the given order.
    /// Work is spread over the available cores; results keep node order.
    pub fn evaluate<F>(&self, order: usize, f: F) -> Result<Samples>
    where
        F: Fn(&NodeContext) -> Result<Vec<f64>> + Sync,
    {
        let one = |node: &Node| -> Result<(Vec<f64>, f64)> {
            let field = self.charts[node.chart].as_ref();
            let jet = field.jet(&node.point, order)?;
            let sqrt_det = jet.metric_at_point()?.sqrt_det;
            let ctx = NodeContext {
                field,
                point: &node.point,
                jet,
            };
            let v = f(&ctx)?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("integrand"));
            }
            Ok((v, node.weight * sqrt_det))
        };
        let threads = std::thread::available_parallelism()
            .map_or(1, |t| t.get())
            .min(self.nodes.len().max(1));
        let results: Vec<Result<(Vec<f64>, f64)>> = if threads <= 1 {
            self.nodes.iter().map(one).collect()
        } else {
            let chunk = self.nodes.len().div_ceil(threads);
            std::thread::scope(|s| {
                let handles: Vec<_> = self
                    .nodes
                    .chunks(chunk)
                    .map(|c| {
                        let one = &one;
                        s.spawn(move || c.iter().map(one).collect::<Vec<_>>())
                    })
                    .collect();
                handles
                    .into_iter()
                    .flat_map(|h| h.join().expect("worker panicked"))
                    .collect()
            })
        };
        let mut values = Vec::with_capacity(results.len());
        let mut dv = Vec::with_capacity(results.len());
        for r in results {
            let (v, d) = r?;
            values.push(v);
            dv.push(d);
        }
        Ok(Samples { values, dv })
    }
}

/// `Σ wᵢ √det g(xᵢ) s(xᵢ)`.
pub fn integrate<F>(grid: &QuadratureGrid, order: usize, s: F) -> Result<f64>
where
    F: Fn(&NodeContext) -> Result<f64> + Sync,
{
    Ok(grid.evaluate(order, |c| Ok(vec![s(c)?]))?.integral(0))
}

/// `∫ s dv / Vol`.
pub fn average<F>(grid: &QuadratureGrid, order: usize, s: F) -> Result<f64>
where
    F: Fn(&NodeContext) -> Result<f64> + Sync,
{
    let samples = grid.evaluate(order, |c| Ok(vec![s(c)?]))?;
    Ok(samples.integral(0) / samples.volume())
}

/// Smallest eigenvalue of Ric relative to g over all nodes.
pub fn ricci_positivity_scan(grid: &QuadratureGrid) -> Result<f64> {
    let s = grid.evaluate(2, |c| {
        let t = Tower::new(&c.jet)?;
        let ev = t.ricci.value()?.eigenvalues_relative_to(&c.jet.metric_at_point()?)?;
        Ok(vec![ev[0]])
    })?;
    Ok(s.min(0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// A hypothesis of the inequality fails; nothing is claimed.
    Informational,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridInfo {
    pub scheme: String,
    pub resolution: usize,
    pub nodes: usize,
    pub coarse_resolution: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub name: String,
    pub inputs: BTreeMap<String, Value>,
    pub scalars: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub pass: bool,
    pub status: Status,
    pub notes: Vec<String>,
    pub grid: Option<GridInfo>,
    /// Not serialized, so identical runs produce identical documents.
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl Report {
    pub fn new(name: &str) -> Self {
        Report {
            name: name.to_string(),
            inputs: BTreeMap::new(),
            scalars: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            pass: true,
            status: Status::Pass,
            notes: Vec::new(),
            grid: None,
            wall_time_s: 0.0,
        }
    }

    pub fn input(&mut self, k: &str, v: impl Into<Value>) {
        self.inputs.insert(k.to_string(), v.into());
    }

    pub fn scalar(&mut self, k: &str, v: f64) {
        self.scalars.insert(k.to_string(), v);
    }

    pub fn get(&self, k: &str) -> f64 {
        self.scalars.get(k).copied().unwrap_or(f64::NAN)
    }

    /// Record a check; the report fails if any check fails.
    pub fn check(&mut self, what: &str, ok: bool) {
        if !ok {
            self.pass = false;
            self.status = Status::Fail;
            self.notes.push(format!("failed: {what}"));
        }
    }

    fn informational(&mut self, why: String) {
        if self.status != Status::Fail {
            self.status = Status::Informational;
        }
        self.notes.push(why);
    }

    fn finish(mut self, start: Instant) -> Self {
        if self.status == Status::Informational {
            self.pass = true;
        }
        self.wall_time_s = start.elapsed().as_secs_f64();
        self
    }
}

/// Tolerance overrides and the Euler characteristic for global reports.
#[derive(Clone, Debug, Default)]
pub struct ReportOptions {
    pub tolerances: BTreeMap<String, f64>,
    pub chi: Option<i64>,
    /// Also evaluate on the coarse comparison grid (error estimate).
    pub skip_coarse: bool,
}

impl ReportOptions {
    fn tol(&self, r: &mut Report, name: &str, default: f64) -> f64 {
        let v = self.tolerances.get(name).copied().unwrap_or(default);
        r.tolerances.insert(name.to_string(), v);
        v
    }
}

fn grid_info(spec: &GridSpec, grid: &QuadratureGrid, coarse: Option<usize>) -> GridInfo {
    GridInfo {
        scheme: grid.scheme.to_string(),
        resolution: spec.resolution,
        nodes: grid.nodes.len(),
        coarse_resolution: coarse,
    }
}

fn require_dim_not_four(n: usize, what: &'static str) -> Result<()> {
    if n == 4 {
        Err(Error::UnsupportedDimension(4, what))
    } else {
        Ok(())
    }
}

/// Pointwise quantities for the Almost-Schur and Q-Yamabe reports:
/// `[Q, |J̊|², min eig Ric, σ₁, σ₂]`.
fn schur_samples(spec: &GridSpec) -> Result<(Samples, GridInfo)> {
    let grid = spec.build()?;
    let samples = grid.evaluate(4, |c| {
        let t = Tower::new(&c.jet)?;
        let q = t.q_curvature();
        let (j, j_free) = t.j_tensor_from_parts(&q, &t.bach_definition(), &t.t_tensor());
        let at = &t.conn.at;
        let j_free = j_free.value()?;
        let jf2 = tensor::norm_sq(&at.g_inv, &j_free)?;
        let ev = t.ricci.value()?.eigenvalues_relative_to(at)?;
        let (s1, s2) = if t.n != 4 {
            let sj = t.j_schouten(&j, &q)?.value()?;
            let s1 = tensor::trace(&at.g_inv, &sj)?;
            (s1, 0.5 * (s1 * s1 - tensor::norm_sq(&at.g_inv, &sj)?))
        } else {
            (f64::NAN, f64::NAN)
        };
        Ok(vec![q.value()?, jf2, ev[0], s1, s2])
    })?;
    let info = grid_info(spec, &grid, None);
    Ok((samples, info))
}

struct SchurIntegrals {
    vol: f64,
    q_mean: f64,
    lhs: f64,
    jf2: f64,
    min_ric: f64,
}

fn schur_integrals(s: &Samples) -> SchurIntegrals {
    let vol = s.volume();
    let q_mean = s.integral(0) / vol;
    SchurIntegrals {
        vol,
        q_mean,
        lhs: s.integral_of(|v| (v[0] - q_mean).powi(2)),
        jf2: s.integral(1),
        min_ric: s.min(2),
    }
}

/// `∫(Q − Q̄)² ≤ 16n(n−1)/(n−4)² ∫|J̊|²` under Ric > 0.
pub fn almost_schur_report(spec: &GridSpec, opts: &ReportOptions) -> Result<Report> {
    let start = Instant::now();
    let n = spec.dim();
    require_dim_not_four(n, "the Almost-Schur constant 16n(n−1)/(n−4)² is undefined for n = 4")?;
    if !spec.is_closed() {
        return Err(Error::Precondition("Almost-Schur needs a closed manifold".into()));
    }
    let mut r = Report::new("almost-schur");
    let nf = n as f64;
    let constant = 16.0 * nf * (nf - 1.0) / (nf - 4.0).powi(2);
    let (fine, info) = schur_samples(spec)?;
    let f = schur_integrals(&fine);
    let (lhs, rhs) = (f.lhs, constant * f.jf2);
    let floor = 1e-12 * f.vol * (f.q_mean * f.q_mean).max(1.0);
    let (abs_err, rel_err, coarse_res) = if opts.skip_coarse {
        (floor, 0.0, None)
    } else {
        let cs = spec.coarse();
        let c = schur_integrals(&schur_samples(&cs)?.0);
        let (cl, cr) = (c.lhs, constant * c.jf2);
        let abs = (lhs - cl).abs().max((rhs - cr).abs()).max(floor);
        let rel = |a: f64, b: f64| if a.abs() > floor { (a - b).abs() / a.abs() } else { 0.0 };
        (abs, rel(lhs, cl).max(rel(rhs, cr)), Some(cs.resolution))
    };
    r.grid = Some(GridInfo {
        coarse_resolution: coarse_res,
        ..info
    });
    r.input("n", n);
    r.scalar("constant", constant);
    r.scalar("volume", f.vol);
    r.scalar("q_mean", f.q_mean);
    r.scalar("lhs", lhs);
    r.scalar("rhs", rhs);
    r.scalar("ratio", if rhs > 0.0 { lhs / rhs } else { f64::NAN });
    r.scalar("min_ricci_eigenvalue", f.min_ric);
    r.scalar("grid_error_abs", abs_err);
    r.scalar("grid_error_rel", rel_err);
    let slack = opts.tol(&mut r, "ratio_slack_factor", 5.0);
    let equality = lhs <= abs_err && rhs <= abs_err;
    r.scalar("equality_branch", if equality { 1.0 } else { 0.0 });
    if equality {
        r.notes
            .push("equality branch: both sides vanish to grid accuracy (J-Einstein); no converse is certified".into());
    } else {
        r.check(
            "lhs <= rhs·(1 + slack·grid_error_rel)",
            lhs <= rhs * (1.0 + slack * rel_err) + slack * floor,
        );
    }
    if !(f.min_ric > 0.0) {
        r.informational(format!(
            "hypothesis \"positive Ricci curvature\" fails on the grid (min eigenvalue {:.3e}); inequality reported without claim",
            f.min_ric
        ));
    }
    Ok(r.finish(start))
}

/// `J̊ ≡ 0 ⇒ Q constant`, as an implication over the grid.
pub fn schur_constancy_report(spec: &GridSpec, opts: &ReportOptions) -> Result<Report> {
    let start = Instant::now();
    let n = spec.dim();
    require_dim_not_four(
        n,
        "J̊ = 0 forces constant Q only for n ≠ 4 (the (n−4) factor in div J = ¼dQ)",
    )?;
    let mut r = Report::new("schur");
    let grid = spec.build()?;
    let s = grid.evaluate(4, |c| {
        let t = Tower::new(&c.jet)?;
        let q = t.q_curvature();
        let (_, jf) = t.j_tensor_from_parts(&q, &t.bach_definition(), &t.t_tensor());
        Ok(vec![
            q.value()?,
            tensor::norm_sq(&t.conn.at.g_inv, &jf.value()?)?.sqrt(),
        ])
    })?;
    r.grid = Some(grid_info(spec, &grid, None));
    let q_mean = if grid.closed {
        s.integral(0) / s.volume()
    } else {
        pairwise_sum(&s.values.iter().map(|v| v[0]).collect::<Vec<_>>()) / s.values.len() as f64
    };
    let max_jf = s.max(1);
    let spread = s.max(0) - s.min(0);
    let tol_j = opts.tol(&mut r, "j_traceless_max", 1e-8);
    let tol_q = opts.tol(&mut r, "q_spread_rel", 1e-7);
    r.input("n", n);
    r.scalar("q_mean", q_mean);
    r.scalar("q_spread", spread);
    r.scalar("j_traceless_max", max_jf);
    let premise = max_jf <= tol_j;
    r.scalar("premise_holds", if premise { 1.0 } else { 0.0 });
    if premise {
        r.check("q spread <= tol·(1 + |Q̄|)", spread <= tol_q * (1.0 + q_mean.abs()));
    } else {
        r.notes
            .push("J̊ is not zero on the grid; the implication holds vacuously".into());
    }
    Ok(r.finish(start))
}

/// `∫(Q + ¼|W|²) dv = 8π²χ` in dimension four.
pub fn gauss_bonnet_report(spec: &GridSpec, chi: Option<i64>, opts: &ReportOptions) -> Result<Report> {
    let start = Instant::now();
    let n = spec.dim();
    if n != 4 {
        return Err(Error::UnsupportedDimension(
            n,
            "the Gauss–Bonnet–Chern identity ∫(Q + ¼|W|²) = 8π²χ is four-dimensional",
        ));
    }
    if !spec.is_closed() {
        return Err(Error::Precondition("Gauss–Bonnet needs a closed manifold".into()));
    }
    let chi = chi
        .or(opts.chi)
        .ok_or_else(|| Error::Precondition("Gauss–Bonnet needs the Euler characteristic χ".into()))?;
    let mut r = Report::new("gauss-bonnet");
    let run = |spec: &GridSpec| -> Result<(f64, f64, f64, GridInfo)> {
        let grid = spec.build()?;
        let s = grid.evaluate(4, |c| {
            let t = Tower::new(&c.jet)?;
            let w2 = tensor::norm_sq_4(&t.conn.at.g_inv, &t.weyl.value()?)?;
            Ok(vec![t.q_curvature().value()?, w2])
        })?;
        Ok((
            s.integral_of(|v| v[0] + 0.25 * v[1]),
            s.integral(0),
            s.volume(),
            grid_info(spec, &grid, None),
        ))
    };
    let (total, int_q, vol, info) = run(spec)?;
    let target = 8.0 * PI * PI * chi as f64;
    let norm = 8.0 * PI * PI * (chi.abs().max(1) as f64);
    let residual = (total - target).abs() / norm;
    let tol = opts.tol(&mut r, "residual", 1e-5);
    let coarse = if opts.skip_coarse {
        None
    } else {
        let cs = spec.coarse();
        let (ct, ..) = run(&cs)?;
        r.scalar("grid_error", (ct - total).abs() / norm);
        Some(cs.resolution)
    };
    r.grid = Some(GridInfo {
        coarse_resolution: coarse,
        ..info
    });
    r.input("chi", chi);
    r.scalar("integral", total);
    r.scalar("integral_q", int_q);
    r.scalar("integral_quarter_w2", total - int_q);
    r.scalar("target", target);
    r.scalar("volume", vol);
    r.scalar("residual", residual);
    r.check("|∫(Q + ¼|W|²) − 8π²χ| / (8π² max(1,|χ|)) <= tol", residual <= tol);
    Ok(r.finish(start))
}

fn yamabe_quantities(s: &Samples, n: usize) -> (f64, f64, f64, f64) {
    let nf = n as f64;
    let vol = s.volume();
    let int_s1 = s.integral(3);
    let int_s2 = s.integral(4);
    let y_q = int_s1 / vol.powf((nf - 4.0) / nf);
    let lhs = vol.powf(-(nf - 8.0) / nf) * int_s2;
    let rhs = (nf - 1.0) / (2.0 * nf) * y_q * y_q;
    (vol, y_q, lhs, rhs)
}

/// `Vol^{−(n−8)/n} ∫σ₂ᴶ ≤ (n−1)/(2n) Y_Q²` and scale invariance of `Y_Q`.
pub fn q_yamabe_report(spec: &GridSpec, opts: &ReportOptions) -> Result<Report> {
    let start = Instant::now();
    let n = spec.dim();
    require_dim_not_four(
        n,
        "σ₁ᴶ, σ₂ᴶ need the J-Schouten tensor (J − 3Q g/(4(n−1)))/(n−4), undefined for n = 4",
    )?;
    if !spec.is_closed() {
        return Err(Error::Precondition(
            "the Q-Yamabe inequality needs a closed manifold".into(),
        ));
    }
    let mut r = Report::new("q-yamabe");
    let (fine, info) = schur_samples(spec)?;
    let (vol, y_q, lhs, rhs) = yamabe_quantities(&fine, n);
    let ratio = lhs / rhs;
    let (rel_err, coarse) = if opts.skip_coarse {
        (0.0, None)
    } else {
        let cs = spec.coarse();
        let (_, _, cl, cr) = yamabe_quantities(&schur_samples(&cs)?.0, n);
        (((cl / cr) - ratio).abs(), Some(cs.resolution))
    };
    let scaled = spec.scaled(2.0)?;
    let (_, y_q2, ..) = yamabe_quantities(&schur_samples(&scaled)?.0, n);
    let scale_gap = (y_q2 - y_q).abs() / y_q.abs().max(f64::MIN_POSITIVE);
    r.grid = Some(GridInfo {
        coarse_resolution: coarse,
        ..info
    });
    r.input("n", n);
    r.scalar("volume", vol);
    r.scalar("y_q", y_q);
    r.scalar("y_q_scaled_c2", y_q2);
    r.scalar("scale_invariance_gap", scale_gap);
    r.scalar("lhs", lhs);
    r.scalar("rhs", rhs);
    r.scalar("ratio", ratio);
    r.scalar("sigma1_min", fine.min(3));
    r.scalar("sigma1_max", fine.max(3));
    r.scalar("sigma2_min", fine.min(4));
    r.scalar("sigma2_max", fine.max(4));
    r.scalar("min_ricci_eigenvalue", fine.min(2));
    r.scalar("grid_error_rel", rel_err);
    let slack = opts.tol(&mut r, "ratio_slack_factor", 5.0);
    let eq_tol = opts.tol(&mut r, "equality", 1e-8);
    let scale_tol = opts.tol(&mut r, "scale_invariance", 1e-8);
    let equality = (ratio - 1.0).abs() <= eq_tol.max(rel_err);
    r.scalar("equality_branch", if equality { 1.0 } else { 0.0 });
    if equality {
        r.notes
            .push("equality branch: ratio is 1 to grid accuracy (J-Einstein); no converse is certified".into());
    }
    r.check("ratio <= 1 + slack·grid_error", ratio <= 1.0 + slack * rel_err + eq_tol);
    r.check("Y_Q(4g) == Y_Q(g)", scale_gap <= scale_tol);
    if !(fine.min(2) > 0.0) {
        r.informational(
            "hypothesis \"positive Ricci curvature\" fails on the grid; inequality reported without claim".into(),
        );
    }
    Ok(r.finish(start))
}

/// A scalar test function and a symmetric-tensor direction.
#[derive(Clone)]
pub struct TestPair {
    pub f: ScalarField,
    pub h: Sym2Field,
}

impl TestPair {
    /// Seeded random pair suited to the model: ambient polynomials on
    /// embedded models, trigonometric chart fields otherwise.
    pub fn random(model: &Model, seed: u64) -> Self {
        match model.family {
            Family::Sphere { n, .. } => TestPair {
                f: ScalarField::ambient_poly(n + 1, seed),
                h: Sym2Field::ambient_linear(n + 1, seed),
            },
            Family::ProductSpheres { .. } => TestPair {
                f: ScalarField::ambient_poly(6, seed),
                h: Sym2Field::ambient_linear(6, seed),
            },
            _ => Self::chart(model.dim(), seed),
        }
    }

    /// Trigonometric chart fields; periodic, so usable on any torus chart.
    pub fn chart(n: usize, seed: u64) -> Self {
        TestPair {
            f: ScalarField::chart_trig(n, seed),
            h: Sym2Field::chart_trig(n, seed),
        }
    }
}

fn adjoint_samples(spec: &GridSpec, pairs: &[TestPair]) -> Result<(Samples, GridInfo)> {
    let grid = spec.build()?;
    let s = grid.evaluate(4, |c| {
        let t = Tower::new(&c.jet)?;
        let gi = &t.conn.at.g_inv;
        let mut out = Vec::with_capacity(4 * pairs.len());
        for p in pairs {
            let f = c.field.scalar_jet(&p.f.formula, c.point, 4)?.f;
            let h = c.field.sym2_jet(&p.h.formula, c.point, 5)?;
            let h0 = h.value()?;
            let fv = f.value()?;
            out.push(fv * t.gamma_scalar(&h).value()?);
            out.push(tensor::inner(gi, &t.gamma_star_scalar(&f).value()?, &h0)?);
            out.push(fv * curvature::linearize_q_fd(&c.jet, &h, None)?);
            out.push(tensor::inner(gi, &t.gamma_star_q(&f).value()?, &h0)?);
        }
        Ok(out)
    })?;
    Ok((s, grid_info(spec, &grid, None)))
}

/// `∫ f γ(h) = ∫⟨γ*f, h⟩` and `∫ f Γ_FD(h) = ∫⟨Γ*f, h⟩` on a closed manifold.
pub fn adjointness_report(spec: &GridSpec, pairs: &[TestPair], opts: &ReportOptions) -> Result<Report> {
    let start = Instant::now();
    if !spec.is_closed() {
        return Err(Error::Precondition(
            "adjointness needs a closed manifold (integration by parts)".into(),
        ));
    }
    if matches!(spec.kind, GridKind::SphereZonal(_)) {
        return Err(Error::Precondition(
            "test pairs are not zonal; use a full sphere product grid".into(),
        ));
    }
    let mut r = Report::new("adjointness");
    let tol_scalar = opts.tol(&mut r, "scalar_residual", 1e-7);
    let tol_q = opts.tol(&mut r, "q_residual", 1e-5);
    let (s, info) = adjoint_samples(spec, pairs)?;
    r.grid = Some(info);
    let vol = s.volume();
    for (k, p) in pairs.iter().enumerate() {
        r.input(&format!("pair{k}"), format!("f={}, h={}", p.f.label, p.h.label));
        for (name, a, b, tol) in [
            ("scalar", 4 * k, 4 * k + 1, tol_scalar),
            ("q", 4 * k + 2, 4 * k + 3, tol_q),
        ] {
            let (ia, ib) = (s.integral(a), s.integral(b));
            let l2 = |i: usize| s.integral_of(|v| v[i] * v[i]).sqrt();
            let scale = vol.sqrt() * l2(a).max(l2(b));
            let res = if ia == ib { 0.0 } else { (ia - ib).abs() / scale };
            r.scalar(&format!("pair{k}.{name}.lhs"), ia);
            r.scalar(&format!("pair{k}.{name}.rhs"), ib);
            r.scalar(&format!("pair{k}.{name}.residual"), res);
            r.check(&format!("pair{k} {name} adjointness"), res <= tol);
        }
    }
    Ok(r.finish(start))
}

/// `div J = ¼dQ` and (n ≠ 4) `div S_J = dQ/(4(n−1))` at the given points.
pub fn divergence_identity_report(
    field: &dyn MetricField,
    points: &[Vec<f64>],
    fd_step: Option<f64>,
    opts: &ReportOptions,
) -> Result<Report> {
    let start = Instant::now();
    let mut r = Report::new("divergence");
    let n = field.dim();
    let fd = field.backend() == crate::jets::Backend::Fd;
    let tol = opts.tol(&mut r, "residual", if fd { 1e-4 } else { 1e-6 });
    r.input("backend", field.backend().to_string());
    r.input("points", points.len());
    let mut max_dq: f64 = 0.0;
    let mut max_term: f64 = 0.0;
    let mut gap_j: f64 = 0.0;
    let mut gap_sj: f64 = 0.0;
    let mut gap_trace: f64 = 0.0;
    for p in points {
        let d = if fd {
            let step = fd_step.unwrap_or(3e-2 * field.fd_scale());
            curvature::divergence_identities_fd(|x| field.jet(x, 4), p, step)?
        } else {
            curvature::divergence_identities(&field.jet(p, 5)?)?
        };
        max_dq = d.quarter_dq.iter().fold(max_dq, |m, v| m.max(4.0 * v.abs()));
        max_term = max_term.max(d.term_scale);
        for (a, b) in d.div_j.iter().zip(&d.quarter_dq) {
            gap_j = gap_j.max((a - b).abs());
        }
        if let (Some(ds), Some(rhs), Some(tr)) = (&d.div_sj, &d.sj_rhs, d.trace_sj) {
            for (a, b) in ds.iter().zip(rhs) {
                gap_sj = gap_sj.max((a - b).abs());
            }
            gap_trace = gap_trace.max((tr - d.q / (4.0 * (n as f64 - 1.0))).abs() / d.q.abs().max(f64::MIN_POSITIVE));
        }
    }
    // Roundoff in div J is relative to its individual terms, which stay
    // finite when dQ vanishes (Einstein metrics); FD-of-field noise is larger.
    // The absolute floor covers flat metrics, where every term is roundoff.
    let eps_rel = opts.tol(&mut r, "eps_rel", if fd { 1e-2 } else { 1e-4 });
    let eps = eps_rel * max_term + 1e-12;
    let norm = max_dq + eps;
    let rj = if gap_j == 0.0 { 0.0 } else { gap_j / norm };
    r.scalar("max_abs_dq", max_dq);
    r.scalar("term_scale", max_term);
    r.scalar("residual_div_j", rj);
    r.check("max |div J − ¼dQ| / (max|dQ| + ε) <= tol", rj <= tol);
    if n != 4 {
        let rs = if gap_sj == 0.0 {
            0.0
        } else {
            gap_sj / (max_dq / (4.0 * (n as f64 - 1.0)) + eps)
        };
        r.scalar("residual_div_sj", rs);
        r.scalar("trace_sj_gap", gap_trace);
        r.check("max |div S_J − dQ/(4(n−1))| / (max|dQ|/(4(n−1)) + ε) <= tol", rs <= tol);
        r.check("tr S_J == Q/(4(n−1))", gap_trace <= 1e-9);
    } else {
        r.notes
            .push("n = 4: S_J is undefined; only div J = ¼dQ is checked".into());
    }
    Ok(r.finish(start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ConformalFactor;
    use approx::assert_relative_eq;

    fn sphere(n: usize) -> Model {
        Model::new(Family::Sphere { n, r: 1.0 })
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(unit_sphere_area(2), 4.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(unit_sphere_area(3), 2.0 * PI * PI, max_relative = 1e-15);
        assert_relative_eq!(unit_sphere_area(4), 8.0 * PI * PI / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn s4_volume_and_total_q() {
        for spec in [
            GridSpec::for_model(&sphere(4), None).unwrap(),
            GridSpec::sphere_product(&sphere(4), Some(8)).unwrap(),
        ] {
            let grid = spec.build().unwrap();
            let s = grid
                .evaluate(4, |c| Ok(vec![Tower::new(&c.jet)?.q_curvature().value()?]))
                .unwrap();
            assert_relative_eq!(s.volume(), 8.0 * PI * PI / 3.0, max_relative = 1e-6);
            assert_relative_eq!(s.integral(0), 16.0 * PI * PI, max_relative = 1e-6);
        }
    }

    #[test]
    fn average_of_constant() {
        let grid = GridSpec::for_model(&sphere(3), Some(10)).unwrap().build().unwrap();
        assert_relative_eq!(average(&grid, 0, |_| Ok(2.5)).unwrap(), 2.5, max_relative = 1e-12);
    }

    #[test]
    fn positivity_scan_values() {
        let grid = GridSpec::for_model(&sphere(6), Some(12)).unwrap().build().unwrap();
        assert_relative_eq!(ricci_positivity_scan(&grid).unwrap(), 5.0, epsilon = 1e-8);
        let torus = Model::new(Family::Torus { n: 3 });
        let grid = GridSpec::for_model(&torus, Some(4)).unwrap().build().unwrap();
        assert!(ricci_positivity_scan(&grid).unwrap().abs() <= 1e-10);
    }

    #[test]
    fn product_rule_is_exact_on_ambient_polynomials() {
        // E[X_a⁴] = 3/(d(d+2)) on the unit sphere in ℝ^d
        let m = sphere(4);
        let vol = 8.0 * PI * PI / 3.0;
        let g = GridSpec::sphere_product(&m, Some(6)).unwrap().build().unwrap();
        let s = g
            .evaluate(0, |ctx| {
                let x = crate::jets::coordinate_jets(ctx.point, 0);
                let amb = ctx.field.ambient(&x).expect("embedded");
                amb.iter().map(|a| a.value().map(|v| v.powi(4))).collect()
            })
            .unwrap();
        assert!((s.volume() - vol).abs() < 1e-12);
        for a in 0..5 {
            assert!(
                (s.integral(a) - vol * 3.0 / 35.0).abs() < 1e-12,
                "{a}: {}",
                s.integral(a)
            );
        }
    }

    #[test]
    fn dimension_gates() {
        let spec = GridSpec::for_model(&sphere(4), Some(8)).unwrap();
        let opts = ReportOptions::default();
        assert!(matches!(
            almost_schur_report(&spec, &opts),
            Err(Error::UnsupportedDimension(4, _))
        ));
        assert!(matches!(
            q_yamabe_report(&spec, &opts),
            Err(Error::UnsupportedDimension(4, _))
        ));
        let s6 = GridSpec::for_model(&sphere(6), Some(8)).unwrap();
        assert!(matches!(
            gauss_bonnet_report(&s6, Some(2), &opts),
            Err(Error::UnsupportedDimension(6, _))
        ));
        assert!(gauss_bonnet_report(&spec, None, &opts).is_err());
        let hyp = GridSpec::for_model(&Model::new(Family::Hyperbolic { n: 3, cap: 0.5 }), None).unwrap();
        assert!(adjointness_report(&hyp, &[], &opts).is_err());
    }

    #[test]
    fn zonal_and_product_rules_agree_on_a_bump() {
        let m = sphere(3);
        let f = m.bump(None, None).unwrap();
        let m = m.with_conformal(f, 0.05).unwrap();
        let q = |spec: GridSpec| {
            let g = spec.build().unwrap();
            g.evaluate(4, |c| Ok(vec![Tower::new(&c.jet)?.q_curvature().value()?]))
                .unwrap()
                .integral(0)
        };
        let a = q(GridSpec::for_model(&m, Some(32)).unwrap());
        let b = q(GridSpec::sphere_product(&m, Some(16)).unwrap());
        assert_relative_eq!(a, b, max_relative = 1e-8);
    }

    #[test]
    fn reports_are_deterministic() {
        let m = sphere(3);
        let m = m
            .clone()
            .with_conformal(ConformalFactor::zonal_bump(3, 1.0).unwrap(), 0.05)
            .unwrap();
        let spec = GridSpec::for_model(&m, Some(16)).unwrap();
        let opts = ReportOptions::default();
        let a = almost_schur_report(&spec, &opts).unwrap();
        let b = almost_schur_report(&spec, &opts).unwrap();
        for (k, v) in &a.scalars {
            assert_eq!(v.to_bits(), b.scalars[k].to_bits(), "{k}");
        }
    }
}
