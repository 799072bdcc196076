//! Built-in metric families with analytic jets.
//!
//! Regimes covered: flat and flat tori (Ricci-flat), round spheres and
//! hyperbolic balls (Einstein), conformal deformations of any of these
//! (conformally flat, not Einstein), and `S²(a)×S²(b)` (Einstein but not
//! conformally flat when `a = b`).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jets::{
    Analytic, AnalyticMetric, Backend, ChartDomain, FieldInput, Interval, MetricField, MetricJet, ScalarFormula,
};
use crate::taylor::Jet;
use crate::tensor::Sym2;
use crate::Result as CrateResult;

/// Largest conformal amplitude accepted for bumps on spheres. With the
/// bump width fixed at [`SPHERE_BUMP_WIDTH`] this keeps Ric > 0 for
/// `3 ≤ n ≤ 8`; the test suite confirms it with the positivity scan.
pub const SPHERE_EPS_MAX: f64 = 0.1;
/// Largest conformal amplitude for bumps on flat tori (conditioning only;
/// `e^{2εφ}g` is a metric for every ε).
pub const TORUS_EPS_MAX: f64 = 0.5;
/// Chordal width of the default sphere bump.
pub const SPHERE_BUMP_WIDTH: f64 = 1.0;
/// Width of the default torus bump.
pub const TORUS_BUMP_WIDTH: f64 = 1.0;
/// Spherical charts stay this far from their coordinate singularities.
pub const ANGLE_MARGIN: f64 = 0.05;
/// Stereographic charts are capped at this radius.
pub const STEREO_CAP: f64 = 10.0;
/// Test points in a stereographic chart are drawn from `|y| ≤ 1.5`, a bit
/// more than a hemisphere; further out high partials lose digits.
pub const STEREO_SAMPLE_RADIUS: f64 = 1.5;
/// FD step factor for stereographic charts: their fourth partials are
/// truncation-limited at the unit-scale steps.
pub const STEREO_FD_SCALE: f64 = 0.7;

fn zero_like(x: &Jet) -> Jet {
    Jet::zero(x.dim(), x.order().unwrap_or(0))
}

fn const_like(x: &Jet, v: f64) -> Jet {
    Jet::constant(x.dim(), x.order().unwrap_or(0), v)
}

fn diag(coords: &[Jet], entries: Vec<Jet>) -> Sym2<Jet> {
    let n = entries.len();
    Sym2::from_fn(n, |i, j| {
        if i == j {
            entries[i].clone()
        } else {
            zero_like(&coords[0])
        }
    })
}

fn check_dim(n: usize) -> Result<()> {
    if n < 3 {
        Err(Error::UnsupportedDimension(n, "built-in metrics need n ≥ 3"))
    } else if n > crate::taylor::MAX_DIM {
        Err(Error::UnsupportedDimension(n, "above the supported jet dimension"))
    } else {
        Ok(())
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pole {
    North,
    South,
}

impl Pole {
    fn sign(self) -> f64 {
        match self {
            Pole::North => 1.0,
            Pole::South => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SphereChart {
    /// Nested angles `(θ₁, …, θ_{n−1}, φ)`.
    Spherical,
    /// Stereographic coordinates centred at the given pole of `e_{n+1}`.
    Stereographic(Pole),
}

impl fmt::Display for SphereChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SphereChart::Spherical => f.write_str("spherical"),
            SphereChart::Stereographic(Pole::North) => f.write_str("stereographic-north"),
            SphereChart::Stereographic(Pole::South) => f.write_str("stereographic-south"),
        }
    }
}

/// Euclidean metric on `ℝⁿ`, or on the torus `ℝⁿ/Λ` with the given periods.
pub struct Flat {
    n: usize,
    periods: Option<Vec<f64>>,
}

impl AnalyticMetric for Flat {
    fn name(&self) -> String {
        match &self.periods {
            None => format!("flat(n={})", self.n),
            Some(_) => format!("torus(n={})", self.n),
        }
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn domain(&self) -> ChartDomain {
        match &self.periods {
            None => ChartDomain::Box(vec![
                Interval {
                    lo: -1e6,
                    hi: 1e6,
                    periodic: false
                };
                self.n
            ]),
            Some(p) => ChartDomain::Box(
                p.iter()
                    .map(|&hi| Interval {
                        lo: 0.0,
                        hi,
                        periodic: true,
                    })
                    .collect(),
            ),
        }
    }
    fn sample_domain(&self) -> ChartDomain {
        match &self.periods {
            None => ChartDomain::Box(vec![
                Interval {
                    lo: -PI,
                    hi: PI,
                    periodic: false
                };
                self.n
            ]),
            Some(_) => self.domain(),
        }
    }
    fn components(&self, x: &[Jet]) -> Sym2<Jet> {
        diag(x, x.iter().map(|c| const_like(c, 1.0)).collect())
    }
    fn euler_characteristic(&self) -> Option<i64> {
        (self.periods.is_some() && self.n == 4).then_some(0)
    }
}

pub fn make_flat(n: usize) -> Result<Analytic> {
    check_dim(n)?;
    Ok(Analytic::new(Flat { n, periods: None }))
}

pub fn make_flat_torus(n: usize, periods: &[f64]) -> Result<Analytic> {
    check_dim(n)?;
    if periods.len() != n {
        return Err(Error::DimensionMismatch(n, periods.len()));
    }
    for &p in periods {
        positive("torus period", p)?;
    }
    Ok(Analytic::new(Flat {
        n,
        periods: Some(periods.to_vec()),
    }))
}

/// Round sphere of radius `r`.
pub struct RoundSphere {
    n: usize,
    r: f64,
    chart: SphereChart,
}

/// Unit-sphere embedding of nested angles.
pub fn angles_to_ambient<T: Clone>(
    angles: &[T],
    sin: impl Fn(&T) -> T,
    cos: impl Fn(&T) -> T,
    mul: impl Fn(&T, &T) -> T,
) -> Vec<T> {
    // X₁ = cos θ₁, X₂ = sin θ₁ cos θ₂, …, X_n = Πsin θ · cos φ, X_{n+1} = Πsin θ · sin φ
    let n = angles.len();
    let mut out = Vec::with_capacity(n + 1);
    let mut prod: Option<T> = None;
    for (k, a) in angles.iter().enumerate() {
        let c = cos(a);
        out.push(match &prod {
            None => c,
            Some(p) => mul(p, &c),
        });
        let s = sin(a);
        prod = Some(match &prod {
            None => s,
            Some(p) => mul(p, &s),
        });
        if k == n - 1 {
            out.push(prod.clone().unwrap());
        }
    }
    out
}

/// Unit-sphere point of stereographic coordinates `y` about `pole`.
pub fn stereo_to_ambient(y: &[f64], pole: Pole) -> Vec<f64> {
    let s: f64 = y.iter().map(|v| v * v).sum();
    let mut x: Vec<f64> = y.iter().map(|v| 2.0 * v / (1.0 + s)).collect();
    x.push(pole.sign() * (1.0 - s) / (1.0 + s));
    x
}

/// Stereographic coordinates of a unit vector, choosing the nearer pole.
pub fn ambient_to_stereo(x: &[f64]) -> (Pole, Vec<f64>) {
    let n = x.len() - 1;
    let pole = if x[n] >= 0.0 { Pole::North } else { Pole::South };
    let d = 1.0 + pole.sign() * x[n];
    (pole, x[..n].iter().map(|v| v / d).collect())
}

impl AnalyticMetric for RoundSphere {
    fn name(&self) -> String {
        format!("sphere(n={}, r={}, chart={})", self.n, self.r, self.chart)
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn domain(&self) -> ChartDomain {
        match self.chart {
            SphereChart::Spherical => {
                let mut axes = vec![
                    Interval {
                        lo: ANGLE_MARGIN,
                        hi: PI - ANGLE_MARGIN,
                        periodic: false
                    };
                    self.n - 1
                ];
                axes.push(Interval {
                    lo: 0.0,
                    hi: 2.0 * PI,
                    periodic: true,
                });
                ChartDomain::Box(axes)
            }
            SphereChart::Stereographic(_) => ChartDomain::Ball {
                dim: self.n,
                radius: STEREO_CAP,
            },
        }
    }
    fn sample_domain(&self) -> ChartDomain {
        match self.chart {
            SphereChart::Spherical => self.domain(),
            SphereChart::Stereographic(_) => ChartDomain::Ball {
                dim: self.n,
                radius: STEREO_SAMPLE_RADIUS,
            },
        }
    }
    fn fd_scale(&self) -> f64 {
        match self.chart {
            SphereChart::Spherical => 1.0,
            SphereChart::Stereographic(_) => STEREO_FD_SCALE,
        }
    }
    fn components(&self, x: &[Jet]) -> Sym2<Jet> {
        let r2 = self.r * self.r;
        match self.chart {
            SphereChart::Spherical => {
                let mut entries = Vec::with_capacity(self.n);
                let mut w = const_like(&x[0], r2);
                for a in x {
                    entries.push(w.clone());
                    w = &w * &a.sin().square();
                }
                diag(x, entries)
            }
            SphereChart::Stereographic(_) => {
                let s = x.iter().fold(const_like(&x[0], 1.0), |acc, v| &acc + &v.square());
                let c = s.square().recip().scale(4.0 * r2);
                diag(x, vec![c; self.n])
            }
        }
    }
    fn ambient(&self, x: &[Jet]) -> Option<Vec<Jet>> {
        Some(match self.chart {
            SphereChart::Spherical => angles_to_ambient(x, |a| a.sin(), |a| a.cos(), |a, b| a * b),
            SphereChart::Stereographic(pole) => {
                let s = x.iter().fold(const_like(&x[0], 1.0), |acc, v| &acc + &v.square());
                let inv = s.recip();
                let mut out: Vec<Jet> = x.iter().map(|v| (v * &inv).scale(2.0)).collect();
                // (1 − |y|²)/(1 + |y|²) = 2/(1 + |y|²) − 1
                out.push((inv.scale(2.0) + (-1.0)).scale(pole.sign()));
                out
            }
        })
    }
    fn euler_characteristic(&self) -> Option<i64> {
        (self.n == 4).then_some(2)
    }
}

pub fn make_round_sphere(n: usize, r: f64, chart: SphereChart) -> Result<Analytic> {
    check_dim(n)?;
    positive("sphere radius", r)?;
    Ok(Analytic::new(RoundSphere { n, r, chart }))
}

/// Hyperbolic space in the Poincaré ball, restricted to `|x| ≤ cap`.
pub struct Hyperbolic {
    n: usize,
    cap: f64,
}

impl AnalyticMetric for Hyperbolic {
    fn name(&self) -> String {
        format!("hyperbolic(n={}, cap={})", self.n, self.cap)
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn domain(&self) -> ChartDomain {
        ChartDomain::Ball {
            dim: self.n,
            radius: self.cap,
        }
    }
    fn fd_scale(&self) -> f64 {
        // the conformal factor blows up on the unit sphere
        1.0 - self.cap
    }
    fn components(&self, x: &[Jet]) -> Sym2<Jet> {
        let s = x.iter().fold(const_like(&x[0], 1.0), |acc, v| &acc - &v.square());
        let c = s.square().recip().scale(4.0);
        diag(x, vec![c; self.n])
    }
}

pub fn make_hyperbolic(n: usize, cap: f64) -> Result<Analytic> {
    check_dim(n)?;
    if !(cap > 0.0 && cap < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "hyperbolic cap radius must lie in (0, 1), got {cap}"
        )));
    }
    Ok(Analytic::new(Hyperbolic { n, cap }))
}

/// `S²(a) × S²(b)` in a product of stereographic charts.
pub struct ProductSpheres {
    a: f64,
    b: f64,
    poles: (Pole, Pole),
}

impl AnalyticMetric for ProductSpheres {
    fn name(&self) -> String {
        format!("product-spheres(a={}, b={})", self.a, self.b)
    }
    fn dim(&self) -> usize {
        4
    }
    fn domain(&self) -> ChartDomain {
        ChartDomain::Balls(vec![(2, STEREO_CAP), (2, STEREO_CAP)])
    }
    fn sample_domain(&self) -> ChartDomain {
        ChartDomain::Balls(vec![(2, STEREO_SAMPLE_RADIUS), (2, STEREO_SAMPLE_RADIUS)])
    }
    fn fd_scale(&self) -> f64 {
        STEREO_FD_SCALE
    }
    fn components(&self, x: &[Jet]) -> Sym2<Jet> {
        let factor = |y: &[Jet], r: f64| {
            let s = y.iter().fold(const_like(&y[0], 1.0), |acc, v| &acc + &v.square());
            s.square().recip().scale(4.0 * r * r)
        };
        let c1 = factor(&x[..2], self.a);
        let c2 = factor(&x[2..], self.b);
        diag(x, vec![c1.clone(), c1, c2.clone(), c2])
    }
    fn ambient(&self, x: &[Jet]) -> Option<Vec<Jet>> {
        let emb = |y: &[Jet], pole: Pole| {
            let s = y.iter().fold(const_like(&y[0], 1.0), |acc, v| &acc + &v.square());
            let inv = s.recip();
            let mut out: Vec<Jet> = y.iter().map(|v| (v * &inv).scale(2.0)).collect();
            out.push((inv.scale(2.0) + (-1.0)).scale(pole.sign()));
            out
        };
        let mut out = emb(&x[..2], self.poles.0);
        out.extend(emb(&x[2..], self.poles.1));
        Some(out)
    }
    fn euler_characteristic(&self) -> Option<i64> {
        Some(4)
    }
}

pub fn make_product_spheres(a: f64, b: f64) -> Result<Analytic> {
    make_product_spheres_chart(a, b, (Pole::North, Pole::North))
}

pub fn make_product_spheres_chart(a: f64, b: f64, poles: (Pole, Pole)) -> Result<Analytic> {
    positive("sphere radius a", a)?;
    positive("sphere radius b", b)?;
    Ok(Analytic::new(ProductSpheres { a, b, poles }))
}

/// A smooth conformal factor exponent `φ`, given by a formula over the
/// chart coordinates and (when the base has one) the ambient embedding.
#[derive(Clone)]
pub struct ConformalFactor {
    pub name: String,
    pub phi: ScalarFormula,
    /// Whether φ depends on the ambient embedding rather than chart coordinates.
    pub ambient: bool,
    /// Whether φ is invariant under rotations fixing `e_{n+1}`.
    pub zonal: bool,
}

impl fmt::Debug for ConformalFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl ConformalFactor {
    /// `exp(−|X − c|²/w²)` on the unit sphere, `c` a unit vector.
    pub fn sphere_bump(center: &[f64], width: f64) -> Result<Self> {
        positive("bump width", width)?;
        let norm = center.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidParameter("bump center must be nonzero".into()));
        }
        let c: Vec<f64> = center.iter().map(|v| v / norm).collect();
        let zonal = c[..c.len() - 1].iter().all(|&v| v == 0.0);
        let name = format!("sphere-bump(center={c:?}, width={width})");
        let k = 2.0 / (width * width);
        let phi: ScalarFormula = Arc::new(move |inp: &FieldInput| {
            let x = inp.ambient.expect("sphere bump needs an ambient embedding");
            // |X − c|² = 2 − 2 X·c on the unit sphere
            let dot = x
                .iter()
                .zip(&c)
                .fold(zero_like(&x[0]), |acc, (xi, &ci)| &acc + &xi.scale(ci));
            ((dot + (-1.0)).scale(k)).exp()
        });
        Ok(ConformalFactor {
            name,
            phi,
            ambient: true,
            zonal,
        })
    }

    /// The sphere bump centred at the north pole `e_{n+1}`; rotationally
    /// symmetric about that axis.
    pub fn zonal_bump(n: usize, width: f64) -> Result<Self> {
        let mut c = vec![0.0; n + 1];
        c[n] = 1.0;
        Self::sphere_bump(&c, width)
    }

    /// Periodic bump `exp((Σ cos(x_k − c_k) − n)/w²)` on the torus with
    /// periods `2π`.
    pub fn torus_bump(center: &[f64], width: f64) -> Result<Self> {
        positive("bump width", width)?;
        let c = center.to_vec();
        let name = format!("torus-bump(center={c:?}, width={width})");
        let k = 1.0 / (width * width);
        let phi: ScalarFormula = Arc::new(move |inp: &FieldInput| {
            let x = inp.coords;
            let s = x
                .iter()
                .zip(&c)
                .fold(zero_like(&x[0]), |acc, (xi, &ci)| &acc + &(xi + (-ci)).cos());
            ((s + (-(c.len() as f64))).scale(k)).exp()
        });
        Ok(ConformalFactor {
            name,
            phi,
            ambient: false,
            zonal: false,
        })
    }
}

/// `e^{2εφ} g_base`.
pub struct Conformal {
    base: Arc<dyn AnalyticMetric>,
    factor: ConformalFactor,
    eps: f64,
}

impl AnalyticMetric for Conformal {
    fn name(&self) -> String {
        format!(
            "conformal({}, {}, eps={})",
            self.base.name(),
            self.factor.name,
            self.eps
        )
    }
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn domain(&self) -> ChartDomain {
        self.base.domain()
    }
    fn sample_domain(&self) -> ChartDomain {
        self.base.sample_domain()
    }
    fn fd_scale(&self) -> f64 {
        self.base.fd_scale()
    }
    fn components(&self, x: &[Jet]) -> Sym2<Jet> {
        let g = self.base.components(x);
        let amb = self.base.ambient(x);
        let phi = (self.factor.phi)(&FieldInput {
            coords: x,
            ambient: amb.as_deref(),
        });
        let w = phi.scale(2.0 * self.eps).exp();
        g.map(|c| &w * c)
    }
    fn ambient(&self, x: &[Jet]) -> Option<Vec<Jet>> {
        self.base.ambient(x)
    }
    fn euler_characteristic(&self) -> Option<i64> {
        self.base.euler_characteristic()
    }
}

/// Conformal deformation with an explicit amplitude bound.
pub fn make_conformal(base: &Analytic, factor: ConformalFactor, eps: f64, eps_max: f64) -> Result<Analytic> {
    if !(eps.is_finite() && eps.abs() <= eps_max) {
        return Err(Error::InvalidParameter(format!(
            "conformal amplitude {eps} outside the positivity margin |eps| <= {eps_max}"
        )));
    }
    if factor.ambient
        && base
            .0
            .ambient(&crate::jets::coordinate_jets(&vec![0.0; base.0.dim()], 0))
            .is_none()
    {
        return Err(Error::InvalidParameter(format!(
            "{} needs a base with an ambient embedding",
            factor.name
        )));
    }
    Ok(Analytic(Arc::new(Conformal {
        base: base.0.clone(),
        factor,
        eps,
    })))
}

/// `c² g` for any metric field.
pub struct Scaled {
    inner: Arc<dyn MetricField>,
    c2: f64,
}

impl Scaled {
    pub fn new(inner: Arc<dyn MetricField>, c: f64) -> Result<Self> {
        positive("scale factor", c)?;
        Ok(Scaled { inner, c2: c * c })
    }
}

impl MetricField for Scaled {
    fn name(&self) -> String {
        format!("scaled({}, c2={})", self.inner.name(), self.c2)
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn domain(&self) -> ChartDomain {
        self.inner.domain()
    }
    fn sample_domain(&self) -> ChartDomain {
        self.inner.sample_domain()
    }
    fn fd_scale(&self) -> f64 {
        self.inner.fd_scale()
    }
    fn backend(&self) -> Backend {
        self.inner.backend()
    }
    fn jet(&self, point: &[f64], order: usize) -> CrateResult<MetricJet> {
        let j = self.inner.jet(point, order)?;
        MetricJet::new(j.point, j.g.scaled(self.c2))
    }
    fn metric_at(&self, point: &[f64]) -> CrateResult<Sym2> {
        Ok(self.inner.metric_at(point)?.scaled(self.c2))
    }
    fn ambient(&self, coords: &[Jet]) -> Option<Vec<Jet>> {
        self.inner.ambient(coords)
    }
    fn euler_characteristic(&self) -> Option<i64> {
        self.inner.euler_characteristic()
    }
}

/// Component evaluator of a [`Pointwise`] metric.
pub type MetricFn = Arc<dyn Fn(&[f64]) -> Result<Sym2> + Send + Sync>;

/// A metric known only through its values, such as a user-supplied
/// expression table. It has no jets of its own: wrap it in
/// [`FdField`](crate::jets::FdField) to differentiate it.
pub struct Pointwise {
    name: String,
    dim: usize,
    domain: ChartDomain,
    euler: Option<i64>,
    eval: MetricFn,
}

impl Pointwise {
    pub fn new(name: impl Into<String>, domain: ChartDomain, euler: Option<i64>, eval: MetricFn) -> Result<Self> {
        let dim = domain.dim();
        check_dim(dim)?;
        Ok(Pointwise {
            name: name.into(),
            dim,
            domain,
            euler,
            eval,
        })
    }
}

impl MetricField for Pointwise {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn domain(&self) -> ChartDomain {
        self.domain.clone()
    }
    fn backend(&self) -> Backend {
        Backend::Fd
    }
    fn jet(&self, point: &[f64], order: usize) -> CrateResult<MetricJet> {
        if order > 0 {
            return Err(Error::InsufficientOrder {
                what: "pointwise metric (use the FD backend)",
                needed: order,
                have: Some(0),
            });
        }
        let g = self.metric_at(point)?;
        MetricJet::new(point.to_vec(), g.map(|v| Jet::constant(self.dim, 0, *v)))
    }
    fn metric_at(&self, point: &[f64]) -> CrateResult<Sym2> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch(self.dim, point.len()));
        }
        let g = (self.eval)(point)?;
        if g.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("metric components"));
        }
        Ok(g)
    }
    fn euler_characteristic(&self) -> Option<i64> {
        self.euler
    }
}

/// Metric families addressable by name.
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    Flat { n: usize },
    Torus { n: usize },
    Sphere { n: usize, r: f64 },
    Hyperbolic { n: usize, cap: f64 },
    ProductSpheres { a: f64, b: f64 },
}

/// A built-in family, its chart, and an optional conformal deformation.
#[derive(Clone, Debug)]
pub struct Model {
    pub family: Family,
    pub sphere_chart: SphereChart,
    pub conformal: Option<(ConformalFactor, f64)>,
}

impl Model {
    pub fn new(family: Family) -> Self {
        Model {
            family,
            sphere_chart: SphereChart::Stereographic(Pole::North),
            conformal: None,
        }
    }

    pub fn with_chart(mut self, chart: SphereChart) -> Self {
        self.sphere_chart = chart;
        self
    }

    pub fn with_conformal(mut self, factor: ConformalFactor, eps: f64) -> Result<Self> {
        let max = self.eps_max();
        if !(eps.is_finite() && eps.abs() <= max) {
            return Err(Error::InvalidParameter(format!(
                "conformal amplitude {eps} outside the positivity margin |eps| <= {max}"
            )));
        }
        self.conformal = Some((factor, eps));
        self.field()?;
        Ok(self)
    }

    /// The family's default bump: a chart-coordinate bump on tori, flat
    /// space and the hyperbolic ball,
    /// an ambient bump centred at `center` (default `e_{n+1}`) otherwise.
    pub fn bump(&self, center: Option<&[f64]>, width: Option<f64>) -> Result<ConformalFactor> {
        match &self.family {
            Family::Flat { n } | Family::Torus { n } | Family::Hyperbolic { n, .. } => {
                let c = center.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; *n]);
                if c.len() != *n {
                    return Err(Error::DimensionMismatch(*n, c.len()));
                }
                ConformalFactor::torus_bump(&c, width.unwrap_or(TORUS_BUMP_WIDTH))
            }
            Family::Sphere { n, .. } => {
                let w = width.unwrap_or(SPHERE_BUMP_WIDTH);
                match center {
                    None => ConformalFactor::zonal_bump(*n, w),
                    Some(c) if c.len() == n + 1 => ConformalFactor::sphere_bump(c, w),
                    Some(c) => Err(Error::DimensionMismatch(n + 1, c.len())),
                }
            }
            Family::ProductSpheres { .. } => {
                let c = center
                    .map(<[f64]>::to_vec)
                    .unwrap_or_else(|| vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
                if c.len() != 6 {
                    return Err(Error::DimensionMismatch(6, c.len()));
                }
                ConformalFactor::sphere_bump(&c, width.unwrap_or(SPHERE_BUMP_WIDTH))
            }
        }
    }

    pub fn eps_max(&self) -> f64 {
        match self.family {
            Family::Sphere { .. } | Family::ProductSpheres { .. } => SPHERE_EPS_MAX,
            _ => TORUS_EPS_MAX,
        }
    }

    pub fn dim(&self) -> usize {
        match self.family {
            Family::Flat { n } | Family::Torus { n } | Family::Sphere { n, .. } | Family::Hyperbolic { n, .. } => n,
            Family::ProductSpheres { .. } => 4,
        }
    }

    /// Closed manifolds are covered by the quadrature module.
    pub fn is_closed(&self) -> bool {
        matches!(
            self.family,
            Family::Torus { .. } | Family::Sphere { .. } | Family::ProductSpheres { .. }
        )
    }

    /// Rotationally symmetric about `e_{n+1}` (spheres only).
    pub fn is_zonal(&self) -> bool {
        matches!(self.family, Family::Sphere { .. }) && self.conformal.as_ref().is_none_or(|(f, _)| f.zonal)
    }

    /// Einstein for every parameter choice (before any conformal deformation).
    pub fn is_einstein(&self) -> bool {
        let base = match self.family {
            Family::ProductSpheres { a, b } => a == b,
            _ => true,
        };
        base && self.conformal.as_ref().is_none_or(|(_, e)| *e == 0.0)
    }

    pub fn euler_characteristic(&self) -> Option<i64> {
        match self.family {
            Family::Torus { n: 4 } => Some(0),
            Family::Sphere { n: 4, .. } => Some(2),
            Family::ProductSpheres { .. } => Some(4),
            _ => None,
        }
    }

    fn wrap(&self, base: Analytic) -> Result<Analytic> {
        match &self.conformal {
            None => Ok(base),
            Some((f, eps)) => make_conformal(&base, f.clone(), *eps, self.eps_max()),
        }
    }

    /// The metric in its primary chart.
    pub fn field(&self) -> Result<Analytic> {
        match &self.family {
            Family::Sphere { n, r } => self.wrap(make_round_sphere(*n, *r, self.sphere_chart)?),
            Family::ProductSpheres { .. } => self.product_field((Pole::North, Pole::North)),
            other => self.wrap(match *other {
                Family::Flat { n } => make_flat(n)?,
                Family::Torus { n } => make_flat_torus(n, &vec![2.0 * PI; n])?,
                Family::Hyperbolic { n, cap } => make_hyperbolic(n, cap)?,
                _ => unreachable!(),
            }),
        }
    }

    /// A sphere model in the stereographic chart about `pole`.
    pub fn sphere_field(&self, pole: Pole) -> Result<Analytic> {
        match self.family {
            Family::Sphere { n, r } => self.wrap(make_round_sphere(n, r, SphereChart::Stereographic(pole))?),
            _ => Err(Error::Precondition(
                "stereographic charts exist only for sphere models".into(),
            )),
        }
    }

    /// A product-sphere model in the given pair of stereographic charts.
    pub fn product_field(&self, poles: (Pole, Pole)) -> Result<Analytic> {
        match self.family {
            Family::ProductSpheres { a, b } => self.wrap(make_product_spheres_chart(a, b, poles)?),
            _ => Err(Error::Precondition("not a product-sphere model".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::CurvatureBundle;
    use crate::jets::MetricField;
    use approx::assert_relative_eq;

    fn bundle(m: &Analytic, p: &[f64]) -> CurvatureBundle {
        CurvatureBundle::from_jet(&m.jet(p, 4).unwrap()).unwrap()
    }

    #[test]
    fn parameters_are_validated() {
        assert!(make_flat(2).is_err());
        assert!(make_round_sphere(4, -1.0, SphereChart::Spherical).is_err());
        assert!(make_hyperbolic(3, 1.0).is_err());
        assert!(make_product_spheres(1.0, 0.0).is_err());
        let s = make_round_sphere(4, 1.0, SphereChart::Stereographic(Pole::North)).unwrap();
        let f = ConformalFactor::zonal_bump(4, 1.0).unwrap();
        assert!(make_conformal(&s, f.clone(), 0.5, SPHERE_EPS_MAX).is_err());
        let t = make_flat_torus(4, &[2.0 * PI; 4]).unwrap();
        assert!(make_conformal(&t, f, 0.01, TORUS_EPS_MAX).is_err());
    }

    #[test]
    fn unit_sphere_values() {
        for chart in [SphereChart::Spherical, SphereChart::Stereographic(Pole::South)] {
            let s = make_round_sphere(4, 1.0, chart).unwrap();
            let b = bundle(&s, &[0.7, 1.1, 2.0, 0.4]);
            assert_relative_eq!(b.scalar, 12.0, max_relative = 1e-12);
            assert_relative_eq!(b.q, 6.0, max_relative = 1e-11);
            let j = b.j_tensor.minus(&b.metric.g.scaled(1.5)).max_abs();
            assert!(j < 1e-10, "{j}");
        }
        let s = make_round_sphere(6, 1.0, SphereChart::Spherical).unwrap();
        assert_relative_eq!(
            bundle(&s, &[0.9, 1.2, 0.8, 2.0, 1.0, 3.0]).q,
            24.0,
            max_relative = 1e-11
        );
        let s = make_round_sphere(4, 2.0, SphereChart::Stereographic(Pole::North)).unwrap();
        let b = bundle(&s, &[0.3, -0.2, 0.1, 0.5]);
        assert_relative_eq!(b.scalar, 3.0, max_relative = 1e-12);
        assert_relative_eq!(b.q, 6.0 / 16.0, max_relative = 1e-11);
    }

    #[test]
    fn hyperbolic_values() {
        let h = make_hyperbolic(3, 0.8).unwrap();
        let b = bundle(&h, &[0.2, -0.3, 0.1]);
        assert_relative_eq!(b.scalar, -6.0, max_relative = 1e-12);
        assert_relative_eq!(b.q, 15.0 / 8.0, max_relative = 1e-11);
        assert!(b.bach.max_abs() < 1e-10 && b.t_tensor.max_abs() < 1e-10 && b.j_traceless.max_abs() < 1e-10);
    }

    #[test]
    fn product_sphere_values() {
        let m = make_product_spheres(1.0, 1.0).unwrap();
        let b = bundle(&m, &[0.3, 0.1, -0.4, 0.2]);
        assert_relative_eq!(b.scalar, 4.0, max_relative = 1e-12);
        assert_relative_eq!(b.q, 2.0 / 3.0, max_relative = 1e-11);
        assert!(b.bach.max_abs() < 1e-10);
        assert!(b.j_tensor.minus(&b.metric.g.scaled(1.0 / 6.0)).max_abs() < 1e-10);
        assert_relative_eq!(b.weyl_norm_sq(), 16.0 / 3.0, max_relative = 1e-11);
        let m = make_product_spheres(1.0, 2.0).unwrap();
        assert!(bundle(&m, &[0.3, 0.1, -0.4, 0.2]).checks.trace_j_minus_q < 1e-9);
    }

    #[test]
    fn zero_amplitude_is_bit_identical() {
        let s = make_round_sphere(4, 1.0, SphereChart::Stereographic(Pole::North)).unwrap();
        let c = make_conformal(&s, ConformalFactor::zonal_bump(4, 1.0).unwrap(), 0.0, SPHERE_EPS_MAX).unwrap();
        let p = [0.3, -0.2, 0.1, 0.5];
        let (a, b) = (bundle(&s, &p), bundle(&c, &p));
        assert_eq!(a.riemann, b.riemann);
        assert_eq!(a.q.to_bits(), b.q.to_bits());
        assert_eq!(a.j_tensor, b.j_tensor);
    }

    #[test]
    fn ambient_maps_invert() {
        let y = [0.3, -0.7, 0.2];
        for pole in [Pole::North, Pole::South] {
            let x = stereo_to_ambient(&y, pole);
            assert_relative_eq!(x.iter().map(|v| v * v).sum::<f64>(), 1.0, epsilon = 1e-15);
            let (p, back) = ambient_to_stereo(&x);
            assert_eq!(p, pole);
            for (a, b) in back.iter().zip(y) {
                assert_relative_eq!(*a, b, epsilon = 1e-15);
            }
        }
    }
}
