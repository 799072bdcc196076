//! Metric and scalar jets at chart points, from analytic formulas (Taylor
//! arithmetic on coordinate jets) or from finite differences.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::taylor::{monomial, monomial_count, Jet, MAX_ORDER};
use crate::tensor::{MetricAtPoint, Sym2};

/// Default finite-difference steps by derivative order, for charts with
/// unit length scale. The Richardson level also samples at half the step,
/// and below these values roundoff dominates truncation.
pub fn default_fd_step(order: usize) -> f64 {
    match order {
        0..=2 => 2e-2,
        3 => 4e-2,
        4 => 5e-2,
        _ => 6e-2,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Analytic,
    Fd,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Analytic => f.write_str("analytic"),
            Backend::Fd => f.write_str("fd"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub periodic: bool,
}

/// Region of the chart where the metric formula is valid and well conditioned.
#[derive(Clone, Debug, PartialEq)]
pub enum ChartDomain {
    Box(Vec<Interval>),
    Ball {
        dim: usize,
        radius: f64,
    },
    /// Product of balls, one per coordinate block.
    Balls(Vec<(usize, f64)>),
}

impl ChartDomain {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            ChartDomain::Box(axes) => {
                axes.len() == x.len()
                    && axes
                        .iter()
                        .zip(x)
                        .all(|(a, &v)| a.periodic || (a.lo..=a.hi).contains(&v))
            }
            ChartDomain::Ball { dim, radius } => {
                x.len() == *dim && x.iter().map(|v| v * v).sum::<f64>() <= radius * radius
            }
            ChartDomain::Balls(blocks) => {
                let total: usize = blocks.iter().map(|b| b.0).sum();
                let mut rest = x;
                total == x.len()
                    && blocks.iter().all(|&(d, r)| {
                        let (head, tail) = rest.split_at(d);
                        rest = tail;
                        head.iter().map(|v| v * v).sum::<f64>() <= r * r
                    })
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ChartDomain::Box(axes) => axes.len(),
            ChartDomain::Ball { dim, .. } => *dim,
            ChartDomain::Balls(blocks) => blocks.iter().map(|b| b.0).sum(),
        }
    }

    /// Whether every axis is periodic (a closed torus chart).
    pub fn is_periodic(&self) -> bool {
        matches!(self, ChartDomain::Box(axes) if axes.iter().all(|a| a.periodic))
    }

    /// A deterministic interior sample for `u` in the unit cube.
    pub fn sample(&self, u: &[f64]) -> Vec<f64> {
        match self {
            ChartDomain::Box(axes) => axes.iter().zip(u).map(|(a, t)| a.lo + (a.hi - a.lo) * t).collect(),
            ChartDomain::Ball { radius, .. } => {
                // Map the cube into the inscribed cube of 0.9·radius.
                let half = 0.9 * radius / (u.len() as f64).sqrt();
                u.iter().map(|t| (2.0 * t - 1.0) * half).collect()
            }
            ChartDomain::Balls(blocks) => {
                let mut out = Vec::with_capacity(u.len());
                for &(d, r) in blocks {
                    let half = 0.9 * r / (d as f64).sqrt();
                    out.extend(u[out.len()..out.len() + d].iter().map(|t| (2.0 * t - 1.0) * half));
                }
                out
            }
        }
    }
}

/// Metric components and their partial derivatives up to `order` at a point.
#[derive(Clone, Debug)]
pub struct MetricJet {
    pub point: Vec<f64>,
    pub g: Sym2<Jet>,
}

impl MetricJet {
    pub fn new(point: Vec<f64>, g: Sym2<Jet>) -> Result<Self> {
        let jet = MetricJet { point, g };
        let at = jet.metric_at_point()?;
        if at.g.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("metric jet"));
        }
        Ok(jet)
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn order(&self) -> usize {
        self.g.data().iter().filter_map(|j| j.order()).min().unwrap_or(0)
    }

    /// `∂^α g` at the point.
    pub fn partial(&self, alpha: &[usize]) -> Result<Sym2> {
        self.g.try_map(|j| j.partial(alpha))
    }

    pub fn metric_at_point(&self) -> Result<MetricAtPoint> {
        MetricAtPoint::new(self.g.value()?).map_err(|_| Error::NotPositiveDefinite(self.point.clone()))
    }

    /// `g + t h` for a symmetric tensor field jet `h` at the same point.
    pub fn perturbed(&self, h: &Sym2<Jet>, t: f64) -> Result<Self> {
        let g = self.g.plus(&h.scaled(t));
        MetricJet::new(self.point.clone(), g)
    }
}

/// A scalar function's value and partials at a point.
#[derive(Clone, Debug)]
pub struct ScalarJet {
    pub point: Vec<f64>,
    pub f: Jet,
}

impl ScalarJet {
    pub fn constant(dim: usize, order: usize, value: f64) -> Self {
        ScalarJet {
            point: vec![0.0; dim],
            f: Jet::constant(dim, order, value),
        }
    }

    pub fn order(&self) -> Option<usize> {
        self.f.order()
    }
}

/// Inputs a field formula sees at a point: coordinate jets and, for charts
/// of embedded manifolds, the ambient coordinates as jets.
pub struct FieldInput<'a> {
    pub coords: &'a [Jet],
    pub ambient: Option<&'a [Jet]>,
}

/// Scalar field defined by a formula over [`FieldInput`].
pub type ScalarFormula = Arc<dyn Fn(&FieldInput) -> Jet + Send + Sync>;
/// Symmetric 2-tensor field defined by a formula over [`FieldInput`].
pub type Sym2Formula = Arc<dyn Fn(&FieldInput) -> Sym2<Jet> + Send + Sync>;

/// A metric on a coordinate chart.
pub trait MetricField: Send + Sync {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    fn domain(&self) -> ChartDomain;
    /// Where random test points are drawn: the part of the chart where the
    /// metric is well conditioned. Defaults to the whole domain.
    fn sample_domain(&self) -> ChartDomain {
        self.domain()
    }
    /// Length over which the metric varies, relative to the unit scale the
    /// default FD steps are tuned for (distance to the nearest singularity).
    fn fd_scale(&self) -> f64 {
        1.0
    }
    fn backend(&self) -> Backend;
    /// Jet of the metric at `point` to the requested order.
    fn jet(&self, point: &[f64], order: usize) -> Result<MetricJet>;
    /// Metric components only.
    fn metric_at(&self, point: &[f64]) -> Result<Sym2>;
    /// Ambient embedding coordinates as jets, when the chart has one.
    fn ambient(&self, _coords: &[Jet]) -> Option<Vec<Jet>> {
        None
    }
    /// Euler characteristic of the closed manifold this chart covers.
    fn euler_characteristic(&self) -> Option<i64> {
        None
    }

    /// Jet of a scalar formula at `point`.
    fn scalar_jet(&self, f: &ScalarFormula, point: &[f64], order: usize) -> Result<ScalarJet> {
        let coords = coordinate_jets(point, order);
        let ambient = self.ambient(&coords);
        let input = FieldInput {
            coords: &coords,
            ambient: ambient.as_deref(),
        };
        Ok(ScalarJet {
            point: point.to_vec(),
            f: f(&input),
        })
    }

    /// Jet of a symmetric tensor formula at `point`.
    fn sym2_jet(&self, h: &Sym2Formula, point: &[f64], order: usize) -> Result<Sym2<Jet>> {
        let coords = coordinate_jets(point, order);
        let ambient = self.ambient(&coords);
        let input = FieldInput {
            coords: &coords,
            ambient: ambient.as_deref(),
        };
        Ok(h(&input))
    }
}

pub fn coordinate_jets(point: &[f64], order: usize) -> Vec<Jet> {
    let n = point.len();
    (0..n).map(|i| Jet::variable(n, order, i, point[i])).collect()
}

/// Closed-form metric in terms of coordinate jets.
pub trait AnalyticMetric: Send + Sync {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    fn domain(&self) -> ChartDomain;
    fn sample_domain(&self) -> ChartDomain {
        self.domain()
    }
    fn fd_scale(&self) -> f64 {
        1.0
    }
    fn components(&self, coords: &[Jet]) -> Sym2<Jet>;
    fn ambient(&self, _coords: &[Jet]) -> Option<Vec<Jet>> {
        None
    }
    fn euler_characteristic(&self) -> Option<i64> {
        None
    }
}

/// Exact jets by Taylor arithmetic on the closed form.
#[derive(Clone)]
pub struct Analytic(pub Arc<dyn AnalyticMetric>);

impl Analytic {
    pub fn new(m: impl AnalyticMetric + 'static) -> Self {
        Analytic(Arc::new(m))
    }
}

fn check_domain(name: impl FnOnce() -> String, domain: &ChartDomain, point: &[f64]) -> Result<()> {
    if domain.contains(point) {
        Ok(())
    } else {
        Err(Error::OutsideDomain {
            metric: name(),
            point: point.to_vec(),
        })
    }
}

impl MetricField for Analytic {
    fn name(&self) -> String {
        self.0.name()
    }
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn domain(&self) -> ChartDomain {
        self.0.domain()
    }
    fn sample_domain(&self) -> ChartDomain {
        self.0.sample_domain()
    }
    fn fd_scale(&self) -> f64 {
        self.0.fd_scale()
    }
    fn backend(&self) -> Backend {
        Backend::Analytic
    }
    fn jet(&self, point: &[f64], order: usize) -> Result<MetricJet> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch(point.len(), self.dim()));
        }
        if order > MAX_ORDER {
            return Err(Error::InvalidParameter(format!("jet order {order} > {MAX_ORDER}")));
        }
        check_domain(|| self.name(), &self.domain(), point)?;
        let g = self.0.components(&coordinate_jets(point, order));
        MetricJet::new(point.to_vec(), g)
    }
    fn metric_at(&self, point: &[f64]) -> Result<Sym2> {
        self.0.components(&coordinate_jets(point, 0)).value()
    }
    fn ambient(&self, coords: &[Jet]) -> Option<Vec<Jet>> {
        self.0.ambient(coords)
    }
    fn euler_characteristic(&self) -> Option<i64> {
        self.0.euler_characteristic()
    }
}

/// Central finite-difference weights for the `deriv`-th derivative on the
/// integer offsets `-p..=p` (Fornberg's recursion).
pub fn fd_weights(deriv: usize, p: i32) -> Vec<f64> {
    let nodes: Vec<f64> = (-p..=p).map(|v| v as f64).collect();
    let m = nodes.len();
    let mut c = vec![vec![0.0; deriv + 1]; m];
    let mut c1 = 1.0;
    let mut c4 = nodes[0];
    c[0][0] = 1.0;
    for i in 1..m {
        let mn = i.min(deriv);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i];
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[deriv]).collect()
}

/// Half-width of the fourth-order accurate central stencil for `deriv`.
fn stencil_half_width(deriv: usize) -> i32 {
    if deriv == 0 {
        0
    } else {
        ((deriv - 1) / 2 + 2) as i32
    }
}

/// All partials up to `order` of a vector-valued function by tensor-product
/// central differences (fourth-order accurate per axis) with one Richardson
/// level (steps `h` and `h/2`). Values are sampled on the lattice `x + o·h/2`
/// and cached, so overlapping stencils share evaluations.
fn fd_partials(
    point: &[f64],
    order: usize,
    step: f64,
    width: usize,
    mut f: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<Vec<Vec<f64>>> {
    let n = point.len();
    let weights: Vec<Vec<f64>> = (0..=order).map(|d| fd_weights(d, stencil_half_width(d))).collect();
    let mut cache: HashMap<Vec<i32>, Vec<f64>> = HashMap::new();
    let mut sample = |offs: &[i32]| -> Result<Vec<f64>> {
        if let Some(v) = cache.get(offs) {
            return Ok(v.clone());
        }
        let x: Vec<f64> = point
            .iter()
            .zip(offs)
            .map(|(p, &o)| p + o as f64 * step * 0.5)
            .collect();
        let v = f(&x)?;
        if v.iter().any(|y| !y.is_finite()) {
            return Err(Error::NonFinite("finite-difference sample"));
        }
        cache.insert(offs.to_vec(), v.clone());
        Ok(v)
    };

    let count = monomial_count(n, order);
    let mut out = Vec::with_capacity(count);
    for idx in 0..count {
        let alpha = monomial(n, idx);
        let deg: usize = alpha.iter().sum();
        let mut estimate = |scale: i32| -> Result<Vec<f64>> {
            // scale = 2 for step h, 1 for step h/2 (lattice units of h/2)
            let h = step * 0.5 * scale as f64;
            let axes: Vec<usize> = (0..n).filter(|&i| alpha[i] > 0).collect();
            let mut acc = vec![0.0; width];
            let mut offs = vec![0i32; n];
            let spans: Vec<i32> = axes.iter().map(|&i| stencil_half_width(alpha[i])).collect();
            let mut counter: Vec<i32> = spans.iter().map(|s| -s).collect();
            loop {
                let mut w = 1.0;
                for (k, &ax) in axes.iter().enumerate() {
                    w *= weights[alpha[ax]][(counter[k] + spans[k]) as usize];
                    offs[ax] = counter[k] * scale;
                }
                if w != 0.0 {
                    let v = sample(&offs)?;
                    for (a, y) in acc.iter_mut().zip(&v) {
                        *a += w * y;
                    }
                }
                // advance the odometer
                let mut k = 0;
                loop {
                    if k == axes.len() {
                        let denom = h.powi(deg as i32);
                        return Ok(acc.into_iter().map(|a| a / denom).collect());
                    }
                    counter[k] += 1;
                    if counter[k] <= spans[k] {
                        break;
                    }
                    counter[k] = -spans[k];
                    k += 1;
                }
            }
        };
        if deg == 0 {
            out.push(estimate(2)?);
            continue;
        }
        let coarse = estimate(2)?;
        let fine = estimate(1)?;
        out.push(fine.iter().zip(&coarse).map(|(f, c)| (16.0 * f - c) / 15.0).collect());
    }
    Ok(out)
}

/// Metric jet from finite differences of a pointwise evaluator.
pub fn fd_metric_jet(
    metric_fn: impl Fn(&[f64]) -> Result<Sym2>,
    domain: Option<&ChartDomain>,
    point: &[f64],
    order: usize,
    step: f64,
) -> Result<MetricJet> {
    if order > MAX_ORDER {
        return Err(Error::InvalidParameter(format!("jet order {order} > {MAX_ORDER}")));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("finite-difference step {step}")));
    }
    let n = point.len();
    if let Some(dom) = domain {
        // The whole stencil hull must stay inside the chart.
        let reach = stencil_half_width(order) as f64 * step;
        for i in 0..n {
            for s in [-1.0, 1.0] {
                let mut x = point.to_vec();
                x[i] += s * reach;
                if !dom.contains(&x) {
                    return Err(Error::OutsideDomain {
                        metric: "finite-difference stencil".into(),
                        point: x,
                    });
                }
            }
        }
    }
    let partials = fd_partials(point, order, step, n * n, |x| Ok(metric_fn(x)?.data().to_vec()))?;
    let g = Sym2::from_fn(n, |i, j| {
        let comp: Vec<f64> = partials.iter().map(|p| 0.5 * (p[i * n + j] + p[j * n + i])).collect();
        Jet::from_partials(n, order, &comp)
    });
    MetricJet::new(point.to_vec(), g)
}

/// Scalar jet from finite differences.
pub fn fd_scalar_jet(f: impl Fn(&[f64]) -> Result<f64>, point: &[f64], order: usize, step: f64) -> Result<ScalarJet> {
    let n = point.len();
    let partials = fd_partials(point, order, step, 1, |x| Ok(vec![f(x)?]))?;
    let comp: Vec<f64> = partials.iter().map(|p| p[0]).collect();
    Ok(ScalarJet {
        point: point.to_vec(),
        f: Jet::from_partials(n, order, &comp),
    })
}

/// Analytic scalar jet of a formula in chart coordinates only.
pub fn scalar_jet(f: &ScalarFormula, point: &[f64], order: usize) -> ScalarJet {
    let coords = coordinate_jets(point, order);
    let input = FieldInput {
        coords: &coords,
        ambient: None,
    };
    ScalarJet {
        point: point.to_vec(),
        f: f(&input),
    }
}

/// Finite-difference backend wrapped around any pointwise metric evaluator.
#[derive(Clone)]
pub struct FdField {
    inner: Arc<dyn MetricField>,
    step: Option<f64>,
}

impl FdField {
    pub fn new(inner: Arc<dyn MetricField>, step: Option<f64>) -> Self {
        FdField { inner, step }
    }
}

impl MetricField for FdField {
    fn name(&self) -> String {
        format!("{} [fd]", self.inner.name())
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
        Backend::Fd
    }
    fn jet(&self, point: &[f64], order: usize) -> Result<MetricJet> {
        let step = self
            .step
            .unwrap_or_else(|| default_fd_step(order) * self.inner.fd_scale());
        let dom = self.inner.domain();
        // Periodic and ball charts extend smoothly past their nominal box.
        let guard = matches!(&dom, ChartDomain::Box(axes) if axes.iter().any(|a| !a.periodic));
        fd_metric_jet(|x| self.inner.metric_at(x), guard.then_some(&dom), point, order, step)
    }
    fn metric_at(&self, point: &[f64]) -> Result<Sym2> {
        self.inner.metric_at(point)
    }
    fn ambient(&self, coords: &[Jet]) -> Option<Vec<Jet>> {
        self.inner.ambient(coords)
    }
    fn euler_characteristic(&self) -> Option<i64> {
        self.inner.euler_characteristic()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fornberg_reproduces_textbook_stencils() {
        let w = fd_weights(2, 1);
        assert_eq!(w, vec![1.0, -2.0, 1.0]);
        let w = fd_weights(1, 2);
        let expect = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expect) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn constant_metric_has_vanishing_fd_partials() {
        let g = Sym2::diag(&[1.0, 2.0, 3.0]);
        let jet = fd_metric_jet(|_| Ok(g.clone()), None, &[0.1, 0.2, 0.3], 4, 2e-2).unwrap();
        for idx in 1..monomial_count(3, 4) {
            let alpha = monomial(3, idx);
            // roundoff amplified by h^-|α|
            assert!(jet.partial(&alpha).unwrap().max_abs() <= 1e-6);
        }
    }

    #[test]
    fn polynomial_metric_second_partial() {
        let f = |x: &[f64]| Ok(Sym2::identity(3).scaled(1.0 + x[0] * x[0]));
        let jet = fd_metric_jet(f, None, &[0.0, 0.0, 0.0], 2, 1e-2).unwrap();
        assert_relative_eq!(*jet.partial(&[2, 0, 0]).unwrap().get(0, 0), 2.0, epsilon = 1e-8);
    }

    #[test]
    fn scalar_jets_of_simple_functions() {
        let one: ScalarFormula = Arc::new(|inp: &FieldInput| &inp.coords[0] * 0.0 + 1.0);
        let j = scalar_jet(&one, &[0.3, 0.4], 4);
        assert_eq!(j.f.value().unwrap(), 1.0);
        assert!(j.f.partials()[1..].iter().all(|v| *v == 0.0));
        let xy: ScalarFormula = Arc::new(|inp: &FieldInput| &inp.coords[0] * &inp.coords[1]);
        let j = scalar_jet(&xy, &[0.3, 0.4], 4);
        assert_eq!(j.f.partial(&[1, 1]).unwrap(), 1.0);
        let fd = fd_scalar_jet(|x| Ok(x[0] * x[1]), &[0.3, 0.4], 2, 1e-2).unwrap();
        assert_relative_eq!(fd.f.partial(&[1, 1]).unwrap(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn stencil_leaving_domain_is_rejected() {
        let dom = ChartDomain::Box(vec![
            Interval {
                lo: 0.0,
                hi: 1.0,
                periodic: false,
            },
            Interval {
                lo: 0.0,
                hi: 1.0,
                periodic: false,
            },
        ]);
        let r = fd_metric_jet(|_| Ok(Sym2::identity(2)), Some(&dom), &[0.01, 0.5], 4, 2e-2);
        assert!(matches!(r, Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn non_finite_samples_are_rejected() {
        let r = fd_metric_jet(|x| Ok(Sym2::identity(2).scaled(1.0 / x[0])), None, &[0.0, 0.5], 1, 1e-2);
        assert!(r.is_err());
    }
}
