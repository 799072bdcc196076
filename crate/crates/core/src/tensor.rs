//! Dense tensors at a single point.
//!
//! Everything here is generic over [`Scalar`] so that the same index formulas
//! serve both plain numbers (`f64`) and Taylor jets, which is how the
//! curvature tower carries derivatives along. All storage is dense and
//! row-major; indices are always covariant unless a function says otherwise.

use crate::error::{Error, Result};
use crate::taylor::Jet;

/// Ring operations the tensor formulas need.
pub trait Scalar: Clone + std::fmt::Debug {
    fn plus(&self, other: &Self) -> Self;
    fn minus(&self, other: &Self) -> Self;
    fn times(&self, other: &Self) -> Self;
    fn scaled(&self, s: f64) -> Self;
    fn add_mul(&mut self, a: &Self, b: &Self);
    fn add_scaled(&mut self, a: &Self, s: f64);
}

impl Scalar for f64 {
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn minus(&self, other: &Self) -> Self {
        self - other
    }
    fn times(&self, other: &Self) -> Self {
        self * other
    }
    fn scaled(&self, s: f64) -> Self {
        self * s
    }
    fn add_mul(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    fn add_scaled(&mut self, a: &Self, s: f64) {
        *self += s * a;
    }
}

impl Scalar for Jet {
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn minus(&self, other: &Self) -> Self {
        self - other
    }
    fn times(&self, other: &Self) -> Self {
        self * other
    }
    fn scaled(&self, s: f64) -> Self {
        self.scale(s)
    }
    fn add_mul(&mut self, a: &Self, b: &Self) {
        Jet::add_mul(self, a, b);
    }
    fn add_scaled(&mut self, a: &Self, s: f64) {
        Jet::add_scaled(self, a, s);
    }
}

/// Sum of `a[k] * b[k]` seeded with the first product (no zero element needed).
fn dot<S: Scalar>(pairs: impl IntoIterator<Item = (S, S)>) -> S {
    let mut it = pairs.into_iter();
    let (a0, b0) = it.next().expect("empty contraction");
    let mut acc = a0.times(&b0);
    for (a, b) in it {
        acc.add_mul(&a, &b);
    }
    acc
}

fn sum<S: Scalar>(items: impl IntoIterator<Item = S>) -> S {
    let mut it = items.into_iter();
    let mut acc = it.next().expect("empty sum");
    for x in it {
        acc.add_scaled(&x, 1.0);
    }
    acc
}

/// Dense tensor of arbitrary rank with all indices ranging over `0..dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<S = f64> {
    dim: usize,
    rank: usize,
    data: Vec<S>,
}

/// Rank-3 tensor (e.g. the Cotton tensor, antisymmetric in its first pair).
pub type Tensor3<S = f64> = Tensor<S>;
/// Rank-4 tensor (Riemann, Weyl, Kulkarni–Nomizu products).
pub type Tensor4<S = f64> = Tensor<S>;

impl<S: Scalar> Tensor<S> {
    pub fn from_fn(dim: usize, rank: usize, mut f: impl FnMut(&[usize]) -> S) -> Self {
        let len = dim.pow(rank as u32);
        let mut idx = vec![0usize; rank];
        let mut data = Vec::with_capacity(len);
        for flat in 0..len {
            let mut r = flat;
            for slot in (0..rank).rev() {
                idx[slot] = r % dim;
                r /= dim;
            }
            data.push(f(&idx));
        }
        Tensor { dim, rank, data }
    }

    pub fn from_vec(dim: usize, rank: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), dim.pow(rank as u32), "tensor data length");
        Tensor { dim, rank, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn get(&self, idx: &[usize]) -> &S {
        &self.data[self.offset(idx)]
    }

    pub fn map<T: Scalar>(&self, f: impl FnMut(&S) -> T) -> Tensor<T> {
        Tensor {
            dim: self.dim,
            rank: self.rank,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn try_map<T: Scalar>(&self, f: impl FnMut(&S) -> Result<T>) -> Result<Tensor<T>> {
        Ok(Tensor {
            dim: self.dim,
            rank: self.rank,
            data: self.data.iter().map(f).collect::<Result<_>>()?,
        })
    }

    pub fn plus(&self, other: &Self) -> Self {
        Tensor {
            dim: self.dim,
            rank: self.rank,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a.plus(b)).collect(),
        }
    }

    pub fn minus(&self, other: &Self) -> Self {
        Tensor {
            dim: self.dim,
            rank: self.rank,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a.minus(b)).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|a| a.scaled(s))
    }

    /// Raise slot `slot` with `g_inv`. The single routine every raised-index
    /// contraction goes through.
    pub fn raise(&self, g_inv: &Sym2<S>, slot: usize) -> Result<Self> {
        check_dims(self.dim, g_inv.dim())?;
        let n = self.dim;
        let mut src = vec![0usize; self.rank];
        Ok(Tensor::from_fn(n, self.rank, |idx| {
            src.copy_from_slice(idx);
            dot((0..n).map(|m| {
                src[slot] = m;
                (g_inv.get(idx[slot], m).clone(), self.get(&src).clone())
            }))
        }))
    }

    /// Fully contravariant components.
    pub fn raise_all(&self, g_inv: &Sym2<S>) -> Result<Self> {
        (0..self.rank).try_fold(self.clone(), |t, slot| t.raise(g_inv, slot))
    }

    /// Metric contraction of two slots, lowering the rank by two.
    pub fn trace_pair(&self, g_inv: &Sym2<S>, a: usize, b: usize) -> Result<Self> {
        check_dims(self.dim, g_inv.dim())?;
        assert!(a < b && b < self.rank);
        let n = self.dim;
        let raised = self.raise(g_inv, a)?;
        let mut src = vec![0usize; self.rank];
        Ok(Tensor::from_fn(n, self.rank - 2, |idx| {
            let mut k = 0;
            for (slot, s) in src.iter_mut().enumerate() {
                if slot != a && slot != b {
                    *s = idx[k];
                    k += 1;
                }
            }
            sum((0..n).map(|m| {
                src[a] = m;
                src[b] = m;
                raised.get(&src).clone()
            }))
        }))
    }

    /// Full contraction `T_{a…} T^{a…}`.
    pub fn norm_sq(&self, g_inv: &Sym2<S>) -> Result<S> {
        let up = self.raise_all(g_inv)?;
        Ok(dot(self.data.iter().cloned().zip(up.data)))
    }
}

impl<S: Scalar> Tensor<S> {
    /// Permute slots: result index `idx` reads `self` at `idx` reordered so
    /// that `out[perm[k]] = idx[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut src = vec![0usize; self.rank];
        Tensor::from_fn(self.dim, self.rank, |idx| {
            for (k, &p) in perm.iter().enumerate() {
                src[p] = idx[k];
            }
            self.get(&src).clone()
        })
    }
}

impl Tensor<f64> {
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Symmetric 2-tensor stored as a full `n×n` matrix that is symmetric by
/// construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Sym2<S = f64> {
    dim: usize,
    data: Vec<S>,
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(a, b))
    }
}

impl<S: Scalar> Sym2<S> {
    /// Build from the upper triangle; `f` is only called with `i <= j`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut upper: Vec<Option<S>> = vec![None; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                upper[i * dim + j] = Some(f(i, j));
            }
        }
        let data = (0..dim * dim)
            .map(|k| {
                let (i, j) = (k / dim, k % dim);
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                upper[a * dim + b].clone().expect("upper triangle")
            })
            .collect();
        Sym2 { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &S {
        &self.data[i * self.dim + j]
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn as_tensor(&self) -> Tensor<S> {
        Tensor::from_vec(self.dim, 2, self.data.clone())
    }

    pub fn map<T: Scalar>(&self, f: impl FnMut(&S) -> T) -> Sym2<T> {
        Sym2 {
            dim: self.dim,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn try_map<T: Scalar>(&self, f: impl FnMut(&S) -> Result<T>) -> Result<Sym2<T>> {
        Ok(Sym2 {
            dim: self.dim,
            data: self.data.iter().map(f).collect::<Result<_>>()?,
        })
    }

    pub fn plus(&self, other: &Self) -> Self {
        Sym2 {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a.plus(b)).collect(),
        }
    }

    pub fn minus(&self, other: &Self) -> Self {
        Sym2 {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a.minus(b)).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|a| a.scaled(s))
    }

    /// `self * s` where `s` is a scalar of the same kind.
    pub fn times(&self, s: &S) -> Self {
        self.map(|a| a.times(s))
    }

    /// Symmetric part of a rank-2 tensor.
    pub fn symmetrize(t: &Tensor<S>) -> Self {
        assert_eq!(t.rank(), 2);
        Sym2::from_fn(t.dim(), |i, j| t.get(&[i, j]).plus(t.get(&[j, i])).scaled(0.5))
    }

    /// Add a linear combination `Σ cₖ · termₖ` in one pass.
    pub fn combine(terms: &[(f64, &Sym2<S>)]) -> Self {
        let (c0, first) = terms[0];
        let mut out = first.scaled(c0);
        for (c, t) in &terms[1..] {
            for (o, v) in out.data.iter_mut().zip(&t.data) {
                o.add_scaled(v, *c);
            }
        }
        out
    }
}

impl Sym2<f64> {
    /// Symmetrize `components` and reject inputs whose antisymmetric part
    /// exceeds `1e-10` relative to the largest entry.
    pub fn new(dim: usize, components: &[f64]) -> Result<Self> {
        if components.len() != dim * dim {
            return Err(Error::DimensionMismatch(components.len(), dim * dim));
        }
        if components.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Sym2 components"));
        }
        let scale = components.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut residual = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                residual = residual.max((components[i * dim + j] - components[j * dim + i]).abs());
            }
        }
        let rel = if scale > 0.0 { residual / scale } else { 0.0 };
        if rel > 1e-10 {
            return Err(Error::NotSymmetric {
                what: "Sym2::new",
                residual: rel,
            });
        }
        Ok(Sym2::from_fn(dim, |i, j| {
            0.5 * (components[i * dim + j] + components[j * dim + i])
        }))
    }

    pub fn identity(dim: usize) -> Self {
        Sym2::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn zeros(dim: usize) -> Self {
        Sym2::from_fn(dim, |_, _| 0.0)
    }

    pub fn diag(values: &[f64]) -> Self {
        Sym2::from_fn(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    /// Eigenvalues of `self` relative to the metric `g` (roots of
    /// `det(self − λ g) = 0`), ascending.
    pub fn eigenvalues_relative_to(&self, metric: &MetricAtPoint) -> Result<Vec<f64>> {
        check_dims(self.dim, metric.dim())?;
        let chol = nalgebra::Cholesky::new(metric.g.to_nalgebra()).ok_or_else(|| Error::NotPositiveDefinite(vec![]))?;
        let l_inv = chol
            .l()
            .try_inverse()
            .ok_or_else(|| Error::NotPositiveDefinite(vec![]))?;
        let a = &l_inv * self.to_nalgebra() * l_inv.transpose();
        let a = (&a + a.transpose()) * 0.5;
        let mut ev: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|x, y| x.total_cmp(y));
        Ok(ev)
    }
}

impl Sym2<Jet> {
    pub fn value(&self) -> Result<Sym2<f64>> {
        self.try_map(|j| j.value())
    }
}

impl Tensor<Jet> {
    pub fn value(&self) -> Result<Tensor<f64>> {
        self.try_map(|j| j.value())
    }
}

/// Metric at a point together with its inverse and volume density.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricAtPoint {
    pub g: Sym2,
    pub g_inv: Sym2,
    pub sqrt_det: f64,
}

impl MetricAtPoint {
    pub fn new(g: Sym2) -> Result<Self> {
        let m = g.to_nalgebra();
        let chol = nalgebra::Cholesky::new(m.clone()).ok_or_else(|| Error::NotPositiveDefinite(vec![]))?;
        let det: f64 = chol.l().diagonal().iter().map(|d| d * d).product();
        let inv = chol.inverse();
        let n = g.dim();
        let g_inv = Sym2::from_fn(n, |i, j| 0.5 * (inv[(i, j)] + inv[(j, i)]));
        Ok(MetricAtPoint {
            g,
            g_inv,
            sqrt_det: det.sqrt(),
        })
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }
}

/// `(α⧖β)_{ijkl} = α_{il}β_{jk} + α_{jk}β_{il} − α_{ik}β_{jl} − α_{jl}β_{ik}`.
pub fn kulkarni_nomizu<S: Scalar>(alpha: &Sym2<S>, beta: &Sym2<S>) -> Result<Tensor4<S>> {
    check_dims(alpha.dim(), beta.dim())?;
    Ok(Tensor::from_fn(alpha.dim(), 4, |x| {
        let (i, j, k, l) = (x[0], x[1], x[2], x[3]);
        let mut v = alpha.get(i, l).times(beta.get(j, k));
        v.add_mul(alpha.get(j, k), beta.get(i, l));
        v.add_mul(&alpha.get(i, k).scaled(-1.0), beta.get(j, l));
        v.add_mul(&alpha.get(j, l).scaled(-1.0), beta.get(i, k));
        v
    }))
}

/// `tr_g h = g^{jk} h_{jk}`.
pub fn trace<S: Scalar>(g_inv: &Sym2<S>, h: &Sym2<S>) -> Result<S> {
    check_dims(g_inv.dim(), h.dim())?;
    Ok(dot(g_inv.data.iter().cloned().zip(h.data.iter().cloned())))
}

/// Mixed components `a_j^i = g^{im} a_{jm}` as a general matrix (row `j`, column `i`).
fn mixed<S: Scalar>(g_inv: &Sym2<S>, a: &Sym2<S>) -> Result<Tensor<S>> {
    a.as_tensor().raise(g_inv, 1)
}

/// Symmetrized `(a×b)_{jk} = a_j^i b_{ik}`.
pub fn product<S: Scalar>(g_inv: &Sym2<S>, a: &Sym2<S>, b: &Sym2<S>) -> Result<Sym2<S>> {
    check_dims(g_inv.dim(), a.dim())?;
    check_dims(a.dim(), b.dim())?;
    let n = a.dim();
    let am = mixed(g_inv, a)?;
    let bm = mixed(g_inv, b)?;
    Ok(Sym2::from_fn(n, |j, k| {
        let ab = dot((0..n).map(|i| (am.get(&[j, i]).clone(), b.get(i, k).clone())));
        let ba = dot((0..n).map(|i| (bm.get(&[j, i]).clone(), a.get(i, k).clone())));
        ab.plus(&ba).scaled(0.5)
    }))
}

/// `|h|²_g = g^{ia} g^{jb} h_{ij} h_{ab}`.
pub fn norm_sq<S: Scalar>(g_inv: &Sym2<S>, h: &Sym2<S>) -> Result<S> {
    check_dims(g_inv.dim(), h.dim())?;
    h.as_tensor().norm_sq(g_inv)
}

/// `|T|²_g` for a rank-4 tensor.
pub fn norm_sq_4<S: Scalar>(g_inv: &Sym2<S>, t: &Tensor4<S>) -> Result<S> {
    check_dims(g_inv.dim(), t.dim())?;
    t.norm_sq(g_inv)
}

/// `h − (tr_g h / n) g`.
pub fn traceless_part<S: Scalar>(g: &Sym2<S>, g_inv: &Sym2<S>, h: &Sym2<S>) -> Result<Sym2<S>> {
    check_dims(g.dim(), h.dim())?;
    let n = h.dim() as f64;
    let tr = trace(g_inv, h)?.scaled(1.0 / n);
    Ok(h.minus(&g.times(&tr)))
}

/// `(R̊m·h)_{jk} = R_{ijkl} h^{il}`.
pub fn rm_dot<S: Scalar>(rm: &Tensor4<S>, g_inv: &Sym2<S>, h: &Sym2<S>) -> Result<Sym2<S>> {
    check_dims(rm.dim(), h.dim())?;
    let n = h.dim();
    let h_up = h.as_tensor().raise_all(g_inv)?;
    Ok(Sym2::from_fn(n, |j, k| {
        dot((0..n * n).map(|p| {
            let (i, l) = (p / n, p % n);
            (rm.get(&[i, j, k, l]).clone(), h_up.get(&[i, l]).clone())
        }))
    }))
}

/// `⟨a, b⟩_g = a_{ij} b^{ij}`.
pub fn inner<S: Scalar>(g_inv: &Sym2<S>, a: &Sym2<S>, b: &Sym2<S>) -> Result<S> {
    check_dims(a.dim(), b.dim())?;
    let b_up = b.as_tensor().raise_all(g_inv)?;
    Ok(dot(a.data.iter().cloned().zip(b_up.data)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn delta(n: usize) -> Sym2 {
        Sym2::identity(n)
    }

    #[test]
    fn kn_of_zero_is_zero() {
        let z = Sym2::zeros(3);
        assert_eq!(kulkarni_nomizu(&z, &z).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn kn_identity_component() {
        let d = delta(3);
        let t = kulkarni_nomizu(&d, &d).unwrap();
        // 2(δ_il δ_jk − δ_ik δ_jl) at (1,2,2,1)
        assert_eq!(*t.get(&[0, 1, 1, 0]), 2.0);
        assert_eq!(*t.get(&[0, 1, 0, 1]), -2.0);
        assert_eq!(*t.get(&[0, 0, 1, 1]), 0.0);
    }

    #[test]
    fn kn_mismatch_is_error() {
        assert!(matches!(
            kulkarni_nomizu(&delta(3), &delta(4)),
            Err(Error::DimensionMismatch(3, 4))
        ));
    }

    #[test]
    fn trace_examples() {
        assert_eq!(trace(&delta(4), &delta(4)).unwrap(), 4.0);
        assert_eq!(trace(&delta(3), &Sym2::diag(&[1.0, 2.0, 3.0])).unwrap(), 6.0);
        assert!(trace(&delta(3), &delta(2)).is_err());
    }

    #[test]
    fn product_examples() {
        let d = delta(2);
        let p = product(&d, &Sym2::diag(&[1.0, 2.0]), &Sym2::diag(&[3.0, 4.0])).unwrap();
        assert_eq!(p, Sym2::diag(&[3.0, 8.0]));
        let z = product(&delta(3), &Sym2::zeros(3), &Sym2::diag(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        // S = g/2 with g = 2δ: S×S = g/4
        let g = Sym2::diag(&[2.0, 2.0, 2.0]);
        let gi = Sym2::diag(&[0.5, 0.5, 0.5]);
        let s = g.scaled(0.5);
        let ss = product(&gi, &s, &s).unwrap();
        for (a, b) in ss.data().iter().zip(g.scaled(0.25).data()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-15);
        }
    }

    #[test]
    fn traceless_examples() {
        let m = MetricAtPoint::new(delta(4)).unwrap();
        let t = traceless_part(&m.g, &m.g_inv, &m.g).unwrap();
        assert_eq!(t.max_abs(), 0.0);
        let t = traceless_part(&m.g, &m.g_inv, &Sym2::diag(&[2.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(t, Sym2::diag(&[1.5, -0.5, -0.5, -0.5]));
    }

    #[test]
    fn norm_of_zero_and_metric() {
        let m = MetricAtPoint::new(Sym2::diag(&[1.0, 4.0, 9.0, 0.25])).unwrap();
        assert_eq!(norm_sq(&m.g_inv, &Sym2::zeros(4)).unwrap(), 0.0);
        assert_relative_eq!(norm_sq(&m.g_inv, &m.g).unwrap(), 4.0, epsilon = 1e-14);
    }

    #[test]
    fn asymmetric_input_rejected() {
        assert!(Sym2::new(2, &[1.0, 0.5, 0.4, 1.0]).is_err());
        let s = Sym2::new(2, &[1.0, 0.5, 0.5 + 1e-14, 1.0]).unwrap();
        assert_eq!(s.get(0, 1), s.get(1, 0));
    }

    #[test]
    fn metric_inverse_and_density() {
        let g = Sym2::new(3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 3.0]).unwrap();
        let m = MetricAtPoint::new(g.clone()).unwrap();
        let prod = g.to_nalgebra() * m.g_inv.to_nalgebra();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(prod[(i, j)], if i == j { 1.0 } else { 0.0 }, epsilon = 1e-13);
            }
        }
        assert_relative_eq!(m.sqrt_det, g.to_nalgebra().determinant().sqrt(), max_relative = 1e-14);
        assert!(MetricAtPoint::new(Sym2::diag(&[1.0, -1.0, 1.0])).is_err());
    }

    fn sym_strategy(n: usize) -> impl Strategy<Value = Sym2> {
        prop::collection::vec(-2.0f64..2.0, n * n).prop_map(move |v| Sym2::from_fn(n, |i, j| v[i * n + j]))
    }

    fn metric_strategy(n: usize) -> impl Strategy<Value = MetricAtPoint> {
        prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
            let a = nalgebra::DMatrix::from_row_slice(n, n, &v);
            let spd = &a * a.transpose() + nalgebra::DMatrix::identity(n, n) * 0.5;
            let g = Sym2::from_fn(n, |i, j| spd[(i, j)]);
            MetricAtPoint::new(g).unwrap()
        })
    }

    proptest! {
        #[test]
        fn kn_has_riemann_symmetries(a in sym_strategy(4), b in sym_strategy(4)) {
            let t = kulkarni_nomizu(&a, &b).unwrap();
            for i in 0..4 { for j in 0..4 { for k in 0..4 { for l in 0..4 {
                let v = *t.get(&[i, j, k, l]);
                let tol = 1e-12 * (1.0 + t.max_abs());
                prop_assert!((v + t.get(&[j, i, k, l])).abs() <= tol);
                prop_assert!((v + t.get(&[i, j, l, k])).abs() <= tol);
                prop_assert!((v - t.get(&[k, l, i, j])).abs() <= tol);
                let bianchi = v + t.get(&[j, k, i, l]) + t.get(&[k, i, j, l]);
                prop_assert!(bianchi.abs() <= 1e-12 * (1.0 + t.max_abs()));
            }}}}
        }

        #[test]
        fn traceless_part_is_traceless(m in metric_strategy(5), h in sym_strategy(5)) {
            let t = traceless_part(&m.g, &m.g_inv, &h).unwrap();
            let scale = norm_sq(&m.g_inv, &h).unwrap().sqrt() + 1.0;
            prop_assert!(trace(&m.g_inv, &t).unwrap().abs() <= 1e-13 * scale * 10.0);
        }

        #[test]
        fn norm_is_nonnegative(m in metric_strategy(4), h in sym_strategy(4)) {
            let v = norm_sq(&m.g_inv, &h).unwrap();
            prop_assert!(v >= 0.0);
            if h.max_abs() > 1e-6 { prop_assert!(v > 0.0); }
        }

        #[test]
        fn product_commutes_for_commuting_pair(m in metric_strategy(4), s in sym_strategy(4)) {
            let ss = product(&m.g_inv, &s, &s).unwrap();
            let a = product(&m.g_inv, &s, &ss).unwrap();
            let b = product(&m.g_inv, &ss, &s).unwrap();
            let scale = a.max_abs().max(1.0);
            for (x, y) in a.data().iter().zip(b.data()) {
                prop_assert!((x - y).abs() <= 1e-12 * scale);
            }
        }
    }
}
