//! Truncated multivariate Taylor polynomials ("jets").
//!
//! A [`Jet`] of order `K` in `n` variables stores the Taylor coefficients
//! `c_α = ∂^α f(x₀) / α!` for every multi-index with `|α| ≤ K`, in graded
//! lexicographic order. Because the ordering is graded, the coefficients of a
//! lower-order truncation are a prefix of the coefficient vector, and the
//! products needed at order `k` are a prefix of the shared pair table.
//!
//! Arithmetic truncates to the smaller operand order; differentiation lowers
//! the order by one. A jet whose order dropped below zero is *exhausted*: it
//! carries no coefficients and asking for its value is an error. This is how
//! the curvature code enforces its jet-order requirements without a separate
//! bookkeeping pass.

use std::collections::HashMap;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Largest supported jet order.
pub const MAX_ORDER: usize = 5;
/// Largest supported chart dimension.
pub const MAX_DIM: usize = 8;

const NONE: u16 = u16::MAX;

pub(crate) struct Table {
    exps: Vec<[u8; MAX_DIM]>,
    count_upto: [usize; MAX_ORDER + 1],
    pairs: Vec<(u16, u16, u16)>,
    pairs_upto: [usize; MAX_ORDER + 1],
    /// `shift[i][β]` is the index of `β + e_i`, or `NONE` past `MAX_ORDER`.
    shift: Vec<Vec<u16>>,
    factorial: Vec<f64>,
}

impl Table {
    fn build(n: usize) -> Self {
        let mut exps: Vec<[u8; MAX_DIM]> = Vec::new();
        let mut count_upto = [0usize; MAX_ORDER + 1];
        for deg in 0..=MAX_ORDER {
            let mut cur = [0u8; MAX_DIM];
            push_degree(n, deg, 0, &mut cur, &mut exps);
            count_upto[deg] = exps.len();
        }
        let lookup: HashMap<[u8; MAX_DIM], usize> = exps.iter().enumerate().map(|(i, e)| (*e, i)).collect();
        let index_of = |e: &[u8; MAX_DIM]| lookup.get(e).copied();

        let degree = |e: &[u8; MAX_DIM]| e.iter().map(|&v| v as usize).sum::<usize>();
        let mut pairs = Vec::new();
        let mut pairs_upto = [0usize; MAX_ORDER + 1];
        for deg in 0..=MAX_ORDER {
            for (ci, ce) in exps.iter().enumerate() {
                if degree(ce) != deg {
                    continue;
                }
                for (ai, ae) in exps.iter().enumerate().take(count_upto[deg]) {
                    if (0..n).all(|k| ae[k] <= ce[k]) {
                        let mut be = [0u8; MAX_DIM];
                        for k in 0..n {
                            be[k] = ce[k] - ae[k];
                        }
                        let bi = index_of(&be).expect("complement monomial");
                        pairs.push((ai as u16, bi as u16, ci as u16));
                    }
                }
            }
            pairs_upto[deg] = pairs.len();
        }

        let mut shift = vec![vec![NONE; exps.len()]; n];
        for (i, row) in shift.iter_mut().enumerate() {
            for (bi, be) in exps.iter().enumerate() {
                if degree(be) < MAX_ORDER {
                    let mut e = *be;
                    e[i] += 1;
                    row[bi] = index_of(&e).expect("shifted monomial") as u16;
                }
            }
        }
        let factorial = exps
            .iter()
            .map(|e| e.iter().map(|&k| fact(k as usize)).product())
            .collect();
        Table {
            exps,
            count_upto,
            pairs,
            pairs_upto,
            shift,
            factorial,
        }
    }
}

fn push_degree(n: usize, remaining: usize, var: usize, cur: &mut [u8; MAX_DIM], out: &mut Vec<[u8; MAX_DIM]>) {
    if var + 1 == n {
        cur[var] = remaining as u8;
        out.push(*cur);
        cur[var] = 0;
        return;
    }
    for k in (0..=remaining).rev() {
        cur[var] = k as u8;
        push_degree(n, remaining - k, var + 1, cur, out);
    }
    cur[var] = 0;
}

fn fact(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

pub(crate) fn table(n: usize) -> &'static Table {
    static TABLES: [OnceLock<Table>; MAX_DIM + 1] = [const { OnceLock::new() }; MAX_DIM + 1];
    assert!((1..=MAX_DIM).contains(&n), "jet dimension {n} out of range");
    TABLES[n].get_or_init(|| Table::build(n))
}

/// Number of monomials of degree ≤ `order` in `n` variables.
pub fn monomial_count(n: usize, order: usize) -> usize {
    table(n).count_upto[order]
}

/// Exponent vector of the monomial at position `idx` (graded lex order).
pub fn monomial(n: usize, idx: usize) -> Vec<usize> {
    table(n).exps[idx][..n].iter().map(|&v| v as usize).collect()
}

/// Position of a multi-index in graded lex order.
pub fn monomial_index(alpha: &[usize]) -> Option<usize> {
    let n = alpha.len();
    if alpha.iter().sum::<usize>() > MAX_ORDER {
        return None;
    }
    let mut e = [0u8; MAX_DIM];
    for (k, &a) in alpha.iter().enumerate() {
        e[k] = a as u8;
    }
    table(n).exps.iter().position(|x| *x == e)
}

/// Inverse of a `k×k` matrix of jets (row-major, common order), given the
/// inverse of its constant term. Solves `X·M = I` degree by degree.
pub fn matrix_inverse(m: &[Jet], k: usize, inv0: &[f64]) -> Vec<Jet> {
    assert_eq!(m.len(), k * k);
    let order = m.iter().map(|j| j.order).min().unwrap_or(-1);
    let dim = m[0].dim;
    if order < 0 {
        return vec![Jet::exhausted(dim); k * k];
    }
    let t = table(dim as usize);
    let count = t.count_upto[order as usize];
    let k2 = k * k;
    let mut gs = vec![0.0; count * k2];
    for (e, jet) in m.iter().enumerate() {
        for (b, &v) in jet.c[..count].iter().enumerate() {
            gs[b * k2 + e] = v;
        }
    }
    let mut xs = vec![0.0; count * k2];
    xs[..k2].copy_from_slice(inv0);
    let mut r = vec![0.0; count * k2];
    for deg in 1..=order as usize {
        for &(a, b, c) in &t.pairs[t.pairs_upto[deg - 1]..t.pairs_upto[deg]] {
            if b == 0 {
                continue;
            }
            let (a, b, c) = (a as usize * k2, b as usize * k2, c as usize * k2);
            for i in 0..k {
                for l in 0..k {
                    let x = xs[a + i * k + l];
                    if x == 0.0 {
                        continue;
                    }
                    for j in 0..k {
                        r[c + i * k + j] += x * gs[b + l * k + j];
                    }
                }
            }
        }
        for c in t.count_upto[deg - 1]..t.count_upto[deg] {
            for i in 0..k {
                for j in 0..k {
                    let mut acc = 0.0;
                    for l in 0..k {
                        acc -= r[c * k2 + i * k + l] * inv0[l * k + j];
                    }
                    xs[c * k2 + i * k + j] = acc;
                }
            }
        }
    }
    (0..k2)
        .map(|e| Jet {
            dim,
            order,
            c: (0..count).map(|c| xs[c * k2 + e]).collect(),
        })
        .collect()
}

/// Truncated Taylor polynomial of a scalar function around a chart point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    dim: u8,
    order: i8,
    c: Vec<f64>,
}

impl Jet {
    pub fn constant(dim: usize, order: usize, value: f64) -> Self {
        let mut j = Self::zero(dim, order);
        j.c[0] = value;
        j
    }

    pub fn zero(dim: usize, order: usize) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        Jet {
            dim: dim as u8,
            order: order as i8,
            c: vec![0.0; monomial_count(dim, order)],
        }
    }

    /// The coordinate function `x_i` expanded around `x_i = at`.
    pub fn variable(dim: usize, order: usize, i: usize, at: f64) -> Self {
        let mut j = Self::constant(dim, order, at);
        if order >= 1 {
            // Degree-one monomials follow the constant term in variable order.
            j.c[1 + i] = 1.0;
        }
        j
    }

    /// Build from partial derivatives `∂^α f` listed in graded lex order.
    pub fn from_partials(dim: usize, order: usize, partials: &[f64]) -> Self {
        let t = table(dim);
        let m = t.count_upto[order];
        assert_eq!(partials.len(), m, "partials table length");
        let c = partials.iter().zip(&t.factorial).map(|(p, f)| p / f).collect();
        Jet {
            dim: dim as u8,
            order: order as i8,
            c,
        }
    }

    fn exhausted(dim: u8) -> Self {
        Jet {
            dim,
            order: -1,
            c: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    /// Order of the jet, or `None` once it has been differentiated past zero.
    pub fn order(&self) -> Option<usize> {
        (self.order >= 0).then_some(self.order as usize)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    pub fn value(&self) -> Result<f64> {
        self.c.first().copied().ok_or(Error::InsufficientOrder {
            what: "jet value",
            needed: 0,
            have: None,
        })
    }

    /// `∂^α f` at the expansion point.
    pub fn partial(&self, alpha: &[usize]) -> Result<f64> {
        let deg: usize = alpha.iter().sum();
        let idx = monomial_index(alpha)
            .filter(|&i| i < self.c.len())
            .ok_or(Error::InsufficientOrder {
                what: "jet partial",
                needed: deg,
                have: self.order(),
            })?;
        Ok(self.c[idx] * table(self.dim()).factorial[idx])
    }

    /// All partial derivatives in graded lex order.
    pub fn partials(&self) -> Vec<f64> {
        let t = table(self.dim());
        self.c.iter().zip(&t.factorial).map(|(c, f)| c * f).collect()
    }

    pub fn truncate(&self, order: usize) -> Jet {
        if (order as i8) >= self.order {
            return self.clone();
        }
        Jet {
            dim: self.dim,
            order: order as i8,
            c: self.c[..monomial_count(self.dim(), order)].to_vec(),
        }
    }

    fn truncated_to(&mut self, order: i8) {
        if order < self.order {
            self.order = order;
            if order < 0 {
                self.c.clear();
            } else {
                self.c.truncate(monomial_count(self.dim(), order as usize));
            }
        }
    }

    /// Partial derivative in variable `i`; lowers the order by one.
    pub fn d(&self, i: usize) -> Jet {
        if self.order <= 0 {
            return Jet::exhausted(self.dim);
        }
        let t = table(self.dim());
        let m = t.count_upto[(self.order - 1) as usize];
        let c = t.shift[i][..m]
            .iter()
            .map(|&s| t.exps[s as usize][i] as f64 * self.c[s as usize])
            .collect();
        Jet {
            dim: self.dim,
            order: self.order - 1,
            c,
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            dim: self.dim,
            order: self.order,
            c: self.c.iter().map(|v| v * s).collect(),
        }
    }

    /// `self += a * b`, truncating `self` to the product's order.
    pub fn add_mul(&mut self, a: &Jet, b: &Jet) {
        let k = a.order.min(b.order);
        self.truncated_to(k);
        if self.order < 0 {
            return;
        }
        let t = table(self.dim());
        let np = t.pairs_upto[self.order as usize];
        let (ac, bc, cc) = (&a.c, &b.c, &mut self.c);
        for &(ai, bi, ci) in &t.pairs[..np] {
            cc[ci as usize] += ac[ai as usize] * bc[bi as usize];
        }
    }

    /// `self += s * a`.
    pub fn add_scaled(&mut self, a: &Jet, s: f64) {
        self.truncated_to(a.order);
        for (x, y) in self.c.iter_mut().zip(&a.c) {
            *x += s * y;
        }
    }

    /// Compose with a univariate function given its derivatives at the
    /// constant term: `derivs[k] = F^{(k)}(c₀)`.
    fn compose(&self, derivs: &[f64]) -> Jet {
        if self.order < 0 {
            return self.clone();
        }
        let k = self.order as usize;
        let mut u = self.clone();
        u.c[0] = 0.0;
        let mut out = Jet::constant(self.dim(), k, derivs[0]);
        let mut power = Jet::constant(self.dim(), k, 1.0);
        let mut kfact = 1.0;
        for (m, &dm) in derivs.iter().enumerate().take(k + 1).skip(1) {
            let mut next = Jet::zero(self.dim(), k);
            next.add_mul(&power, &u);
            power = next;
            kfact *= m as f64;
            out.add_scaled(&power, dm / kfact);
        }
        out
    }

    pub fn exp(&self) -> Jet {
        let v = self.c.first().copied().unwrap_or(0.0).exp();
        self.compose(&[v; MAX_ORDER + 1])
    }

    pub fn sin(&self) -> Jet {
        let x = self.c.first().copied().unwrap_or(0.0);
        let (s, c) = x.sin_cos();
        self.compose(&[s, c, -s, -c, s, c])
    }

    pub fn cos(&self) -> Jet {
        let x = self.c.first().copied().unwrap_or(0.0);
        let (s, c) = x.sin_cos();
        self.compose(&[c, -s, -c, s, c, -s])
    }

    pub fn ln(&self) -> Jet {
        let x = self.c.first().copied().unwrap_or(1.0);
        let mut d = [0.0; MAX_ORDER + 1];
        d[0] = x.ln();
        for (k, dk) in d.iter_mut().enumerate().skip(1) {
            // (−1)^{k−1} (k−1)! / x^k
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            *dk = sign * fact(k - 1) / x.powi(k as i32);
        }
        self.compose(&d)
    }

    /// `self^p` for real `p`; the constant term must be positive unless `p`
    /// is a non-negative integer.
    pub fn powf(&self, p: f64) -> Jet {
        let x = self.c.first().copied().unwrap_or(1.0);
        let mut d = [0.0; MAX_ORDER + 1];
        let mut coeff = 1.0;
        for (k, dk) in d.iter_mut().enumerate() {
            *dk = coeff * x.powf(p - k as f64);
            coeff *= p - k as f64;
        }
        self.compose(&d)
    }

    pub fn recip(&self) -> Jet {
        self.powf(-1.0)
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn square(&self) -> Jet {
        self * self
    }
}

impl Add<&Jet> for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let mut out = self.clone();
        out.add_scaled(rhs, 1.0);
        out
    }
}

impl Sub<&Jet> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let mut out = self.clone();
        out.add_scaled(rhs, -1.0);
        out
    }
}

impl Mul<&Jet> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let k = self.order.min(rhs.order);
        if k < 0 {
            return Jet::exhausted(self.dim);
        }
        let mut out = Jet::zero(self.dim(), k as usize);
        out.add_mul(self, rhs);
        out
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        let mut out = self.clone();
        if let Some(c0) = out.c.first_mut() {
            *c0 += rhs;
        }
        out
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        &self + rhs
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        self.add_scaled(rhs, 1.0);
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        self.add_scaled(rhs, -1.0);
    }
}
