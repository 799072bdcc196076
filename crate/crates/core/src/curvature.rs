//! The curvature tower, computed on Taylor jets.
//!
//! Conventions (fixed):
//! * `R^l_{ijk} = ∂_iΓ^l_{jk} − ∂_jΓ^l_{ik} + Γ^l_{im}Γ^m_{jk} − Γ^l_{jm}Γ^m_{ik}`
//! * `R_{ijkl} = g_{lm} R^m_{ijk}`, `Ric_{jk} = R^i_{ijk}`, `R = g^{jk}Ric_{jk}`,
//!   so the unit sphere has `R = n(n−1)`.
//! * `Δ = g^{ij}∇_i∇_j` (non-positive spectrum), `div ω = g^{ij}∇_iω_j`, `δ = −div`.
//! * `(∇T)_{i a…} = ∇_i T_{a…}`: the derivative index comes first.
//! * `(R̊m·h)_{jk} = R_{ijkl} h^{il}`.
//!
//! Every tensor here is a field of jets, so derivatives of curvature come
//! from the same arithmetic that produced the curvature. Jet orders drop as
//! derivatives are taken; a quantity that needs more derivatives than the
//! input metric jet carries comes out exhausted and extraction fails with
//! [`Error::InsufficientOrder`].

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::jets::{MetricJet, ScalarJet};
use crate::taylor::Jet;
use crate::tensor::{self, MetricAtPoint, Sym2, Tensor};

/// Metric jet orders each quantity needs.
pub mod required_order {
    pub const RIEMANN: usize = 2;
    pub const COTTON: usize = 3;
    pub const FOURTH_ORDER: usize = 4;
    pub const DIVERGENCE: usize = 5;
}

/// `A_n = −1/(2(n−1))`.
pub fn a_coeff(n: usize) -> f64 {
    let n = n as f64;
    -1.0 / (2.0 * (n - 1.0))
}

/// `B_n = −2/(n−2)²`.
pub fn b_coeff(n: usize) -> f64 {
    let n = n as f64;
    -2.0 / ((n - 2.0) * (n - 2.0))
}

/// `C_n = (n²(n−4) + 16(n−1)) / (8(n−1)²(n−2)²)`.
pub fn c_coeff(n: usize) -> f64 {
    let n = n as f64;
    (n * n * (n - 4.0) + 16.0 * (n - 1.0)) / (8.0 * (n - 1.0).powi(2) * (n - 2.0).powi(2))
}

/// Paneitz coefficient `a_n = ((n−2)² + 4) / (2(n−1)(n−2))`.
pub fn paneitz_a(n: usize) -> f64 {
    let n = n as f64;
    ((n - 2.0).powi(2) + 4.0) / (2.0 * (n - 1.0) * (n - 2.0))
}

/// Paneitz coefficient `b_n = −4/(n−2)`.
pub fn paneitz_b(n: usize) -> f64 {
    -4.0 / (n as f64 - 2.0)
}

/// `Q = (n+2)(n−2)/(8n(n−1)²) R²` on Einstein metrics.
pub fn einstein_q(n: usize, scalar: f64) -> f64 {
    let nf = n as f64;
    (nf + 2.0) * (nf - 2.0) / (8.0 * nf * (nf - 1.0).powi(2)) * scalar * scalar
}

fn inverse_metric(g: &Sym2<Jet>, at: &MetricAtPoint) -> Sym2<Jet> {
    let n = g.dim();
    let full: Vec<Jet> = (0..n * n).map(|e| g.get(e / n, e % n).clone()).collect();
    let inv0: Vec<f64> = (0..n * n).map(|e| *at.g_inv.get(e / n, e % n)).collect();
    let x = crate::taylor::matrix_inverse(&full, n, &inv0);
    Sym2::from_fn(n, |i, j| (&x[i * n + j] + &x[j * n + i]).scale(0.5))
}

/// Levi-Civita connection of a metric jet.
#[derive(Clone, Debug)]
pub struct Connection {
    pub g: Sym2<Jet>,
    pub g_inv: Sym2<Jet>,
    /// `Γ^k_{ij}` stored at `[k, i, j]`.
    pub christoffel: Tensor<Jet>,
    neg_christoffel: Tensor<Jet>,
    pub at: MetricAtPoint,
}

impl Connection {
    pub fn new(jet: &MetricJet) -> Result<Self> {
        let n = jet.dim();
        let at = jet.metric_at_point()?;
        let g = jet.g.clone();
        let g_inv = inverse_metric(&g, &at);
        // first kind: Γ_{l,ij} = ½(∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij})
        let dg: Vec<Vec<Jet>> = (0..n).map(|k| g.data().iter().map(|c| c.d(k)).collect()).collect();
        let dgc = |k: usize, i: usize, j: usize| &dg[k][i * n + j];
        let first = Tensor::from_fn(n, 3, |x| {
            let (l, i, j) = (x[0], x[1], x[2]);
            (dgc(i, j, l) + dgc(j, i, l) - dgc(l, i, j)).scale(0.5)
        });
        let christoffel = Tensor::from_fn(n, 3, |x| {
            let (k, i, j) = (x[0], x[1], x[2]);
            let mut acc = g_inv.get(k, 0) * first.get(&[0, i, j]);
            for l in 1..n {
                acc.add_mul(g_inv.get(k, l), first.get(&[l, i, j]));
            }
            acc
        });
        let neg_christoffel = christoffel.scaled(-1.0);
        Ok(Connection {
            g,
            g_inv,
            christoffel,
            neg_christoffel,
            at,
        })
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    fn gamma(&self, k: usize, i: usize, j: usize) -> &Jet {
        self.christoffel.get(&[k, i, j])
    }

    /// Covariant derivative of a covariant tensor field of any rank; the new
    /// derivative index is the first slot.
    pub fn nabla(&self, t: &Tensor<Jet>) -> Tensor<Jet> {
        let n = self.dim();
        let r = t.rank();
        let mut src = vec![0usize; r];
        Tensor::from_fn(n, r + 1, |idx| {
            let i = idx[0];
            let a = &idx[1..];
            let mut v = t.get(a).d(i);
            for s in 0..r {
                src.copy_from_slice(a);
                for m in 0..n {
                    src[s] = m;
                    v.add_mul(self.neg_christoffel.get(&[m, i, a[s]]), t.get(&src));
                }
            }
            v
        })
    }

    pub fn gradient(&self, f: &Jet) -> Tensor<Jet> {
        let n = self.dim();
        Tensor::from_fn(n, 1, |i| f.d(i[0]))
    }

    /// `∇²f`, symmetrized.
    pub fn hessian(&self, f: &Jet) -> Sym2<Jet> {
        Sym2::symmetrize(&self.nabla(&self.gradient(f)))
    }

    pub fn laplacian_scalar(&self, f: &Jet) -> Jet {
        tensor::trace(&self.g_inv, &self.hessian(f)).expect("dims")
    }

    /// Rough Laplacian `g^{ab}∇_a∇_b h` of a symmetric 2-tensor.
    pub fn laplacian_sym2(&self, h: &Sym2<Jet>) -> Sym2<Jet> {
        let nn = self.nabla(&self.nabla(&h.as_tensor()));
        Sym2::symmetrize(&nn.trace_pair(&self.g_inv, 0, 1).expect("dims"))
    }

    /// `(div h)_k = g^{ij}∇_i h_{jk}`.
    pub fn divergence_sym2(&self, h: &Sym2<Jet>) -> Tensor<Jet> {
        self.nabla(&h.as_tensor()).trace_pair(&self.g_inv, 0, 1).expect("dims")
    }

    /// `div ω = g^{ij}∇_i ω_j`.
    pub fn divergence_form(&self, w: &Tensor<Jet>) -> Jet {
        self.nabla(w).trace_pair(&self.g_inv, 0, 1).expect("dims").data()[0].clone()
    }

    /// Check `∇g = 0`; returns the largest component.
    pub fn metric_compatibility_residual(&self) -> Result<f64> {
        Ok(self.nabla(&self.g.as_tensor()).value()?.max_abs())
    }
}

/// Riemann tensor (all indices down), Ricci tensor and scalar curvature.
pub fn riemann(conn: &Connection) -> (Tensor<Jet>, Sym2<Jet>, Jet) {
    let n = conn.dim();
    // R^l_{ijk} for i < j, antisymmetric in (i, j)
    let mut up: Vec<Option<Jet>> = vec![None; n * n * n * n];
    let at = |l: usize, i: usize, j: usize, k: usize| ((l * n + i) * n + j) * n + k;
    for l in 0..n {
        for i in 0..n {
            for j in (i + 1)..n {
                for k in 0..n {
                    let mut v = conn.gamma(l, j, k).d(i) - conn.gamma(l, i, k).d(j);
                    for m in 0..n {
                        v.add_mul(conn.gamma(l, i, m), conn.gamma(m, j, k));
                        v.add_mul(conn.neg_christoffel.get(&[l, j, m]), conn.gamma(m, i, k));
                    }
                    up[at(l, j, i, k)] = Some(-&v);
                    up[at(l, i, j, k)] = Some(v);
                }
            }
        }
    }
    let order = conn.gamma(0, 0, 0).order().map_or(0, |o| o.saturating_sub(1));
    let zero = || {
        if conn.gamma(0, 0, 0).order().unwrap_or(0) == 0 {
            conn.gamma(0, 0, 0).d(0)
        } else {
            Jet::zero(n, order)
        }
    };
    let mixed = |l: usize, i: usize, j: usize, k: usize| -> Jet { up[at(l, i, j, k)].clone().unwrap_or_else(zero) };
    let mixed_t = Tensor::from_fn(n, 4, |x| mixed(x[0], x[1], x[2], x[3]));
    let rm = Tensor::from_fn(n, 4, |x| {
        let (i, j, k, l) = (x[0], x[1], x[2], x[3]);
        let mut acc = conn.g.get(l, 0) * mixed_t.get(&[0, i, j, k]);
        for m in 1..n {
            acc.add_mul(conn.g.get(l, m), mixed_t.get(&[m, i, j, k]));
        }
        acc
    });
    let ric = Sym2::from_fn(n, |j, k| {
        let mut acc = mixed_t.get(&[0, 0, j, k]).clone();
        for i in 1..n {
            acc += mixed_t.get(&[i, i, j, k]);
        }
        acc
    });
    let scalar = tensor::trace(&conn.g_inv, &ric).expect("dims");
    (rm, ric, scalar)
}

/// Curvature fields as jets at one point.
#[derive(Clone, Debug)]
pub struct Tower {
    pub n: usize,
    pub conn: Connection,
    pub riemann: Tensor<Jet>,
    pub ricci: Sym2<Jet>,
    pub scalar: Jet,
    pub schouten: Sym2<Jet>,
    pub tr_schouten: Jet,
    pub weyl: Tensor<Jet>,
}

impl Tower {
    pub fn new(jet: &MetricJet) -> Result<Self> {
        let n = jet.dim();
        if n < 3 {
            return Err(Error::UnsupportedDimension(n, "curvature tower needs n ≥ 3"));
        }
        if jet.order() < required_order::RIEMANN {
            return Err(Error::InsufficientOrder {
                what: "Riemann tensor",
                needed: required_order::RIEMANN,
                have: Some(jet.order()),
            });
        }
        let conn = Connection::new(jet)?;
        let (riemann, ricci, scalar) = riemann(&conn);
        let nf = n as f64;
        // S = (Ric − R g / (2(n−1))) / (n−2)
        let r_term = scalar.scale(-1.0 / (2.0 * (nf - 1.0)));
        let schouten = ricci.plus(&conn.g.times(&r_term)).scaled(1.0 / (nf - 2.0));
        let tr_schouten = tensor::trace(&conn.g_inv, &schouten)?;
        let weyl = riemann.minus(&tensor::kulkarni_nomizu(&schouten, &conn.g)?);
        Ok(Tower {
            n,
            conn,
            riemann,
            ricci,
            scalar,
            schouten,
            tr_schouten,
            weyl,
        })
    }

    fn g(&self) -> &Sym2<Jet> {
        &self.conn.g
    }

    fn g_inv(&self) -> &Sym2<Jet> {
        &self.conn.g_inv
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    /// `C_{ijk} = ∇_i S_{jk} − ∇_j S_{ik}`.
    pub fn cotton(&self) -> Tensor<Jet> {
        let ns = self.conn.nabla(&self.schouten.as_tensor());
        ns.minus(&ns.permuted(&[1, 0, 2]))
    }

    /// `∇^l W_{ijkl}`.
    pub fn weyl_divergence(&self) -> Tensor<Jet> {
        // ∇W has the derivative in slot 0; contract it with slot 4 (l).
        let nw = self.conn.nabla(&self.weyl);
        nw.permuted(&[4, 1, 2, 3, 0])
            .trace_pair(self.g_inv(), 3, 4)
            .expect("dims")
            .permuted(&[0, 1, 2])
    }

    fn s_cross_s(&self) -> Sym2<Jet> {
        tensor::product(self.g_inv(), &self.schouten, &self.schouten).expect("dims")
    }

    fn s_norm_sq(&self) -> Jet {
        tensor::norm_sq(self.g_inv(), &self.schouten).expect("dims")
    }

    /// Bach tensor by its definition `∇^i C_{ijk} + W_{ijkl} S^{il}`.
    pub fn bach_definition(&self) -> Sym2<Jet> {
        let nc = self.conn.nabla(&self.cotton());
        let div_c = nc.trace_pair(self.g_inv(), 0, 1).expect("dims");
        let ws = tensor::rm_dot(&self.weyl, self.g_inv(), &self.schouten).expect("dims");
        Sym2::symmetrize(&div_c).plus(&ws)
    }

    /// `ΔS − ∇²tr S + 2R̊m·S − (n−4) S×S − |S|² g − 2(tr S) S`.
    pub fn bach_expanded(&self) -> Sym2<Jet> {
        let n = self.nf();
        let lap = self.conn.laplacian_sym2(&self.schouten);
        let hess = self.conn.hessian(&self.tr_schouten);
        let rms = tensor::rm_dot(&self.riemann, self.g_inv(), &self.schouten).expect("dims");
        let ss = self.s_cross_s();
        let g_norm = self.g().times(&self.s_norm_sq());
        let trs_s = self.schouten.times(&self.tr_schouten);
        Sym2::combine(&[
            (1.0, &lap),
            (-1.0, &hess),
            (2.0, &rms),
            (-(n - 4.0), &ss),
            (-1.0, &g_norm),
            (-2.0, &trs_s),
        ])
    }

    /// `Δ_L h = Δh + 2R̊m·h − Ric×h − h×Ric`.
    pub fn lichnerowicz(&self, h: &Sym2<Jet>) -> Sym2<Jet> {
        let lap = self.conn.laplacian_sym2(h);
        let rmh = tensor::rm_dot(&self.riemann, self.g_inv(), h).expect("dims");
        let rich = tensor::product(self.g_inv(), &self.ricci, h).expect("dims");
        Sym2::combine(&[(1.0, &lap), (2.0, &rmh), (-2.0, &rich)])
    }

    /// `Δ_L S − ∇²tr S + n(S×S − |S|² g / n)`.
    pub fn bach_lichnerowicz(&self) -> Sym2<Jet> {
        let n = self.nf();
        let dl = self.lichnerowicz(&self.schouten);
        let hess = self.conn.hessian(&self.tr_schouten);
        let ss = self.s_cross_s();
        let g_norm = self.g().times(&self.s_norm_sq());
        Sym2::combine(&[(1.0, &dl), (-1.0, &hess), (n, &ss), (-1.0, &g_norm)])
    }

    /// `Q = A_n ΔR + B_n |Ric|² + C_n R²`.
    pub fn q_curvature(&self) -> Jet {
        let n = self.n;
        let lap_r = self.conn.laplacian_scalar(&self.scalar);
        let ric2 = tensor::norm_sq(self.g_inv(), &self.ricci).expect("dims");
        let mut q = lap_r.scale(a_coeff(n));
        q.add_scaled(&ric2, b_coeff(n));
        q.add_scaled(&self.scalar.square(), c_coeff(n));
        q
    }

    /// `Q = −Δ tr S − 2|S|² + (n/2)(tr S)²`.
    pub fn q_from_schouten(&self) -> Jet {
        let mut q = self.conn.laplacian_scalar(&self.tr_schouten).scale(-1.0);
        q.add_scaled(&self.s_norm_sq(), -2.0);
        q.add_scaled(&self.tr_schouten.square(), 0.5 * self.nf());
        q
    }

    /// The trace-free tensor `T` in the explicit formula for `J`.
    pub fn t_tensor(&self) -> Sym2<Jet> {
        let n = self.nf();
        let hess = self.conn.hessian(&self.tr_schouten);
        let lap = tensor::trace(self.g_inv(), &hess).expect("dims");
        let g_lap = self.g().times(&lap);
        let ss = self.s_cross_s();
        let g_norm = self.g().times(&self.s_norm_sq());
        let s_free = tensor::traceless_part(self.g(), self.g_inv(), &self.schouten).expect("dims");
        let trs_sfree = s_free.times(&self.tr_schouten);
        Sym2::combine(&[
            (n - 2.0, &hess),
            (-(n - 2.0) / n, &g_lap),
            (4.0 * (n - 1.0), &ss),
            (-4.0 * (n - 1.0) / n, &g_norm),
            (-n * n, &trs_sfree),
        ])
    }

    /// `J = Q g / n − B/(n−2) − (n−4)/(4(n−1)(n−2)) T`, returned with its
    /// traceless part `J̊ = −(B + (n−4)/(4(n−1)) T)/(n−2)`.
    pub fn j_tensor_from_parts(&self, q: &Jet, bach: &Sym2<Jet>, t: &Sym2<Jet>) -> (Sym2<Jet>, Sym2<Jet>) {
        let n = self.nf();
        let qg = self.g().times(q);
        let j = Sym2::combine(&[
            (1.0 / n, &qg),
            (-1.0 / (n - 2.0), bach),
            (-(n - 4.0) / (4.0 * (n - 1.0) * (n - 2.0)), t),
        ]);
        let j_free = Sym2::combine(&[
            (-1.0 / (n - 2.0), bach),
            (-(n - 4.0) / (4.0 * (n - 1.0) * (n - 2.0)), t),
        ]);
        (j, j_free)
    }

    pub fn j_tensor(&self) -> (Sym2<Jet>, Sym2<Jet>) {
        self.j_tensor_from_parts(&self.q_curvature(), &self.bach_definition(), &self.t_tensor())
    }

    /// `γ*f = ∇²f − g Δf − f Ric`.
    pub fn gamma_star_scalar(&self, f: &Jet) -> Sym2<Jet> {
        let hess = self.conn.hessian(f);
        let lap = tensor::trace(self.g_inv(), &hess).expect("dims");
        let g_lap = self.g().times(&lap);
        let f_ric = self.ricci.times(f);
        Sym2::combine(&[(1.0, &hess), (-1.0, &g_lap), (-1.0, &f_ric)])
    }

    /// `γh = −Δ tr h + δ²h − ⟨Ric, h⟩` with `δ²h = div div h`.
    pub fn gamma_scalar(&self, h: &Sym2<Jet>) -> Jet {
        let tr_h = tensor::trace(self.g_inv(), h).expect("dims");
        let lap_tr = self.conn.laplacian_scalar(&tr_h);
        let div_h = self.conn.divergence_sym2(h);
        let div_div = self.conn.divergence_form(&div_h);
        let ric_h = tensor::inner(self.g_inv(), &self.ricci, h).expect("dims");
        &(&div_div - &lap_tr) - &ric_h
    }

    /// Adjoint of the linearized Q-curvature, `Γ*f`. The terms `∇(f dR)` and
    /// `∇δ(f Ric)` are replaced by their symmetric parts.
    pub fn gamma_star_q(&self, f: &Jet) -> Sym2<Jet> {
        let n = self.n;
        let (an, bn, cn) = (a_coeff(n), b_coeff(n), c_coeff(n));
        let g = self.g();
        let g_inv = self.g_inv();

        // A_n(−gΔ²f + ∇²Δf − Ric Δf + ½ g δ(f dR) + ∇(f dR) − f∇²R)
        let lap_f = self.conn.laplacian_scalar(f);
        let hess_lap_f = self.conn.hessian(&lap_f);
        let bilap_f = tensor::trace(g_inv, &hess_lap_f).expect("dims");
        let f_dr = self.conn.gradient(&self.scalar).map(|c| c * f);
        let delta_f_dr = -self.conn.divergence_form(&f_dr);
        let nabla_f_dr = Sym2::symmetrize(&self.conn.nabla(&f_dr));
        let hess_r = self.conn.hessian(&self.scalar);
        let a_part = Sym2::combine(&[
            (-1.0, &g.times(&bilap_f)),
            (1.0, &hess_lap_f),
            (-1.0, &self.ricci.times(&lap_f)),
            (0.5, &g.times(&delta_f_dr)),
            (1.0, &nabla_f_dr),
            (-1.0, &hess_r.times(f)),
        ]);

        // −B_n(Δ(f Ric) + 2f R̊m·Ric + g δ²(f Ric) + 2∇δ(f Ric))
        let f_ric = self.ricci.times(f);
        let lap_f_ric = self.conn.laplacian_sym2(&f_ric);
        let rm_ric = tensor::rm_dot(&self.riemann, g_inv, &self.ricci).expect("dims");
        let delta_f_ric = self.conn.divergence_sym2(&f_ric).scaled(-1.0);
        let delta2_f_ric = -self.conn.divergence_form(&delta_f_ric);
        let nabla_delta = Sym2::symmetrize(&self.conn.nabla(&delta_f_ric));
        let b_part = Sym2::combine(&[
            (1.0, &lap_f_ric),
            (2.0, &rm_ric.times(f)),
            (1.0, &g.times(&delta2_f_ric)),
            (2.0, &nabla_delta),
        ]);

        // −2C_n(gΔ(fR) − ∇²(fR) + fR Ric)
        let fr = f * &self.scalar;
        let hess_fr = self.conn.hessian(&fr);
        let lap_fr = tensor::trace(g_inv, &hess_fr).expect("dims");
        let c_part = Sym2::combine(&[
            (1.0, &g.times(&lap_fr)),
            (-1.0, &hess_fr),
            (1.0, &self.ricci.times(&fr)),
        ]);

        Sym2::combine(&[(an, &a_part), (-bn, &b_part), (-2.0 * cn, &c_part)])
    }

    /// `P f = Δ²f − div[(a_n R g + b_n Ric) df] + (n−4)/2 Q f`.
    pub fn paneitz(&self, f: &Jet, q: &Jet) -> Jet {
        let n = self.n;
        let lap_f = self.conn.laplacian_scalar(f);
        let bilap = self.conn.laplacian_scalar(&lap_f);
        let df = self.conn.gradient(f);
        let df_up = df.raise(self.g_inv(), 0).expect("dims");
        let (pa, pb) = (paneitz_a(n), paneitz_b(n));
        let w = Tensor::from_fn(n, 1, |j| {
            let j = j[0];
            let mut acc = &self.scalar * df.get(&[j]);
            acc = acc.scale(pa);
            for l in 0..n {
                acc.add_mul(&self.ricci.get(j, l).scale(pb), df_up.get(&[l]));
            }
            acc
        });
        let div_w = self.conn.divergence_form(&w);
        let mut out = &bilap - &div_w;
        out.add_mul(&q.scale((n as f64 - 4.0) / 2.0), f);
        out
    }

    /// `S_J = (J − 3Q g/(4(n−1)))/(n−4)`; undefined for `n = 4`.
    pub fn j_schouten(&self, j: &Sym2<Jet>, q: &Jet) -> Result<Sym2<Jet>> {
        if self.n == 4 {
            return Err(Error::UnsupportedDimension(
                4,
                "J-Schouten tensor is undefined in dimension 4",
            ));
        }
        let n = self.nf();
        let qg = self.g().times(q);
        Ok(Sym2::combine(&[
            (1.0 / (n - 4.0), j),
            (-3.0 / (4.0 * (n - 1.0) * (n - 4.0)), &qg),
        ]))
    }
}

fn max_abs_sym(a: &Sym2) -> f64 {
    a.max_abs()
}

/// `max|a − b| / max(|a|, |b|, scale)`, zero when the difference is exactly zero.
pub fn relative_gap(diff: f64, magnitude: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else {
        diff / magnitude.max(f64::MIN_POSITIVE)
    }
}

fn sym_gap(a: &Sym2, b: &Sym2, scale: f64) -> f64 {
    let diff = a.minus(b).max_abs();
    relative_gap(diff, a.max_abs().max(b.max_abs()).max(scale))
}

/// Internal consistency residuals recorded with each bundle.
#[derive(Clone, Debug, serde::Serialize)]
pub struct BundleChecks {
    /// Pairwise relative gaps between the three Bach routes.
    pub bach_def_vs_expanded: f64,
    pub bach_def_vs_lichnerowicz: f64,
    pub bach_expanded_vs_lichnerowicz: f64,
    /// Relative gap between the two Q formulas.
    pub q_routes: f64,
    /// `|tr J − Q|`, relative.
    pub trace_j_minus_q: f64,
    /// `J` from its explicit formula vs `−½Γ*1`, relative.
    pub j_vs_adjoint: f64,
    /// Traces of `B` and `T`, relative.
    pub bach_trace: f64,
    pub t_trace: f64,
    /// `∇^l W_{ijkl}` vs `(n−3) C_{ijk}`, relative.
    pub weyl_cotton: f64,
    /// Weight-4 magnitude used to normalize the residuals above.
    pub scale4: f64,
}

/// Every pointwise curvature quantity at one chart point.
#[derive(Clone, Debug)]
pub struct CurvatureBundle {
    pub metric: MetricAtPoint,
    pub christoffel: Tensor,
    pub riemann: Tensor,
    pub ricci: Sym2,
    pub scalar: f64,
    pub schouten: Sym2,
    pub tr_schouten: f64,
    pub weyl: Tensor,
    pub cotton: Tensor,
    pub bach: Sym2,
    pub bach_expanded: Sym2,
    pub bach_lichnerowicz: Sym2,
    pub q: f64,
    pub q_schouten: f64,
    pub t_tensor: Sym2,
    pub j_tensor: Sym2,
    pub j_traceless: Sym2,
    pub j_adjoint: Sym2,
    pub s_j: Option<Sym2>,
    pub sigma1_j: Option<f64>,
    pub sigma2_j: Option<f64>,
    pub checks: BundleChecks,
}

impl CurvatureBundle {
    pub fn from_jet(jet: &MetricJet) -> Result<Self> {
        if jet.order() < required_order::FOURTH_ORDER {
            return Err(Error::InsufficientOrder {
                what: "curvature bundle",
                needed: required_order::FOURTH_ORDER,
                have: Some(jet.order()),
            });
        }
        let tower = Tower::new(jet)?;
        Self::from_tower(&tower)
    }

    pub fn from_tower(tower: &Tower) -> Result<Self> {
        let n = tower.n;
        let nf = n as f64;
        let metric = tower.conn.at.clone();
        let gi = &metric.g_inv;

        let cotton_j = tower.cotton();
        let bach_def_j = tower.bach_definition();
        let bach_exp_j = tower.bach_expanded();
        let bach_lich_j = tower.bach_lichnerowicz();
        let q_j = tower.q_curvature();
        let t_j = tower.t_tensor();
        let (j_j, j_free_j) = tower.j_tensor_from_parts(&q_j, &bach_def_j, &t_j);
        let one = Jet::constant(n, crate::taylor::MAX_ORDER, 1.0);
        let j_adj_j = tower.gamma_star_q(&one).scaled(-0.5);

        let riemann = tower.riemann.value()?;
        let ricci = tower.ricci.value()?;
        let scalar = tower.scalar.value()?;
        let schouten = tower.schouten.value()?;
        let bach = bach_def_j.value()?;
        let bach_expanded = bach_exp_j.value()?;
        let bach_lichnerowicz = bach_lich_j.value()?;
        let q = q_j.value()?;
        let q_schouten = tower.q_from_schouten().value()?;
        let t_tensor = t_j.value()?;
        let j_tensor = j_j.value()?;
        let j_traceless = j_free_j.value()?;
        let j_adjoint = j_adj_j.value()?;
        let cotton = cotton_j.value()?;
        let weyl = tower.weyl.value()?;
        let weyl_div = tower.weyl_divergence().value()?;

        let (s_j, sigma1_j, sigma2_j) = if n != 4 {
            let sj = tower.j_schouten(&j_j, &q_j)?.value()?;
            let s1 = tensor::trace(gi, &sj)?;
            let s2 = 0.5 * (s1 * s1 - tensor::norm_sq(gi, &sj)?);
            (Some(sj), Some(s1), Some(s2))
        } else {
            (None, None, None)
        };

        // Weight-4 magnitude: |Rm|² plus the size of the second-derivative terms.
        let rm_norm2 = tensor::norm_sq_4(gi, &riemann)?;
        let lap_s = tower.conn.laplacian_sym2(&tower.schouten).value()?;
        let hess_trs = tower.conn.hessian(&tower.tr_schouten).value()?;
        let scale4 = rm_norm2 + max_abs_sym(&lap_s) + max_abs_sym(&hess_trs);
        let scale3 = rm_norm2.powf(0.75) + tower.conn.nabla(&tower.ricci.as_tensor()).value()?.max_abs();

        let tr_j = tensor::trace(gi, &j_tensor)?;
        let trace_b = tensor::trace(gi, &bach)?;
        let trace_t = tensor::trace(gi, &t_tensor)?;
        let cc = cotton.scaled(nf - 3.0);
        let wc_diff = weyl_div.minus(&cc).max_abs();
        let checks = BundleChecks {
            bach_def_vs_expanded: sym_gap(&bach, &bach_expanded, scale4),
            bach_def_vs_lichnerowicz: sym_gap(&bach, &bach_lichnerowicz, scale4),
            bach_expanded_vs_lichnerowicz: sym_gap(&bach_expanded, &bach_lichnerowicz, scale4),
            q_routes: relative_gap((q - q_schouten).abs(), q.abs().max(q_schouten.abs()).max(scale4)),
            trace_j_minus_q: relative_gap((tr_j - q).abs(), q.abs().max(j_tensor.max_abs()).max(scale4)),
            j_vs_adjoint: sym_gap(&j_tensor, &j_adjoint, scale4),
            bach_trace: relative_gap(trace_b.abs(), bach.max_abs().max(scale4)),
            t_trace: relative_gap(trace_t.abs(), t_tensor.max_abs().max(scale4)),
            weyl_cotton: relative_gap(wc_diff, weyl_div.max_abs().max(cc.max_abs()).max(scale3)),
            scale4,
        };

        Ok(CurvatureBundle {
            christoffel: tower.conn.christoffel.value()?,
            metric,
            riemann,
            ricci,
            scalar,
            schouten,
            tr_schouten: tower.tr_schouten.value()?,
            weyl,
            cotton,
            bach,
            bach_expanded,
            bach_lichnerowicz,
            q,
            q_schouten,
            t_tensor,
            j_tensor,
            j_traceless,
            j_adjoint,
            s_j,
            sigma1_j,
            sigma2_j,
            checks,
        })
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn weyl_norm_sq(&self) -> f64 {
        tensor::norm_sq_4(&self.metric.g_inv, &self.weyl).expect("dims")
    }

    pub fn j_traceless_norm_sq(&self) -> f64 {
        tensor::norm_sq(&self.metric.g_inv, &self.j_traceless).expect("dims")
    }

    /// Every field as nested arrays, for structured output.
    pub fn to_json(&self) -> serde_json::Value {
        fn nest(data: &[f64], dim: usize) -> serde_json::Value {
            if data.len() == 1 {
                return data[0].into();
            }
            data.chunks(data.len() / dim).map(|c| nest(c, dim)).collect()
        }
        let n = self.dim();
        let t = |x: &Tensor| nest(x.data(), n);
        let m = |x: &Sym2| nest(x.data(), n);
        let o = |x: &Option<Sym2>| x.as_ref().map_or(serde_json::Value::Null, m);
        serde_json::json!({
            "dim": n,
            "metric": m(&self.metric.g),
            "metric_inverse": m(&self.metric.g_inv),
            "christoffel": t(&self.christoffel),
            "riemann": t(&self.riemann),
            "ricci": m(&self.ricci),
            "scalar": self.scalar,
            "schouten": m(&self.schouten),
            "trace_schouten": self.tr_schouten,
            "weyl": t(&self.weyl),
            "cotton": t(&self.cotton),
            "bach": m(&self.bach),
            "q": self.q,
            "t_tensor": m(&self.t_tensor),
            "j_tensor": m(&self.j_tensor),
            "j_traceless": m(&self.j_traceless),
            "j_from_adjoint": m(&self.j_adjoint),
            "j_schouten": o(&self.s_j),
            "sigma1_j": self.sigma1_j,
            "sigma2_j": self.sigma2_j,
            "weyl_norm_sq": self.weyl_norm_sq(),
            "j_traceless_norm_sq": self.j_traceless_norm_sq(),
            "min_ricci_eigenvalue": self.min_ricci_eigenvalue(),
            "checks": self.checks,
        })
    }

    /// Smallest eigenvalue of Ric relative to g.
    pub fn min_ricci_eigenvalue(&self) -> f64 {
        self.ricci
            .eigenvalues_relative_to(&self.metric)
            .map(|ev| ev[0])
            .unwrap_or(f64::NAN)
    }
}

/// Componentwise relative gaps between two bundles at the same point, per
/// quantity: `max|a − b| / max(max|a|, s)`, where `s` is the weight-matched
/// curvature scale of `a` (so quantities that vanish, like B on Einstein
/// metrics, are compared against the curvature size rather than zero).
pub fn bundle_gaps(a: &CurvatureBundle, b: &CurvatureBundle) -> BTreeMap<&'static str, f64> {
    let s4 = a.checks.scale4.max(f64::MIN_POSITIVE);
    let s2 = a.riemann.max_abs().max(s4.sqrt());
    let s3 = s2.powf(1.5);
    let t = |x: &Tensor, y: &Tensor, s: f64| relative_gap(x.minus(y).max_abs(), x.max_abs().max(s));
    let m = |x: &Sym2, y: &Sym2, s: f64| relative_gap(x.minus(y).max_abs(), x.max_abs().max(s));
    let r = |x: f64, y: f64, s: f64| relative_gap((x - y).abs(), x.abs().max(s));
    let mut out = BTreeMap::new();
    out.insert("metric", m(&a.metric.g, &b.metric.g, 0.0));
    out.insert("christoffel", t(&a.christoffel, &b.christoffel, s2.sqrt()));
    out.insert("riemann", t(&a.riemann, &b.riemann, s2));
    out.insert("ricci", m(&a.ricci, &b.ricci, s2));
    out.insert("scalar", r(a.scalar, b.scalar, s2));
    out.insert("schouten", m(&a.schouten, &b.schouten, s2));
    out.insert("weyl", t(&a.weyl, &b.weyl, s2));
    out.insert("cotton", t(&a.cotton, &b.cotton, s3));
    out.insert("bach", m(&a.bach, &b.bach, s4));
    out.insert("q", r(a.q, b.q, s4));
    out.insert("t_tensor", m(&a.t_tensor, &b.t_tensor, s4));
    out.insert("j_tensor", m(&a.j_tensor, &b.j_tensor, s4));
    out.insert("j_traceless", m(&a.j_traceless, &b.j_traceless, s4));
    out
}

/// `γ*f` at a point.
pub fn gamma_star_scalar(f: &ScalarJet, jet: &MetricJet) -> Result<Sym2> {
    need(f.order(), 2, "γ* test function")?;
    Tower::new(jet)?.gamma_star_scalar(&f.f).value()
}

/// `Γ*f` at a point.
pub fn gamma_star_q(f: &ScalarJet, jet: &MetricJet) -> Result<Sym2> {
    need(f.order(), 4, "Γ* test function")?;
    need(Some(jet.order()), 4, "Γ* metric")?;
    Tower::new(jet)?.gamma_star_q(&f.f).value()
}

/// `J = −½Γ*1` at a point.
pub fn j_from_adjoint(jet: &MetricJet) -> Result<Sym2> {
    let one = ScalarJet::constant(jet.dim(), jet.order(), 1.0);
    Ok(gamma_star_q(&one, jet)?.scaled(-0.5))
}

/// `P f` at a point.
pub fn paneitz(f: &ScalarJet, jet: &MetricJet) -> Result<f64> {
    need(f.order(), 4, "Paneitz test function")?;
    need(Some(jet.order()), 4, "Paneitz metric")?;
    let t = Tower::new(jet)?;
    t.paneitz(&f.f, &t.q_curvature()).value()
}

fn need(have: Option<usize>, needed: usize, what: &'static str) -> Result<()> {
    match have {
        Some(h) if h >= needed => Ok(()),
        _ => Err(Error::InsufficientOrder { what, needed, have }),
    }
}

/// Einstein-formula consistency: `|Q − (n+2)(n−2)/(8n(n−1)²) R²|`, relative,
/// and whether the point counts as Einstein (`|R̊ic| ≤ tol·|Ric|`).
pub fn einstein_q_residual(b: &CurvatureBundle, tol: f64) -> (bool, f64) {
    let n = b.dim();
    let free = tensor::traceless_part(&b.metric.g, &b.metric.g_inv, &b.ricci).expect("dims");
    let ric_norm = tensor::norm_sq(&b.metric.g_inv, &b.ricci).expect("dims").sqrt();
    let free_norm = tensor::norm_sq(&b.metric.g_inv, &free).expect("dims").sqrt();
    let einstein = free_norm <= tol * ric_norm.max(f64::MIN_POSITIVE) || ric_norm == 0.0;
    let expect = einstein_q(n, b.scalar);
    (
        einstein,
        relative_gap((b.q - expect).abs(), b.q.abs().max(expect.abs())),
    )
}

/// `div J − ¼dQ` and (n ≠ 4) `div S_J − dQ/(4(n−1))` from order-5 jets.
#[derive(Clone, Debug)]
pub struct DivergenceResidual {
    pub div_j: Vec<f64>,
    pub quarter_dq: Vec<f64>,
    pub div_sj: Option<Vec<f64>>,
    pub sj_rhs: Option<Vec<f64>>,
    pub trace_sj: Option<f64>,
    pub q: f64,
    /// Coordinate size of the terms in `div J` and `dQ`; roundoff in the
    /// residual is relative to this, not to `dQ`.
    pub term_scale: f64,
}

pub fn divergence_identities(jet: &MetricJet) -> Result<DivergenceResidual> {
    need(Some(jet.order()), required_order::DIVERGENCE, "divergence identities")?;
    let t = Tower::new(jet)?;
    let n = t.n;
    let q = t.q_curvature();
    let (j, _) = t.j_tensor_from_parts(&q, &t.bach_definition(), &t.t_tensor());
    let div_j = t.conn.divergence_sym2(&j).value()?.data().to_vec();
    let dq: Vec<f64> = (0..n).map(|k| q.d(k).value()).collect::<Result<_>>()?;
    let quarter_dq = dq.iter().map(|v| 0.25 * v).collect();
    let (div_sj, sj_rhs, trace_sj) = if n != 4 {
        let sj = t.j_schouten(&j, &q)?;
        let d = t.conn.divergence_sym2(&sj).value()?.data().to_vec();
        let c = 1.0 / (4.0 * (n as f64 - 1.0));
        let tr = tensor::trace(&t.conn.g_inv, &sj)?.value()?;
        (Some(d), Some(dq.iter().map(|v| c * v).collect()), Some(tr))
    } else {
        (None, None, None)
    };
    let jv = j.value()?;
    let dj_max = (0..n)
        .map(|k| j.try_map(|c| c.d(k).value()).map(|d| d.max_abs()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(DivergenceResidual {
        div_j,
        quarter_dq,
        div_sj,
        sj_rhs,
        trace_sj,
        q: q.value()?,
        term_scale: (jv.max_abs() + q.value()?.abs()) * t.conn.christoffel.value()?.max_abs() + dj_max,
    })
}

/// `(8(F(δ) − F(−δ)) − (F(2δ) − F(−2δ))) / 12δ`.
fn central_difference(delta: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let (p1, m1, p2, m2) = (f(delta)?, f(-delta)?, f(2.0 * delta)?, f(-2.0 * delta)?);
    Ok((8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * delta))
}

fn default_delta(jet: &MetricJet, h: &Sym2<Jet>) -> Result<f64> {
    let g0 = jet.g.value()?.max_abs();
    let h0 = h
        .data()
        .iter()
        .map(|j| j.coeffs().iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .fold(0.0, f64::max);
    if h0 == 0.0 {
        return Err(Error::Precondition("zero perturbation direction".into()));
    }
    Ok(1e-3 * g0 / h0)
}

/// `d/dt Q(g + t h)` at `t = 0` by a fourth-order central difference.
pub fn linearize_q_fd(jet: &MetricJet, h: &Sym2<Jet>, delta: Option<f64>) -> Result<f64> {
    need(Some(jet.order()), 4, "Q linearization")?;
    let delta = match delta {
        Some(d) => d,
        None => default_delta(jet, h)?,
    };
    central_difference(delta, |t| Tower::new(&jet.perturbed(h, t)?)?.q_curvature().value())
}

/// `d/dt R(g + t h)` at `t = 0` by a fourth-order central difference.
pub fn linearize_scalar_fd(jet: &MetricJet, h: &Sym2<Jet>, delta: Option<f64>) -> Result<f64> {
    need(Some(jet.order()), 2, "scalar curvature linearization")?;
    let delta = match delta {
        Some(d) => d,
        None => default_delta(jet, h)?,
    };
    central_difference(delta, |t| Tower::new(&jet.perturbed(h, t)?)?.scalar.value())
}

/// Closed-form `γh = −Δ tr h + δ²h − ⟨Ric, h⟩`.
pub fn gamma_scalar(jet: &MetricJet, h: &Sym2<Jet>) -> Result<f64> {
    Tower::new(jet)?.gamma_scalar(h).value()
}

/// [`divergence_identities`] for metrics known only pointwise: `J` and `Q`
/// are computed from order-4 jets on a line stencil through the point and
/// differentiated by fourth-order central differences.
pub fn divergence_identities_fd(
    jet_at: impl Fn(&[f64]) -> Result<MetricJet>,
    point: &[f64],
    step: f64,
) -> Result<DivergenceResidual> {
    let n = point.len();
    let centre = jet_at(point)?;
    let t0 = Tower::new(&centre)?;
    let eval = |x: &[f64]| -> Result<(Sym2, f64)> {
        let t = Tower::new(&jet_at(x)?)?;
        let q = t.q_curvature();
        let (j, _) = t.j_tensor_from_parts(&q, &t.bach_definition(), &t.t_tensor());
        Ok((j.value()?, q.value()?))
    };
    let (j0, q0) = eval(point)?;
    let mut dj = Vec::with_capacity(n);
    let mut dq = Vec::with_capacity(n);
    for k in 0..n {
        let mut samples = Vec::with_capacity(4);
        for o in [-2.0, -1.0, 1.0, 2.0] {
            let mut x = point.to_vec();
            x[k] += o * step;
            samples.push(eval(&x)?);
        }
        let d = |a: f64, b: f64, c: f64, e: f64| (a - 8.0 * b + 8.0 * c - e) / (12.0 * step);
        dq.push(d(samples[0].1, samples[1].1, samples[2].1, samples[3].1));
        dj.push(Sym2::from_fn(n, |i, l| {
            d(
                *samples[0].0.get(i, l),
                *samples[1].0.get(i, l),
                *samples[2].0.get(i, l),
                *samples[3].0.get(i, l),
            )
        }));
    }
    let gamma = t0.conn.christoffel.value()?;
    let gi = &t0.conn.at.g_inv;
    let div = |s: &Sym2, ds: &[Sym2]| -> Vec<f64> {
        (0..n)
            .map(|k| {
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let mut nab = *ds[i].get(j, k);
                        for m in 0..n {
                            nab -= gamma.get(&[m, i, j]) * s.get(m, k) + gamma.get(&[m, i, k]) * s.get(j, m);
                        }
                        acc += gi.get(i, j) * nab;
                    }
                }
                acc
            })
            .collect()
    };
    let div_j = div(&j0, &dj);
    let quarter_dq = dq.iter().map(|v| 0.25 * v).collect();
    let (div_sj, sj_rhs, trace_sj) = if n != 4 {
        let nf = n as f64;
        let c = 3.0 / (4.0 * (nf - 1.0));
        let sj_of = |j: &Sym2, q: f64, g: &Sym2| j.minus(&g.scaled(c * q)).scaled(1.0 / (nf - 4.0));
        let g0 = &t0.conn.at.g;
        // ∂(J − c Q g) = ∂J − c(∂Q g + Q ∂g)
        let dg: Vec<Sym2> = (0..n)
            .map(|k| {
                let mut alpha = vec![0; n];
                alpha[k] = 1;
                centre.partial(&alpha)
            })
            .collect::<Result<_>>()?;
        let dsj: Vec<Sym2> = (0..n)
            .map(|k| {
                dj[k]
                    .minus(&g0.scaled(c * dq[k]).plus(&dg[k].scaled(c * q0)))
                    .scaled(1.0 / (nf - 4.0))
            })
            .collect();
        let sj = sj_of(&j0, q0, g0);
        let d = div(&sj, &dsj);
        let tr = tensor::trace(gi, &sj)?;
        (
            Some(d),
            Some(dq.iter().map(|v| v / (4.0 * (nf - 1.0))).collect()),
            Some(tr),
        )
    } else {
        (None, None, None)
    };
    Ok(DivergenceResidual {
        div_j,
        quarter_dq,
        div_sj,
        sj_rhs,
        trace_sj,
        q: q0,
        term_scale: (j0.max_abs() + q0.abs()) * gamma.max_abs() + dj.iter().map(Sym2::max_abs).fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::coordinate_jets;
    use approx::assert_relative_eq;

    fn jet_from(n: usize, order: usize, point: &[f64], f: impl Fn(&[Jet]) -> Sym2<Jet>) -> MetricJet {
        let x = coordinate_jets(point, order);
        assert_eq!(x.len(), n);
        MetricJet::new(point.to_vec(), f(&x)).unwrap()
    }

    fn flat(n: usize, order: usize) -> MetricJet {
        jet_from(n, order, &vec![0.1; n], |x| {
            Sym2::from_fn(n, |i, j| if i == j { &x[0] * 0.0 + 1.0 } else { &x[0] * 0.0 })
        })
    }

    #[test]
    fn q_constants_in_dimension_four() {
        assert_relative_eq!(a_coeff(4), -1.0 / 6.0);
        assert_relative_eq!(b_coeff(4), -0.5);
        assert_relative_eq!(c_coeff(4), 1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn flat_christoffels_vanish() {
        let c = Connection::new(&flat(3, 2)).unwrap();
        assert_eq!(c.christoffel.value().unwrap().max_abs(), 0.0);
    }

    #[test]
    fn conformal_plane_christoffel() {
        // g = e^{2x₁} δ on ℝ² (embedded as n = 2 jets): Γ¹₁₁ = 1
        let j = jet_from(2, 2, &[0.3, -0.2], |x| {
            let e = (&x[0] * 2.0).exp();
            Sym2::from_fn(2, |i, k| if i == k { e.clone() } else { &e * 0.0 })
        });
        let c = Connection::new(&j).unwrap();
        assert_relative_eq!(c.gamma(0, 0, 0).value().unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn polar_coordinates_christoffel() {
        // flat ℝ² in polar coordinates: Γ^r_{θθ} = −r
        let j = jet_from(2, 2, &[1.7, 0.4], |x| {
            let zero = &x[0] * 0.0;
            Sym2::from_fn(2, |i, k| match (i, k) {
                (0, 0) => &zero + 1.0,
                (1, 1) => x[0].square(),
                _ => zero.clone(),
            })
        });
        let c = Connection::new(&j).unwrap();
        assert_relative_eq!(c.gamma(0, 1, 1).value().unwrap(), -1.7, epsilon = 1e-14);
        assert_relative_eq!(c.gamma(1, 0, 1).value().unwrap(), 1.0 / 1.7, epsilon = 1e-14);
    }

    #[test]
    fn flat_bundle_is_zero() {
        let b = CurvatureBundle::from_jet(&flat(5, 4)).unwrap();
        assert_eq!(b.riemann.max_abs(), 0.0);
        assert_eq!(b.q, 0.0);
        assert_eq!(b.j_tensor.max_abs(), 0.0);
        assert_eq!(b.checks.trace_j_minus_q, 0.0);
    }

    #[test]
    fn insufficient_order_is_a_hard_error() {
        let err = CurvatureBundle::from_jet(&flat(4, 3)).unwrap_err();
        assert!(matches!(err, Error::InsufficientOrder { needed: 4, .. }));
        let tower = Tower::new(&flat(4, 3)).unwrap();
        assert!(tower.q_curvature().value().is_err());
        assert!(tower.cotton().value().is_ok());
        let err = divergence_identities(&flat(4, 4)).unwrap_err();
        assert!(matches!(err, Error::InsufficientOrder { needed: 5, .. }));
    }

    #[test]
    fn j_schouten_refused_in_dimension_four() {
        let t = Tower::new(&flat(4, 4)).unwrap();
        let q = t.q_curvature();
        let (j, _) = t.j_tensor();
        assert!(matches!(t.j_schouten(&j, &q), Err(Error::UnsupportedDimension(4, _))));
    }

    #[test]
    fn gamma_star_of_linear_function_on_flat_space() {
        let m = flat(3, 4);
        let f = ScalarJet {
            point: m.point.clone(),
            f: coordinate_jets(&m.point, 4)[0].clone(),
        };
        assert_eq!(gamma_star_scalar(&f, &m).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn bilaplacian_of_quartic_on_flat_space() {
        let m = flat(4, 4);
        let x = coordinate_jets(&m.point, 4);
        let f = ScalarJet {
            point: m.point.clone(),
            f: x[0].powf(4.0),
        };
        assert_relative_eq!(paneitz(&f, &m).unwrap(), 24.0, epsilon = 1e-12);
    }
}
