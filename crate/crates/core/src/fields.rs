//! Smooth test fields `f` and `h` for adjointness and identity checks.
//!
//! Chart fields are trigonometric, so they live on tori as well as on open
//! charts. Ambient fields are polynomials in the embedding coordinates and
//! pull back to every chart of an embedded manifold consistently; a pulled
//! back tensor loses one jet order (it uses `∂X`), so evaluate it one order
//! higher than needed.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::jets::{FieldInput, ScalarFormula, Sym2Formula};
use crate::taylor::Jet;
use crate::tensor::Sym2;

#[derive(Clone)]
pub struct ScalarField {
    pub label: String,
    pub formula: ScalarFormula,
}

#[derive(Clone)]
pub struct Sym2Field {
    pub label: String,
    pub formula: Sym2Formula,
}

fn zero_like(x: &Jet) -> Jet {
    Jet::zero(x.dim(), x.order().unwrap_or(0))
}

impl ScalarField {
    pub fn constant(v: f64) -> Self {
        ScalarField {
            label: format!("const({v})"),
            formula: Arc::new(move |inp: &FieldInput| &zero_like(&inp.coords[0]) + v),
        }
    }

    /// `a₀ + Σ a_k cos(x_k + p_k) + b sin(x_i + x_j)`.
    pub fn chart_trig(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a0: f64 = rng.gen_range(0.5..1.5);
        let terms: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..6.3)))
            .collect();
        let b: f64 = rng.gen_range(-0.5..0.5);
        let i = rng.gen_range(0..n);
        let j = (i + 1 + rng.gen_range(0..n - 1)) % n;
        ScalarField {
            label: format!("chart-trig(seed={seed})"),
            formula: Arc::new(move |inp: &FieldInput| {
                let x = inp.coords;
                let mut f = &zero_like(&x[0]) + a0;
                for (xk, &(a, p)) in x.iter().zip(&terms) {
                    f.add_scaled(&(xk + p).cos(), a);
                }
                f.add_scaled(&(&x[i] + &x[j]).sin(), b);
                f
            }),
        }
    }

    /// `a₀ + Σ a_k X_k + Σ b_kl X_k X_l` in ambient coordinates `X ∈ ℝ^m`.
    pub fn ambient_poly(m: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a0: f64 = rng.gen_range(0.5..1.5);
        let a: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..m * m).map(|_| rng.gen_range(-0.5..0.5)).collect();
        ScalarField {
            label: format!("ambient-poly(seed={seed})"),
            formula: Arc::new(move |inp: &FieldInput| {
                let x = inp.ambient.expect("ambient field needs an embedding");
                let mut f = &zero_like(&x[0]) + a0;
                for k in 0..m {
                    f.add_scaled(&x[k], a[k]);
                    for l in k..m {
                        f.add_scaled(&(&x[k] * &x[l]), b[k * m + l]);
                    }
                }
                f
            }),
        }
    }
}

impl Sym2Field {
    /// `h_ij = C_ij + Σ_m A_ijm cos(x_m + P_ijm)`.
    pub fn chart_trig(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
        let mut coef = Vec::new();
        for i in 0..n {
            for _ in i..n {
                let c: f64 = rng.gen_range(-1.0..1.0);
                let terms: Vec<(f64, f64)> = (0..n)
                    .map(|_| (rng.gen_range(-0.5..0.5), rng.gen_range(0.0..6.3)))
                    .collect();
                coef.push((c, terms));
            }
        }
        Sym2Field {
            label: format!("chart-trig(seed={seed})"),
            formula: Arc::new(move |inp: &FieldInput| {
                let x = inp.coords;
                let mut it = coef.iter();
                let mut upper: Vec<Jet> = Vec::with_capacity(coef.len());
                for _ in 0..coef.len() {
                    let (c, terms) = it.next().expect("coefficient");
                    let mut h = &zero_like(&x[0]) + *c;
                    for (xm, &(a, p)) in x.iter().zip(terms) {
                        h.add_scaled(&(xm + p).cos(), a);
                    }
                    upper.push(h);
                }
                Sym2::from_fn(n, |i, j| upper[i * n - i * (i + 1) / 2 + j].clone())
            }),
        }
    }

    /// Pullback of the ambient tensor `H_ab(X) = C_ab + Σ_k D_abk X_k`.
    pub fn ambient_linear(m: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa3b1_e4d2);
        let mut big = vec![(0.0, vec![0.0; m]); m * m];
        for a in 0..m {
            for b in a..m {
                let c: f64 = rng.gen_range(-1.0..1.0);
                let d: Vec<f64> = (0..m).map(|_| rng.gen_range(-0.5..0.5)).collect();
                big[a * m + b] = (c, d.clone());
                big[b * m + a] = (c, d);
            }
        }
        Sym2Field {
            label: format!("ambient-linear(seed={seed})"),
            formula: Arc::new(move |inp: &FieldInput| {
                let x = inp.ambient.expect("ambient field needs an embedding");
                let n = inp.coords.len();
                let h_amb: Vec<Jet> = big
                    .iter()
                    .map(|(c, d)| {
                        let mut v = &zero_like(&x[0]) + *c;
                        for (xk, &dk) in x.iter().zip(d) {
                            v.add_scaled(xk, dk);
                        }
                        v
                    })
                    .collect();
                pullback(x, &h_amb, n)
            }),
        }
    }
}

/// `h_ij = H_ab ∂_iX^a ∂_jX^b`, with `H` row-major `m×m`.
pub fn pullback(x: &[Jet], h_amb: &[Jet], n: usize) -> Sym2<Jet> {
    let m = x.len();
    let dx: Vec<Vec<Jet>> = x.iter().map(|xa| (0..n).map(|i| xa.d(i)).collect()).collect();
    Sym2::from_fn(n, |i, j| {
        let mut acc = Jet::zero(x[0].dim(), x[0].order().unwrap_or(1).saturating_sub(1));
        for a in 0..m {
            for b in 0..m {
                let hb = &h_amb[a * m + b] * &dx[b][j];
                acc.add_mul(&dx[a][i], &hb);
            }
        }
        acc
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::coordinate_jets;

    #[test]
    fn fields_are_deterministic_in_the_seed() {
        let p = [0.3, -0.1, 0.7];
        let x = coordinate_jets(&p, 2);
        let inp = FieldInput {
            coords: &x,
            ambient: None,
        };
        let a = (ScalarField::chart_trig(3, 7).formula)(&inp);
        let b = (ScalarField::chart_trig(3, 7).formula)(&inp);
        let c = (ScalarField::chart_trig(3, 8).formula)(&inp);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let h = (Sym2Field::chart_trig(3, 7).formula)(&inp);
        assert_eq!(h.get(0, 2), h.get(2, 0));
    }

    #[test]
    fn pullback_of_identity_is_induced_metric() {
        // the unit circle-times-line embedding (cos t, sin t, s) induces δ
        let p = [0.4, 1.3];
        let c = coordinate_jets(&p, 3);
        let x = vec![c[0].cos(), c[0].sin(), c[1].clone()];
        let id: Vec<Jet> = (0..9)
            .map(|e| Jet::constant(2, 3, if e % 4 == 0 { 1.0 } else { 0.0 }))
            .collect();
        let g = pullback(&x, &id, 2).value().unwrap();
        assert!((g.get(0, 0) - 1.0).abs() < 1e-15 && g.get(0, 1).abs() < 1e-15 && (g.get(1, 1) - 1.0).abs() < 1e-15);
    }
}
