//! User metrics given as a table of expressions in the chart coordinates.

use std::sync::Arc;

use meval::{ContextProvider, Expr, FuncEvalError};
use serde::{Deserialize, Serialize};

use qtower::jets::{ChartDomain, FdField, Interval, MetricField};
use qtower::metrics::Pointwise;
use qtower::tensor::Sym2;

use crate::error::CliError;

/// The `[user]` table of a config file.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct UserMetric {
    /// Coordinate names, in order.
    pub coords: Vec<String>,
    /// One `[lo, hi]` interval per coordinate.
    pub domain: Vec<[f64; 2]>,
    /// Every axis periodic: the chart is a closed torus.
    #[serde(default)]
    pub periodic: bool,
    /// Either the full `n × n` matrix or its upper triangle, row by row.
    pub g: Vec<Vec<String>>,
    #[serde(default)]
    pub chi: Option<i64>,
}

/// Variables of one evaluation plus the supported functions.
struct Point<'a> {
    names: &'a [String],
    x: &'a [f64],
}

impl ContextProvider for Point<'_> {
    fn get_var(&self, name: &str) -> Option<f64> {
        if let Some(i) = self.names.iter().position(|n| n == name) {
            return Some(self.x[i]);
        }
        match name {
            "pi" => Some(std::f64::consts::PI),
            "e" => Some(std::f64::consts::E),
            _ => None,
        }
    }

    fn eval_func(&self, name: &str, args: &[f64]) -> Result<f64, FuncEvalError> {
        let f: fn(f64) -> f64 = match name {
            "sin" => f64::sin,
            "cos" => f64::cos,
            "exp" => f64::exp,
            "log" | "ln" => f64::ln,
            "sqrt" => f64::sqrt,
            _ => return Err(FuncEvalError::UnknownFunction),
        };
        match args {
            [a] => Ok(f(*a)),
            _ => Err(FuncEvalError::NumberArgs(1)),
        }
    }
}

fn parse(src: &str) -> Result<Expr, CliError> {
    // accept the typographic operators too
    let ascii: String = src
        .chars()
        .map(|c| match c {
            '×' | '·' => '*',
            '÷' => '/',
            '−' => '-',
            c => c,
        })
        .collect();
    ascii
        .parse::<Expr>()
        .map_err(|e| CliError::Config(format!("cannot parse metric component '{src}': {e}")))
}

impl UserMetric {
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    fn components(&self) -> Result<Vec<Expr>, CliError> {
        let n = self.dim();
        let full = self.g.len() == n && self.g.iter().all(|r| r.len() == n);
        let upper = self.g.len() == n && self.g.iter().enumerate().all(|(i, r)| r.len() == n - i);
        if !(full || upper) {
            return Err(CliError::Config(format!(
                "user metric g must be a {n}×{n} matrix or its upper triangle"
            )));
        }
        let text = |i: usize, j: usize| -> &str {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            if full {
                &self.g[a][b]
            } else {
                &self.g[a][b - a]
            }
        };
        if full {
            for i in 0..n {
                for j in 0..i {
                    if self.g[i][j].trim() != self.g[j][i].trim() {
                        return Err(CliError::Config(format!(
                            "user metric g is not symmetric at ({i}, {j})"
                        )));
                    }
                }
            }
        }
        (0..n * n).map(|k| parse(text(k / n, k % n))).collect()
    }

    fn chart_domain(&self) -> Result<ChartDomain, CliError> {
        if self.domain.len() != self.dim() {
            return Err(CliError::Config(format!(
                "user metric has {} coordinates but {} domain intervals",
                self.dim(),
                self.domain.len()
            )));
        }
        let mut axes = Vec::new();
        for (name, [lo, hi]) in self.coords.iter().zip(&self.domain) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(CliError::Config(format!("empty domain interval for {name}")));
            }
            axes.push(Interval {
                lo: *lo,
                hi: *hi,
                periodic: self.periodic,
            });
        }
        Ok(ChartDomain::Box(axes))
    }

    /// The metric as a finite-difference field.
    pub fn field(&self, chi: Option<i64>, fd_step: Option<f64>) -> Result<Arc<dyn MetricField>, CliError> {
        let n = self.dim();
        let mut seen = self.coords.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != n || self.coords.iter().any(|c| matches!(c.as_str(), "pi" | "e")) {
            return Err(CliError::Config(
                "user coordinate names must be distinct and not 'pi' or 'e'".into(),
            ));
        }
        let exprs = self.components()?;
        let domain = self.chart_domain()?;
        let names = self.coords.clone();
        // one evaluation at the centre surfaces unknown names at load time
        let centre = domain.sample(&vec![0.5; n]);
        for e in &exprs {
            e.eval_with_context(Point {
                names: &names,
                x: &centre,
            })
            .map_err(|err| CliError::Config(format!("user metric: {err}")))?;
        }
        let eval = move |x: &[f64]| {
            let mut out = Vec::with_capacity(n * n);
            for e in &exprs {
                let v = e
                    .eval_with_context(Point { names: &names, x })
                    .map_err(|_| qtower::Error::NonFinite("user metric expression"))?;
                out.push(v);
            }
            Sym2::new(n, &out)
        };
        let name = format!("user({})", self.coords.join(","));
        let base = Pointwise::new(name, domain, self.chi.or(chi), Arc::new(eval))?;
        Ok(Arc::new(FdField::new(Arc::new(base), fd_step)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polar() -> UserMetric {
        UserMetric {
            coords: vec!["x".into(), "y".into(), "z".into()],
            domain: vec![[-1.0, 1.0]; 3],
            periodic: false,
            g: vec![
                vec!["exp(2*x)".into(), "0".into(), "0".into()],
                vec!["exp(2*x)".into(), "0".into()],
                vec!["exp(2*x)".into()],
            ],
            chi: None,
        }
    }

    #[test]
    fn upper_triangle_is_symmetrized() {
        let f = polar().field(None, None).unwrap();
        let g = f.metric_at(&[0.5, 0.0, 0.0]).unwrap();
        assert!((*g.get(1, 1) - 1f64.exp()).abs() < 1e-15);
        assert_eq!(g.get(0, 2), g.get(2, 0));
    }

    #[test]
    fn unknown_names_are_rejected_at_load() {
        let mut m = polar();
        m.g[0][0] = "exp(2*w)".into();
        assert!(m.field(None, None).is_err());
        m.g[0][0] = "tanh(x)".into();
        assert!(m.field(None, None).is_err());
    }

    #[test]
    fn typographic_operators_parse() {
        let e = parse("2×x − 1÷4").unwrap();
        let v = e
            .eval_with_context(Point {
                names: &["x".into()],
                x: &[1.0],
            })
            .unwrap();
        assert_eq!(v, 1.75);
    }
}
