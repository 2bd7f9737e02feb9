//! User-supplied polynomial energies given as a coefficient table.
//!
//! Each term is `coefficient · p(t) · Π xᵢ^{kᵢ}` with `p(t) = Σ c_j t^j`.

use serde::{Deserialize, Serialize};

use super::{Energy, EnergyModel, TimeProfile};
use crate::error::{Error, Result};
use crate::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    /// Coefficients of the time polynomial, lowest degree first.
    pub time: Vec<f64>,
    /// Multi-index of exponents, one per coordinate.
    pub powers: Vec<u32>,
    pub coefficient: f64,
}

impl PolyTerm {
    pub fn new(time: Vec<f64>, powers: Vec<u32>, coefficient: f64) -> Self {
        Self {
            time,
            powers,
            coefficient,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PolynomialEnergy {
    name: String,
    n: usize,
    horizon: f64,
    terms: Vec<(TimeProfile, Vec<u32>, f64)>,
}

/// `x^k` with the convention `0^0 = 1`.
fn ipow(x: f64, k: u32) -> f64 {
    if k == 0 {
        1.0
    } else {
        x.powi(k as i32)
    }
}

/// `d/dx x^k` scaled as `k·x^(k−1)`.
fn dpow(x: f64, k: u32) -> f64 {
    if k == 0 {
        0.0
    } else {
        k as f64 * ipow(x, k - 1)
    }
}

fn d2pow(x: f64, k: u32) -> f64 {
    if k < 2 {
        0.0
    } else {
        (k * (k - 1)) as f64 * ipow(x, k - 2)
    }
}

impl PolynomialEnergy {
    pub fn new(name: impl Into<String>, n: usize, horizon: f64, terms: Vec<PolyTerm>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Construction("dimension must be at least 1".into()));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Construction(format!("horizon must be positive, got {horizon}")));
        }
        let mut table = Vec::with_capacity(terms.len());
        for (k, term) in terms.into_iter().enumerate() {
            if term.powers.len() != n {
                return Err(Error::Construction(format!(
                    "term {k} has {} exponents, expected {n}",
                    term.powers.len()
                )));
            }
            if term.time.is_empty()
                || term.time.iter().any(|c| !c.is_finite())
                || !term.coefficient.is_finite()
            {
                return Err(Error::Construction(format!("term {k} has non-finite coefficients")));
            }
            table.push((TimeProfile::polynomial(term.time), term.powers, term.coefficient));
        }
        Ok(Self {
            name: name.into(),
            n,
            horizon,
            terms: table,
        })
    }

    /// `F(t,x) = (t_c − t)x²/2` in one dimension: the linear flow has the
    /// explicit solution `u0·exp(−Λ(t)/ε)`.
    pub fn pure_quadratic(t_c: f64, horizon: f64) -> Result<Self> {
        Self::new(
            "pure-quadratic-1d",
            1,
            horizon,
            vec![PolyTerm::new(vec![0.5 * t_c, -0.5], vec![2], 1.0)],
        )
    }

    fn monomial(&self, powers: &[u32], x: &Vector) -> f64 {
        powers.iter().zip(x.iter()).map(|(&k, &v)| ipow(v, k)).product()
    }
}

impl Energy for PolynomialEnergy {
    fn name(&self) -> &str {
        &self.name
    }
    fn dimension(&self) -> usize {
        self.n
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn value(&self, t: f64, x: &Vector) -> f64 {
        self.terms
            .iter()
            .map(|(p, powers, c)| c * p.value(t) * self.monomial(powers, x))
            .sum()
    }

    fn gradient(&self, t: f64, x: &Vector) -> Vector {
        let mut g = Vector::zeros(self.n);
        for (p, powers, c) in &self.terms {
            let scale = c * p.value(t);
            if scale == 0.0 {
                continue;
            }
            for j in 0..self.n {
                if powers[j] == 0 {
                    continue;
                }
                let mut m = dpow(x[j], powers[j]);
                for i in (0..self.n).filter(|&i| i != j) {
                    m *= ipow(x[i], powers[i]);
                }
                g[j] += scale * m;
            }
        }
        g
    }

    fn hessian(&self, t: f64, x: &Vector) -> Matrix {
        let n = self.n;
        let mut h = Matrix::zeros(n, n);
        for (p, powers, c) in &self.terms {
            let scale = c * p.value(t);
            if scale == 0.0 {
                continue;
            }
            for a in 0..n {
                for b in a..n {
                    let mut m = 1.0;
                    for i in 0..n {
                        m *= if a == b && i == a {
                            d2pow(x[i], powers[i])
                        } else if i == a || i == b {
                            dpow(x[i], powers[i])
                        } else {
                            ipow(x[i], powers[i])
                        };
                        if m == 0.0 {
                            break;
                        }
                    }
                    h[(a, b)] += scale * m;
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
        }
        h
    }

    fn time_derivative(&self, t: f64, x: &Vector) -> f64 {
        self.terms
            .iter()
            .map(|(p, powers, c)| c * p.derivative(t) * self.monomial(powers, x))
            .sum()
    }
}

pub fn make_polynomial(
    name: impl Into<String>,
    n: usize,
    horizon: f64,
    terms: Vec<PolyTerm>,
) -> Result<EnergyModel> {
    Ok(EnergyModel::new(PolynomialEnergy::new(name, n, horizon, terms)?))
}
