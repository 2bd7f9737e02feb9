//! Built-in benchmark families. All of them share the quartic confinement
//! `‖x‖⁴/4`, which makes every sublevel set bounded and every critical set
//! compact.

use serde::{Deserialize, Serialize};

use super::{Energy, EnergyModel};
use crate::error::{Error, Result};
use crate::{Matrix, Vector};

fn check_positive(label: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Construction(format!("{label} must be positive and finite, got {value}")))
    }
}

/// Gradient and Hessian of `‖x‖⁴/4`.
fn confinement(x: &Vector) -> (f64, Vector, Matrix) {
    let r2 = x.norm_squared();
    let n = x.len();
    let value = 0.25 * r2 * r2;
    let grad = x * r2;
    let hess = Matrix::identity(n, n) * r2 + x * x.transpose() * 2.0;
    (value, grad, hess)
}

/// `F(t,x) = (t_c − t)x₁²/2 + Σ_{i≥2} xᵢ²/2 + ‖x‖⁴/4`.
///
/// `λ₁(t) = t_c − t` with eigenvector along the first axis, so
/// `Λ(t) = t_c·t − t²/2` and the delayed time is `t* = 2t_c`.
#[derive(Debug, Clone)]
pub struct QuarticFamily {
    name: String,
    n: usize,
    t_c: f64,
    horizon: f64,
}

impl QuarticFamily {
    pub fn new(n: usize, t_c: f64, horizon: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Construction("dimension must be at least 1".into()));
        }
        check_positive("t_c", t_c)?;
        check_positive("horizon", horizon)?;
        Ok(Self {
            name: format!("quartic-{n}d"),
            n,
            t_c,
            horizon,
        })
    }

    fn diagonal(&self, t: f64) -> Vector {
        let mut d = Vector::from_element(self.n, 1.0);
        d[0] = self.t_c - t;
        d
    }
}

impl Energy for QuarticFamily {
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
        let d = self.diagonal(t);
        let quad: f64 = d.iter().zip(x.iter()).map(|(a, v)| a * v * v).sum();
        0.5 * quad + confinement(x).0
    }
    fn gradient(&self, t: f64, x: &Vector) -> Vector {
        self.diagonal(t).component_mul(x) + confinement(x).1
    }
    fn hessian(&self, t: f64, x: &Vector) -> Matrix {
        Matrix::from_diagonal(&self.diagonal(t)) + confinement(x).2
    }
    fn time_derivative(&self, _t: f64, x: &Vector) -> f64 {
        -0.5 * x[0] * x[0]
    }
}

pub fn make_quartic_family(n: usize, t_c: f64, horizon: f64) -> Result<EnergyModel> {
    Ok(EnergyModel::new(QuarticFamily::new(n, t_c, horizon)?))
}

/// Scalar time profile `φ(t) = Σ c_k t^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeProfile {
    pub coefficients: Vec<f64>,
}

impl TimeProfile {
    pub fn polynomial(coefficients: Vec<f64>) -> Self {
        Self { coefficients }
    }

    pub fn constant(c: f64) -> Self {
        Self::polynomial(vec![c])
    }

    pub fn value(&self, t: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * t + k as f64 * c)
    }
}

/// `F(t,x) = ⟨(I − φ(t)B)x, x⟩/2 + ‖x‖⁴/4` with a fixed symmetric `B`.
///
/// `A(t) = I − φ(t)B` commutes with `A(0)`, so its eigenbasis never moves.
#[derive(Debug, Clone)]
pub struct CommutingFamily {
    name: String,
    base: Matrix,
    phi: TimeProfile,
    horizon: f64,
}

impl CommutingFamily {
    pub fn new(base: Matrix, phi: TimeProfile, horizon: f64) -> Result<Self> {
        let n = base.nrows();
        if n == 0 || base.ncols() != n {
            return Err(Error::Construction("base must be a nonempty square matrix".into()));
        }
        if base.iter().any(|v| !v.is_finite()) {
            return Err(Error::Construction("base has non-finite entries".into()));
        }
        if (&base - base.transpose()).amax() > 1e-12 * (1.0 + base.amax()) {
            return Err(Error::Construction("base must be symmetric".into()));
        }
        if phi.coefficients.is_empty() || phi.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Construction("phi needs finite coefficients".into()));
        }
        check_positive("horizon", horizon)?;
        Ok(Self {
            name: format!("commuting-{n}d"),
            base,
            phi,
            horizon,
        })
    }

    fn linear_part(&self, t: f64) -> Matrix {
        let n = self.base.nrows();
        Matrix::identity(n, n) - &self.base * self.phi.value(t)
    }
}

impl Energy for CommutingFamily {
    fn name(&self) -> &str {
        &self.name
    }
    fn dimension(&self) -> usize {
        self.base.nrows()
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn value(&self, t: f64, x: &Vector) -> f64 {
        0.5 * x.dot(&(self.linear_part(t) * x)) + confinement(x).0
    }
    fn gradient(&self, t: f64, x: &Vector) -> Vector {
        self.linear_part(t) * x + confinement(x).1
    }
    fn hessian(&self, t: f64, x: &Vector) -> Matrix {
        self.linear_part(t) + confinement(x).2
    }
    fn time_derivative(&self, t: f64, x: &Vector) -> f64 {
        -0.5 * self.phi.derivative(t) * x.dot(&(&self.base * x))
    }
}

pub fn make_commuting_family(base: Matrix, phi: TimeProfile, horizon: f64) -> Result<EnergyModel> {
    Ok(EnergyModel::new(CommutingFamily::new(base, phi, horizon)?))
}

/// Planar family whose Hessian at the origin keeps the quartic spectrum
/// `{t_c − t, 1}` while its eigenbasis rotates at rate `ω`:
/// `A(t) = R(ωt)·diag(t_c − t, 1)·R(ωt)ᵀ`.
#[derive(Debug, Clone)]
pub struct RotatingFamily {
    name: String,
    omega: f64,
    t_c: f64,
    horizon: f64,
}

impl RotatingFamily {
    pub fn new(omega: f64, t_c: f64, horizon: f64) -> Result<Self> {
        if !omega.is_finite() {
            return Err(Error::Construction(format!("omega must be finite, got {omega}")));
        }
        check_positive("t_c", t_c)?;
        check_positive("horizon", horizon)?;
        Ok(Self {
            name: "rotating-2d".into(),
            omega,
            t_c,
            horizon,
        })
    }

    fn rotation(&self, t: f64) -> Matrix {
        let (s, c) = (self.omega * t).sin_cos();
        Matrix::from_row_slice(2, 2, &[c, -s, s, c])
    }

    fn linear_part(&self, t: f64) -> Matrix {
        let r = self.rotation(t);
        let d = Matrix::from_diagonal(&Vector::from_vec(vec![self.t_c - t, 1.0]));
        &r * d * r.transpose()
    }

    fn linear_part_rate(&self, t: f64) -> Matrix {
        // d/dt (R D Rᵀ) = ω(JA − AJ) + R D' Rᵀ with R' = ωJR.
        let j = Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let a = self.linear_part(t);
        let r = self.rotation(t);
        let d_rate = Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, 0.0]));
        (&j * &a - &a * &j) * self.omega + &r * d_rate * r.transpose()
    }
}

impl Energy for RotatingFamily {
    fn name(&self) -> &str {
        &self.name
    }
    fn dimension(&self) -> usize {
        2
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn value(&self, t: f64, x: &Vector) -> f64 {
        0.5 * x.dot(&(self.linear_part(t) * x)) + confinement(x).0
    }
    fn gradient(&self, t: f64, x: &Vector) -> Vector {
        self.linear_part(t) * x + confinement(x).1
    }
    fn hessian(&self, t: f64, x: &Vector) -> Matrix {
        self.linear_part(t) + confinement(x).2
    }
    fn time_derivative(&self, t: f64, x: &Vector) -> f64 {
        0.5 * x.dot(&(self.linear_part_rate(t) * x))
    }
}

pub fn make_rotating_family(omega: f64, t_c: f64, horizon: f64) -> Result<EnergyModel> {
    Ok(EnergyModel::new(RotatingFamily::new(omega, t_c, horizon)?))
}
