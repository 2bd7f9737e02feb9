//! Time-dependent energies `F(t, x)` driving the gradient flow.
//!
//! User models implement [`Energy`] with analytic gradient and Hessian; the
//! [`EnergyModel`] handle wraps them, checks the time domain and rejects
//! non-finite evaluations.

mod families;
mod polynomial;
mod validate;

use std::fmt;
use std::sync::Arc;

pub use families::{
    make_commuting_family, make_quartic_family, make_rotating_family, CommutingFamily,
    QuarticFamily, RotatingFamily, TimeProfile,
};
pub use polynomial::{make_polynomial, PolyTerm, PolynomialEnergy};
pub use validate::{
    check_coercivity, check_f2, fit_f2, validate_assumptions, AssumptionReport, CoercivityCheck,
    F2Fit, SampleBox, ValidationOptions,
};

use crate::error::{Error, Result};
use crate::{Matrix, Vector};

/// Slack allowed on the time domain `[0, T]` to absorb rounding in step arithmetic.
const TIME_SLACK: f64 = 1e-12;

/// A smooth energy `F : [0,T] × Rⁿ → R` with analytic derivatives in `x` and `t`.
///
/// Implementations must be pure: the same arguments always give the same result.
pub trait Energy: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn dimension(&self) -> usize;
    fn horizon(&self) -> f64;
    fn value(&self, t: f64, x: &Vector) -> f64;
    fn gradient(&self, t: f64, x: &Vector) -> Vector;
    fn hessian(&self, t: f64, x: &Vector) -> Matrix;
    /// Partial derivative `∂ₜF(t, x)`.
    fn time_derivative(&self, t: f64, x: &Vector) -> f64;
}

/// Shared, immutable handle to an [`Energy`].
#[derive(Clone)]
pub struct EnergyModel {
    inner: Arc<dyn Energy>,
}

impl fmt::Debug for EnergyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EnergyModel")
            .field("name", &self.name())
            .field("dimension", &self.dimension())
            .field("horizon", &self.horizon())
            .finish()
    }
}

impl EnergyModel {
    pub fn new<E: Energy + 'static>(energy: E) -> Self {
        Self {
            inner: Arc::new(energy),
        }
    }

    pub fn name(&self) -> &str {
        self.inner.name()
    }

    pub fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    pub fn horizon(&self) -> f64 {
        self.inner.horizon()
    }

    pub fn origin(&self) -> Vector {
        Vector::zeros(self.dimension())
    }

    fn check(&self, t: f64, x: &Vector) -> Result<()> {
        let horizon = self.horizon();
        let slack = TIME_SLACK * horizon.max(1.0);
        if !(t >= -slack && t <= horizon + slack) {
            return Err(Error::Domain(format!(
                "time {t} outside [0, {horizon}] for model {}",
                self.name()
            )));
        }
        if x.len() != self.dimension() {
            return Err(Error::Domain(format!(
                "state has dimension {}, model {} expects {}",
                x.len(),
                self.name(),
                self.dimension()
            )));
        }
        Ok(())
    }

    fn failure(t: f64, x: &Vector) -> Error {
        Error::Evaluation {
            t,
            x: x.iter().copied().collect(),
        }
    }

    pub fn evaluate(&self, t: f64, x: &Vector) -> Result<f64> {
        self.check(t, x)?;
        let value = self.inner.value(t, x);
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Self::failure(t, x))
        }
    }

    pub fn gradient(&self, t: f64, x: &Vector) -> Result<Vector> {
        self.check(t, x)?;
        let g = self.inner.gradient(t, x);
        if g.len() == x.len() && g.iter().all(|v| v.is_finite()) {
            Ok(g)
        } else {
            Err(Self::failure(t, x))
        }
    }

    pub fn hessian(&self, t: f64, x: &Vector) -> Result<Matrix> {
        self.check(t, x)?;
        let h = self.inner.hessian(t, x);
        let n = x.len();
        if h.nrows() == n && h.ncols() == n && h.iter().all(|v| v.is_finite()) {
            Ok(h)
        } else {
            Err(Self::failure(t, x))
        }
    }

    pub fn time_derivative(&self, t: f64, x: &Vector) -> Result<f64> {
        self.check(t, x)?;
        let d = self.inner.time_derivative(t, x);
        if d.is_finite() {
            Ok(d)
        } else {
            Err(Self::failure(t, x))
        }
    }

    /// `A(t) = ∇²ₓF(t, 0)`, the linearization at the trivial equilibrium.
    pub fn linearization(&self, t: f64) -> Result<Matrix> {
        self.hessian(t, &self.origin())
    }

    /// Nonlinear remainder `B(t, x) = ∇ₓF(t, x) − A(t)·x`.
    pub fn remainder(&self, t: f64, x: &Vector) -> Result<Vector> {
        let g = self.gradient(t, x)?;
        let a = self.linearization(t)?;
        Ok(g - a * x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn evaluate_rejects_times_outside_horizon() {
        let model = make_quartic_family(1, 0.5, 1.5).unwrap();
        let x = Vector::from_element(1, 0.1);
        assert!(matches!(model.evaluate(-0.1, &x), Err(Error::Domain(_))));
        assert!(matches!(model.evaluate(1.6, &x), Err(Error::Domain(_))));
        assert!(model.evaluate(1.5, &x).is_ok());
    }

    #[test]
    fn evaluate_rejects_wrong_dimension() {
        let model = make_quartic_family(2, 0.5, 1.5).unwrap();
        let x = Vector::from_element(3, 0.1);
        assert!(matches!(model.gradient(0.0, &x), Err(Error::Domain(_))));
    }

    #[test]
    fn non_finite_values_become_evaluation_errors() {
        let model = make_quartic_family(1, 0.5, 1.5).unwrap();
        let x = Vector::from_element(1, f64::INFINITY);
        match model.evaluate(0.2, &x) {
            Err(Error::Evaluation { t, .. }) => assert_eq!(t, 0.2),
            other => panic!("expected evaluation failure, got {other:?}"),
        }
        let x = Vector::from_element(1, 1e200);
        assert!(matches!(
            model.gradient(0.2, &x),
            Err(Error::Evaluation { .. })
        ));
    }

    #[test]
    fn quartic_evaluations_match_hand_values() {
        let q1 = make_quartic_family(1, 0.5, 1.5).unwrap();
        assert_eq!(q1.evaluate(0.3, &Vector::zeros(1)).unwrap(), 0.0);
        let one = Vector::from_element(1, 1.0);
        assert_relative_eq!(q1.evaluate(0.0, &one).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(q1.gradient(0.0, &one).unwrap()[0], 1.5, epsilon = 1e-15);
        assert_eq!(q1.gradient(0.7, &Vector::zeros(1)).unwrap()[0], 0.0);

        let q2 = make_quartic_family(2, 0.5, 1.5).unwrap();
        let x = Vector::from_vec(vec![0.5f64.sqrt(), 0.0]);
        assert_relative_eq!(q2.evaluate(1.0, &x).unwrap(), -0.0625, epsilon = 1e-15);
        let g = q2.gradient(1.0, &x).unwrap();
        assert!(g.norm() < 1e-15);
    }

    #[test]
    fn remainder_is_the_nonlinear_part() {
        let q1 = make_quartic_family(1, 0.5, 1.5).unwrap();
        let b = q1.remainder(0.0, &Vector::from_element(1, 0.1)).unwrap();
        assert_relative_eq!(b[0], 1e-3, epsilon = 1e-17);

        let q2 = make_quartic_family(2, 0.5, 1.5).unwrap();
        let b = q2.remainder(0.0, &Vector::from_vec(vec![0.1, 0.1])).unwrap();
        assert_relative_eq!(b[0], 0.002, epsilon = 1e-17);
        assert_relative_eq!(b[1], 0.002, epsilon = 1e-17);

        for t in [0.0, 0.4, 1.2] {
            assert_eq!(q2.remainder(t, &Vector::zeros(2)).unwrap().norm(), 0.0);
        }
    }
}
