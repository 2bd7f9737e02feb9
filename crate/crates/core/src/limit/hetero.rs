use serde::Serialize;

use crate::critical::{classify, omega_limit, CriticalPoint, OmegaOptions};
use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::limit::Side;
use crate::spectral::{sorted_eigen, SpectralProfile};

/// `⟨w, e₁⟩/‖w‖` at one stored point of the orbit.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AlignmentSample {
    pub s: f64,
    pub norm: f64,
    pub ratio: f64,
}

/// Orbit of the flow frozen at `t*` leaving 0 along `±e₁`.
#[derive(Debug, Clone)]
pub struct Heteroclinic {
    pub t_star: f64,
    pub side: Side,
    pub delta0: f64,
    pub orbit: Trajectory,
    pub omega: CriticalPoint,
    /// Samples over the initial segment where `‖w‖ ≤ 10·δ₀`.
    pub alignment: Vec<AlignmentSample>,
    /// Every alignment ratio has the sign of `side`.
    pub alignment_ok: bool,
    pub warnings: Vec<String>,
}

impl Heteroclinic {
    /// Smallest `|ratio|` over the initial segment.
    pub fn min_alignment(&self) -> f64 {
        self.alignment
            .iter()
            .map(|a| a.ratio.abs())
            .fold(f64::INFINITY, f64::min)
    }
}

fn negative_count(model: &EnergyModel, t: f64) -> Result<(usize, Vec<f64>)> {
    let (values, _) = sorted_eigen(model.linearization(t)?, t)?;
    Ok((values.iter().filter(|&&v| v < 0.0).count(), values))
}

/// Shoots from `sign·δ₀·e₁` with the flow frozen at `t_star` until its
/// ω-limit is reached.
pub fn heteroclinic(
    model: &EnergyModel,
    profile: &SpectralProfile,
    t_star: f64,
    side: Side,
    delta0: f64,
    opts: &OmegaOptions,
) -> Result<Heteroclinic> {
    if !(delta0.is_finite() && delta0 > 0.0) {
        return Err(Error::Domain(format!("delta0 must be positive, got {delta0}")));
    }
    let mut warnings = Vec::new();
    let (negatives, values) = negative_count(model, t_star)?;
    if negatives != 1 || values.get(1).is_some_and(|&v| v <= 0.0) {
        warnings.push(format!(
            "A(t*) has eigenvalues {values:?}; a single negative eigenvalue is expected"
        ));
    }
    let e1 = &profile.e1;
    let w0 = e1 * (side.sign() * delta0);
    let limit = omega_limit(model, t_star, &w0, opts)?;
    let orbit = limit.orbit;
    let mut alignment = Vec::new();
    for k in 0..orbit.len() {
        let w = orbit.state(k);
        let norm = w.norm();
        if norm > 10.0 * delta0 {
            break;
        }
        alignment.push(AlignmentSample {
            s: orbit.times[k],
            norm,
            ratio: w.dot(e1) / norm,
        });
    }
    let alignment_ok =
        !alignment.is_empty() && alignment.iter().all(|a| a.ratio * side.sign() > 0.0);
    if limit.point.norm() <= 1e-6 {
        warnings.push("orbit returned to the trivial equilibrium".into());
    }
    Ok(Heteroclinic {
        t_star,
        side,
        delta0,
        orbit,
        omega: limit.point,
        alignment,
        alignment_ok,
        warnings,
    })
}

/// Predicted post-jump state `u₊(t*)`.
#[derive(Debug, Clone, Serialize)]
pub struct JumpTarget {
    pub point: CriticalPoint,
    pub side: Side,
    /// Hessian of `F(t*, ·)` at the target is positive definite.
    pub positive_definite: bool,
    /// Only the one-dimensional nondegeneracy `F'' ≠ 0` holds.
    pub weak_only: bool,
    /// The target Hessian is singular; the point is only a candidate.
    pub degenerate: bool,
}

impl JumpTarget {
    pub fn hypothesis_ok(&self) -> bool {
        self.positive_definite || self.weak_only
    }
}

/// The ω-limit of the heteroclinic on `side`, checked for strict minimality.
pub fn predict_jump_target(
    model: &EnergyModel,
    profile: &SpectralProfile,
    t_star: f64,
    side: Side,
    opts: &OmegaOptions,
) -> Result<JumpTarget> {
    let (negatives, values) = negative_count(model, t_star)?;
    if negatives != 1 {
        return Err(Error::UnsupportedRegime(format!(
            "A(t*) has {negatives} negative eigenvalues {values:?}, exactly one is required"
        )));
    }
    let het = heteroclinic(model, profile, t_star, side, 1e-4, opts)?;
    let point = classify(model, t_star, &het.omega.vector())?;
    let scale = point
        .hessian_eigenvalues
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-8 * (1.0 + scale);
    let positive_definite = point.hessian_eigenvalues.iter().all(|&v| v > tol);
    let degenerate = point.hessian_eigenvalues.iter().any(|v| v.abs() <= tol);
    let weak_only = !positive_definite && !degenerate && model.dimension() == 1;
    Ok(JumpTarget {
        point,
        side,
        positive_definite,
        weak_only,
        degenerate,
    })
}
