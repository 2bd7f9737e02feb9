use serde::Serialize;

use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::integrator::{dissipation_integral, Trajectory};
use crate::limit::sweep::sample_directions;
use crate::limit::MuSelection;
use crate::spectral::SpectralProfile;
use crate::Vector;

/// Relative slack for rounding in the precondition checks.
const ROUNDOFF: f64 = 1e-12;

/// Constants entering the escape estimates.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DiagnosticBounds {
    /// Margin with `‖B(t, u)‖ ≤ η‖u‖` for `‖u‖ ≤ μ`.
    pub eta: f64,
    /// Cone opening, `‖u0‖² = (1 + δ)⟨u0, e₁⟩²`.
    pub delta: f64,
    pub mu: f64,
    /// `min ‖∇ₓF(t*, ·)‖` over `μ/2 ≤ ‖x‖ ≤ μ`.
    pub g_mu: f64,
    /// Isolation radius of the trivial equilibrium at `t*`.
    pub xi: f64,
}

impl DiagnosticBounds {
    pub fn new(eta: f64, delta: f64, mu: f64, g_mu: f64, xi: f64) -> Result<Self> {
        let b = Self {
            eta,
            delta,
            mu,
            g_mu,
            xi,
        };
        for (name, v) in [("eta", eta), ("delta", delta), ("mu", mu), ("G_mu", g_mu), ("xi", xi)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Options(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(b)
    }

    /// Bounds for the initial data `u0`, with `η` and `ξ` from the `μ` selection.
    pub fn for_initial(
        model: &EnergyModel,
        profile: &SpectralProfile,
        t_star: f64,
        selection: &MuSelection,
        u0: &Vector,
    ) -> Result<Self> {
        Self::new(
            selection.eta,
            cone_delta(u0, &profile.e1)?,
            selection.mu,
            annulus_gradient_min(model, t_star, selection.mu)?,
            selection.r_iso,
        )
    }
}

/// `‖u0‖²/⟨u0, e₁⟩² − 1`, clipped below at `1e-6`.
pub fn cone_delta(u0: &Vector, e1: &Vector) -> Result<f64> {
    let proj = u0.dot(e1);
    if proj == 0.0 {
        return Err(Error::Precondition(
            "initial data has no component along e₁".into(),
        ));
    }
    let ratio = u0.norm_squared() / (proj * proj);
    Ok((ratio - 1.0).max(1e-6))
}

/// Sampled `min ‖∇ₓF(t, x)‖` over the annulus `μ/2 ≤ ‖x‖ ≤ μ`.
pub fn annulus_gradient_min(model: &EnergyModel, t: f64, mu: f64) -> Result<f64> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::Domain(format!("annulus radius must be positive, got {mu}")));
    }
    let dirs = sample_directions(model.dimension(), 400, 11);
    let radii = 65;
    let mut best = f64::INFINITY;
    for d in &dirs {
        for k in 0..radii {
            let r = 0.5 * mu * (1.0 + k as f64 / (radii - 1) as f64);
            best = best.min(model.gradient(t, &(d * r))?.norm());
        }
    }
    Ok(best)
}

/// Pointwise verdict of one inequality in log form.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundVerdict {
    pub ok: bool,
    /// Smallest `rhs − lhs`; negative values are violations.
    pub worst_slack: f64,
    pub worst_at: f64,
}

impl BoundVerdict {
    fn new() -> Self {
        Self {
            ok: true,
            worst_slack: f64::INFINITY,
            worst_at: f64::NAN,
        }
    }

    fn record(&mut self, t: f64, slack: f64, tol: f64) {
        if slack < self.worst_slack {
            self.worst_slack = slack;
            self.worst_at = t;
        }
        if slack < -tol {
            self.ok = false;
        }
    }
}

/// The gap condition `λ⊥ − λ₁ > η((1+δ)^{3/2} + (1+δ))/δ` over the window.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GapCondition {
    pub ok: bool,
    pub required: f64,
    pub min_available: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GronwallReport {
    pub window: (f64, f64),
    pub points: usize,
    /// `‖u(s)‖² ≤ ‖u(a)‖² exp(−(2/ε)∫ₐˢ(λ₁ − η))`.
    pub upper: BoundVerdict,
    /// `|u¹(s)|² ≥ |u¹(a)|² exp(−(2/ε)∫ₐˢ(λ₁ + η√(1+δ)))`.
    pub lower: BoundVerdict,
    /// `‖u(s)‖² ≤ (1+δ)|u¹(s)|²`.
    pub cone: BoundVerdict,
    pub gap_condition: GapCondition,
    /// Largest sampled `‖B(t, u)‖/‖u‖` along the trajectory.
    pub remainder_ratio: f64,
}

impl GronwallReport {
    pub fn all_ok(&self) -> bool {
        self.upper.ok && self.lower.ok && self.cone.ok
    }
}

/// Checks the escape estimates pointwise at stored steps in `window`.
/// Fails with [`Error::BoundInapplicable`] when the trajectory leaves the
/// ball of radius `μ` or the remainder exceeds `η` there.
pub fn check_gronwall_bounds(
    model: &EnergyModel,
    traj: &Trajectory,
    profile: &SpectralProfile,
    bounds: &DiagnosticBounds,
    window: (f64, f64),
) -> Result<GronwallReport> {
    let eps = traj
        .eps
        .ok_or_else(|| Error::Precondition("the bounds apply to the singular flow only".into()))?;
    let (a, b) = window;
    if traj.is_empty() || !(a >= traj.start() && b <= traj.end() && a < b) {
        return Err(Error::Domain(format!("window [{a}, {b}] outside trajectory span")));
    }
    let e1 = &profile.e1;
    let mut idx: Vec<usize> = (0..traj.len())
        .filter(|&k| traj.times[k] >= a && traj.times[k] <= b)
        .collect();
    let start = traj.interpolate_point(a)?;
    let log_mu = bounds.mu.ln();
    let mut remainder_ratio = 0.0f64;
    for &k in &idx {
        let p = traj.point(k);
        let ln = p.log_norm();
        if ln > log_mu + ROUNDOFF {
            return Err(Error::BoundInapplicable(format!(
                "confinement ‖u‖ ≤ μ = {} fails at t = {} (‖u‖ = {})",
                bounds.mu,
                p.t,
                ln.exp()
            )));
        }
        let u = p.state();
        if u.norm() > 0.0 {
            let ratio = model.remainder(p.t, &u)?.norm() / u.norm();
            remainder_ratio = remainder_ratio.max(ratio);
            if ratio > bounds.eta * (1.0 + ROUNDOFF) + ROUNDOFF {
                return Err(Error::BoundInapplicable(format!(
                    "remainder ratio ‖B‖/‖u‖ = {ratio} exceeds η = {} at t = {}",
                    bounds.eta, p.t
                )));
            }
        }
    }
    idx.retain(|&k| traj.times[k] > a);
    let times: Vec<f64> = std::iter::once(a)
        .chain(idx.iter().map(|&k| traj.times[k]))
        .collect();
    let lam = profile.primitive_along(&times)?;
    let quad = 2.0 * profile.quad_tol() / eps;

    let log_n0 = start.log_norm();
    let log_p0 = (start.scaled.dot(e1)).abs().ln() + start.log_scale;
    let root = (1.0 + bounds.delta).sqrt();
    let cone_margin = (1.0 + bounds.delta).ln();

    let mut upper = BoundVerdict::new();
    let mut lower = BoundVerdict::new();
    let mut cone = BoundVerdict::new();
    for (j, &k) in idx.iter().enumerate() {
        let p = traj.point(k);
        let s = p.t - a;
        let d_lam = lam[j + 1] - lam[0];
        let log_n = p.log_norm();
        let log_p = p.scaled.dot(e1).abs().ln() + p.log_scale;

        let rhs = 2.0 * log_n0 - 2.0 / eps * (d_lam - bounds.eta * s);
        upper.record(p.t, rhs - 2.0 * log_n, quad + ROUNDOFF * (1.0 + rhs.abs()));

        let rhs = 2.0 * log_p0 - 2.0 / eps * (d_lam + bounds.eta * root * s);
        lower.record(p.t, 2.0 * log_p - rhs, quad + ROUNDOFF * (1.0 + rhs.abs()));

        let slack = cone_margin + 2.0 * log_p - 2.0 * log_n;
        cone.record(p.t, slack, ROUNDOFF * (1.0 + log_n.abs()));
    }

    let required =
        bounds.eta * ((1.0 + bounds.delta).powf(1.5) + (1.0 + bounds.delta)) / bounds.delta;
    let min_available = profile
        .grid
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= a && t <= b)
        .map(|(k, _)| profile.lambda_perp[k] - profile.eigenvalues[k][0])
        .fold(f64::INFINITY, f64::min);
    Ok(GronwallReport {
        window,
        points: idx.len(),
        upper,
        lower,
        cone,
        gap_condition: GapCondition {
            ok: min_available > required,
            required,
            min_available,
        },
        remainder_ratio,
    })
}

/// Decay before `t*`: `max ‖u‖` on the window against
/// `‖u(0)‖·exp(−min(Λ(s) − η s)/ε)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CollapseCheck {
    pub window: (f64, f64),
    pub max_norm: f64,
    pub bound: f64,
    /// `bound·1.1 − max_norm`, in log form: `ln(1.1·bound) − ln max_norm`.
    pub log_slack: f64,
    pub ok: bool,
}

pub fn check_pre_collapse(
    traj: &Trajectory,
    profile: &SpectralProfile,
    eta: f64,
    window: (f64, f64),
) -> Result<CollapseCheck> {
    let eps = traj
        .eps
        .ok_or_else(|| Error::Precondition("the bound applies to the singular flow only".into()))?;
    let (a, b) = window;
    if traj.is_empty() || !(a >= traj.start() && b <= traj.end() && a < b) {
        return Err(Error::Domain(format!("window [{a}, {b}] outside trajectory span")));
    }
    let idx: Vec<usize> = (0..traj.len())
        .filter(|&k| traj.times[k] >= a && traj.times[k] <= b)
        .collect();
    let times: Vec<f64> = idx.iter().map(|&k| traj.times[k]).collect();
    let lam = profile.primitive_along(&times)?;
    let t0 = traj.start();
    let lam0 = profile.primitive(t0)?.value;
    let min_term = times
        .iter()
        .zip(&lam)
        .map(|(&t, &l)| (l - lam0) - eta * (t - t0))
        .fold(f64::INFINITY, f64::min);
    let log_bound = traj.log_norm(0) - min_term / eps;
    let log_max = idx
        .iter()
        .map(|&k| traj.log_norm(k))
        .fold(f64::NEG_INFINITY, f64::max);
    let log_slack = 1.1f64.ln() + log_bound - log_max;
    Ok(CollapseCheck {
        window,
        max_norm: log_max.exp(),
        bound: log_bound.exp(),
        log_slack,
        ok: log_slack >= 0.0,
    })
}

/// Dissipation over the first crossing of the annulus `μ/2 ≤ ‖u‖ ≤ μ`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyGapReport {
    pub window: (f64, f64),
    pub dissipation: f64,
    /// `μ·G_μ/2`.
    pub bound: f64,
    pub slack: f64,
    pub ok: bool,
}

/// `[t₁, t₂]` where `‖u‖` first reaches `μ/2` and then `μ`.
pub fn annulus_crossing_window(traj: &Trajectory, mu: f64) -> Result<(f64, f64)> {
    let first = |level: f64| -> Result<f64> {
        let ln = level.ln();
        let k = (0..traj.len())
            .find(|&k| traj.log_norm(k) >= ln)
            .ok_or_else(|| Error::NotFound(format!("trajectory never reaches ‖u‖ = {level}")))?;
        if k == 0 {
            return Ok(traj.start());
        }
        let (mut lo, mut hi) = (traj.times[k - 1], traj.times[k]);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if traj.interpolate_point(mid)?.log_norm() >= ln {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * (1.0 + hi.abs()) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    };
    let t1 = first(0.5 * mu)?;
    let t2 = first(mu)?;
    Ok((t1, t2))
}

/// Compares the dissipation over the annulus crossing with `μG_μ/2`.
pub fn check_energy_gap(
    model: &EnergyModel,
    traj: &Trajectory,
    bounds: &DiagnosticBounds,
) -> Result<EnergyGapReport> {
    let window = annulus_crossing_window(traj, bounds.mu)?;
    let dissipation = dissipation_integral(model, traj, window)?;
    let bound = 0.5 * bounds.mu * bounds.g_mu;
    Ok(EnergyGapReport {
        window,
        dissipation,
        bound,
        slack: dissipation - bound,
        ok: dissipation >= bound,
    })
}
