//! Stiff adaptive integration of `ε u̇ = −∇ₓF(t, u)` and of the frozen-time
//! flow `ẇ = −∇ₓF(t*, w)`.
//!
//! Steps use TR-BDF2 with full Newton on the analytic Hessian. States are
//! stored as `e^ℓ·v` once they drop below `1e-100`, which keeps the
//! exponentially small amplitudes of the delay phase representable.

mod stepper;
mod trajectory;

use serde::{Deserialize, Serialize};

pub use trajectory::{EventRecord, Point, StepRecord, Trajectory};

use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::quadrature::gauss3;
use crate::Vector;
use stepper::{Field, Solver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Rising,
    Falling,
    Either,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    /// `‖u‖ = radius`.
    Norm { radius: f64 },
    /// `u[index] = value`.
    Coordinate { index: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub name: String,
    pub kind: EventKind,
    pub direction: Direction,
    /// Stop the integration at the first occurrence.
    pub terminal: bool,
}

impl EventSpec {
    pub fn norm(name: impl Into<String>, radius: f64) -> Self {
        Self {
            name: name.into(),
            kind: EventKind::Norm { radius },
            direction: Direction::Rising,
            terminal: false,
        }
    }

    pub fn coordinate(name: impl Into<String>, index: usize, value: f64) -> Self {
        Self {
            name: name.into(),
            kind: EventKind::Coordinate { index, value },
            direction: Direction::Either,
            terminal: false,
        }
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn terminal(mut self) -> Self {
        self.terminal = true;
        self
    }
}

/// Switch to a looser relative tolerance once `‖u‖` first reaches `radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Relaxation {
    pub radius: f64,
    pub rtol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Below this amplitude the absolute tolerance shrinks with the state.
    pub amplitude_floor: f64,
    pub max_step: Option<f64>,
    pub min_step: f64,
    pub initial_step: Option<f64>,
    /// Newton stops once its update is this fraction of the error weight.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub events: Vec<EventSpec>,
    pub dense_output: bool,
    pub relax: Option<Relaxation>,
    pub max_steps: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-12,
            amplitude_floor: 1e-4,
            max_step: None,
            min_step: 1e-14,
            initial_step: None,
            newton_tol: 1e-3,
            newton_max_iter: 10,
            events: Vec::new(),
            dense_output: true,
            relax: None,
            max_steps: 5_000_000,
        }
    }
}

impl SolveOptions {
    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn with_event(mut self, event: EventSpec) -> Self {
        self.events.push(event);
        self
    }

    pub fn validate(&self, dimension: usize) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Options(format!("{name} must be positive, got {v}")))
            }
        };
        positive("rtol", self.rtol)?;
        positive("atol", self.atol)?;
        positive("amplitude_floor", self.amplitude_floor)?;
        positive("min_step", self.min_step)?;
        positive("newton_tol", self.newton_tol)?;
        if let Some(h) = self.max_step {
            positive("max_step", h)?;
            if self.min_step >= h {
                return Err(Error::Options(format!(
                    "min_step {} must be below max_step {h}",
                    self.min_step
                )));
            }
        }
        if let Some(h) = self.initial_step {
            positive("initial_step", h)?;
        }
        if self.newton_max_iter == 0 || self.max_steps == 0 {
            return Err(Error::Options("iteration caps must be positive".into()));
        }
        if let Some(r) = &self.relax {
            positive("relaxation radius", r.radius)?;
            positive("relaxed rtol", r.rtol)?;
        }
        for e in &self.events {
            match e.kind {
                EventKind::Norm { radius } => positive("event radius", radius)?,
                EventKind::Coordinate { index, value } => {
                    if index >= dimension || !value.is_finite() {
                        return Err(Error::Options(format!(
                            "event {} refers to coordinate {index} of a {dimension}-vector",
                            e.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_initial(model: &EnergyModel, u0: &Vector) -> Result<()> {
    if u0.len() != model.dimension() {
        return Err(Error::Domain(format!(
            "initial state has dimension {}, model expects {}",
            u0.len(),
            model.dimension()
        )));
    }
    if !u0.iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("initial state is not finite".into()));
    }
    Ok(())
}

/// Solves `ε u̇ = −∇ₓF(t, u)` on `span` from `u0`.
pub fn solve_singular(
    model: &EnergyModel,
    eps: f64,
    u0: &Vector,
    span: (f64, f64),
    opts: &SolveOptions,
) -> Result<Trajectory> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    let (t0, t1) = span;
    let horizon = model.horizon();
    let slack = 1e-12 * horizon.max(1.0);
    if !(t0 >= -slack && t1 <= horizon + slack && t1 > t0) {
        return Err(Error::Domain(format!(
            "span [{t0}, {t1}] is not an interval inside [0, {horizon}]"
        )));
    }
    check_initial(model, u0)?;
    opts.validate(model.dimension())?;
    let mut traj = Trajectory::new(Some(eps), None, opts.dense_output);
    Solver::new(Field::Singular { model, eps }, opts, t0, t1).run(u0, &mut traj)?;
    Ok(traj)
}

/// Solves the frozen-time flow `ẇ = −∇ₓF(t_frozen, w)` on `span` in fast time.
pub fn solve_autonomous(
    model: &EnergyModel,
    t_frozen: f64,
    w0: &Vector,
    span: (f64, f64),
    opts: &SolveOptions,
) -> Result<Trajectory> {
    let (s0, s1) = span;
    if !(s0.is_finite() && s1.is_finite() && s1 > s0) {
        return Err(Error::Domain(format!("span [{s0}, {s1}] is not an interval")));
    }
    model.evaluate(t_frozen, &model.origin())?;
    check_initial(model, w0)?;
    opts.validate(model.dimension())?;
    let mut traj = Trajectory::new(None, Some(t_frozen), opts.dense_output);
    Solver::new(Field::Autonomous { model, t_frozen }, opts, s0, s1).run(w0, &mut traj)?;
    Ok(traj)
}

pub const FIRST_HITTING: &str = "first-hitting";

/// Solves until `‖u_ε‖` first reaches `mu`; returns the trajectory up to
/// that time (or the whole span when it is never reached).
pub fn first_hitting_trajectory(
    model: &EnergyModel,
    eps: f64,
    u0: &Vector,
    mu: f64,
    span: (f64, f64),
    opts: &SolveOptions,
) -> Result<(Option<f64>, Trajectory)> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {mu}")));
    }
    if u0.norm() >= mu {
        return Err(Error::Precondition(format!(
            "initial norm {} is not below the radius {mu}",
            u0.norm()
        )));
    }
    let mut opts = opts.clone();
    opts.events
        .push(EventSpec::norm(FIRST_HITTING, mu).terminal());
    let traj = solve_singular(model, eps, u0, span, &opts)?;
    let hit = traj
        .events
        .iter()
        .find(|e| e.name == FIRST_HITTING)
        .map(|e| e.t);
    Ok((hit, traj))
}

/// First time `t_ε` with `‖u_ε(t_ε)‖ = μ`, or `None` if not reached on `span`.
pub fn first_hitting(
    model: &EnergyModel,
    eps: f64,
    u0: &Vector,
    mu: f64,
    span: (f64, f64),
    opts: &SolveOptions,
) -> Result<Option<f64>> {
    Ok(first_hitting_trajectory(model, eps, u0, mu, span, opts)?.0)
}

fn energy_time(traj: &Trajectory, t: f64) -> f64 {
    traj.frozen_time.unwrap_or(t)
}

/// Largest per-step defect of the energy identity
/// `F(t_{k+1}, u_{k+1}) − F(t_k, u_k) = −∫ ‖∇ₓF‖²/ε + ∫ ∂ₜF`
/// with the integrals taken on the dense output.
pub fn energy_balance_residual(model: &EnergyModel, traj: &Trajectory, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    let mut worst = 0.0f64;
    for k in 0..traj.len().saturating_sub(1) {
        let (a, b) = (traj.times[k], traj.times[k + 1]);
        let fa = model.evaluate(energy_time(traj, a), &traj.state(k))?;
        let fb = model.evaluate(energy_time(traj, b), &traj.state(k + 1))?;
        let integrand = |s: f64| -> Result<f64> {
            let u = traj.segment_point(k, s).state();
            let tau = energy_time(traj, s);
            let g = model.gradient(tau, &u)?;
            let dt = if traj.frozen_time.is_some() {
                0.0
            } else {
                model.time_derivative(tau, &u)?
            };
            Ok(g.norm_squared() / eps - dt)
        };
        let integral = gauss3(integrand, a, b)?;
        worst = worst.max((fb - fa + integral).abs());
    }
    Ok(worst)
}

/// `∫ ‖u̇‖·‖∇ₓF(s, u(s))‖ ds` over `window`, with `u̇ = −∇ₓF/ε` on the dense output.
pub fn dissipation_integral(
    model: &EnergyModel,
    traj: &Trajectory,
    window: (f64, f64),
) -> Result<f64> {
    let (a, b) = window;
    if traj.is_empty() || !(a >= traj.start() && b <= traj.end() && a <= b) {
        return Err(Error::Domain(format!("window [{a}, {b}] outside trajectory span")));
    }
    let inv_eps = 1.0 / traj.eps.unwrap_or(1.0);
    let mut total = 0.0;
    for k in 0..traj.len().saturating_sub(1) {
        let lo = traj.times[k].max(a);
        let hi = traj.times[k + 1].min(b);
        if hi <= lo {
            continue;
        }
        total += gauss3(
            |s| {
                let u = traj.segment_point(k, s).state();
                Ok(model.gradient(energy_time(traj, s), &u)?.norm_squared() * inv_eps)
            },
            lo,
            hi,
        )?;
    }
    Ok(total)
}
