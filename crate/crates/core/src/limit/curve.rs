use serde::Serialize;

use crate::critical::{find_critical_points, newton, CriticalSearch, MATCH_RADIUS};
use crate::energy::{EnergyModel, SampleBox};
use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::spectral::{blowup_time, SpectralProfile};
use crate::Vector;

/// A detected discontinuity of the limit curve.
#[derive(Debug, Clone, Serialize)]
pub struct Jump {
    /// Grid bracket in which the projected state changes branch.
    pub t_left: f64,
    pub t_right: f64,
    /// `t*` when it lies in or just before the bracket, else the bracket midpoint.
    pub time: f64,
    pub u_minus: Vec<f64>,
    /// Post-jump branch continued to `time` by Newton.
    pub u_plus: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitCurve {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub jumps: Vec<Jump>,
    /// Largest `‖Δu‖/Δt` between consecutive grid points away from jumps.
    pub lipschitz: f64,
}

impl LimitCurve {
    pub fn state(&self, k: usize) -> Vector {
        Vector::from_vec(self.states[k].clone())
    }

    /// Limit state at the grid point nearest to `t`.
    pub fn state_near(&self, t: f64) -> Vector {
        let k = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(k, _)| k)
            .unwrap_or(0);
        self.state(k)
    }

    /// Largest `‖u(t)‖` over grid points in `[a, b]`.
    pub fn max_norm_on(&self, a: f64, b: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.states)
            .filter(|(t, _)| **t >= a && **t <= b)
            .map(|(_, s)| s.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Nearest critical point of `F(t, ·)` to `x`, with the ambiguity check.
fn project(
    model: &EnergyModel,
    t: f64,
    x: &Vector,
    bx: &SampleBox,
    search: &CriticalSearch,
) -> Result<Vector> {
    let mut search = search.clone();
    search.extra_seeds.push(x.clone());
    let set = find_critical_points(model, t, bx, &search)?;
    let mut dists: Vec<(f64, &[f64])> = set
        .points
        .iter()
        .map(|p| (p.distance_to(x), p.location.as_slice()))
        .collect();
    dists.sort_by(|a, b| a.0.total_cmp(&b.0));
    match dists.as_slice() {
        [] => Err(Error::NotFound(format!("no critical point of F({t}, ·) found"))),
        [(_, p)] => Ok(Vector::from_row_slice(p)),
        [(d0, p), (d1, _), ..] => {
            if d1 - d0 <= 2.0 * MATCH_RADIUS {
                Err(Error::Ambiguous { t })
            } else {
                Ok(Vector::from_row_slice(p))
            }
        }
    }
}

/// First-order drift of a nondegenerate critical branch through `x` over a
/// time step `dt`, from `∂ₜx = −H⁻¹ ∂ₜ∇F`, plus a floor for roundoff.
fn branch_slack(model: &EnergyModel, t: f64, x: &Vector, dt: f64) -> Result<f64> {
    let h = model.hessian(t, x)?;
    let horizon = model.horizon();
    let step = 1e-6 * horizon.max(1.0);
    let (lo, hi) = ((t - step).max(0.0), (t + step).min(horizon));
    let dgrad = (model.gradient(hi, x)? - model.gradient(lo, x)?) / (hi - lo);
    let slack = match h.lu().solve(&dgrad) {
        Some(v) if v.iter().all(|c| c.is_finite()) => v.norm() * dt,
        _ => f64::INFINITY,
    };
    Ok(slack + 1e-9)
}

/// Projects the trajectory of the smallest-`ε` run onto the critical sets
/// of `F(t, ·)` along `grid` and marks where the assignment jumps.
pub fn estimate_limit_curve(
    model: &EnergyModel,
    profile: &SpectralProfile,
    traj: &Trajectory,
    grid: &[f64],
    bx: &SampleBox,
    search: &CriticalSearch,
) -> Result<LimitCurve> {
    if grid.len() < 2 {
        return Err(Error::Domain("limit-curve grid needs at least two times".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("limit-curve grid must be increasing".into()));
    }
    if traj.is_empty() || grid[0] < traj.start() || grid[grid.len() - 1] > traj.end() {
        return Err(Error::Domain(format!(
            "grid [{}, {}] is not inside the trajectory span",
            grid[0],
            grid[grid.len() - 1]
        )));
    }
    let t_star = blowup_time(profile)?.t_star;
    let mut states = Vec::with_capacity(grid.len());
    for &t in grid {
        let x = traj.interpolate(t)?;
        states.push(project(model, t, &x, bx, search)?);
    }

    let mut jumps = Vec::new();
    let mut lipschitz = 0.0f64;
    for k in 0..grid.len() - 1 {
        let dt = grid[k + 1] - grid[k];
        let step = (&states[k + 1] - &states[k]).norm();
        let slack = branch_slack(model, grid[k], &states[k], dt)?;
        if step > 10.0 * slack {
            let time = match t_star {
                Some(ts) if ts >= grid[k] - dt && ts <= grid[k + 1] => ts,
                _ => 0.5 * (grid[k] + grid[k + 1]),
            };
            let u_plus = newton(model, time, &states[k + 1], 4.0 * bx.radius().max(1.0), 200)?
                .unwrap_or_else(|| states[k + 1].clone());
            let u_minus = if time < grid[k] {
                newton(model, time, &states[k], 4.0 * bx.radius().max(1.0), 200)?
                    .unwrap_or_else(|| states[k].clone())
            } else {
                states[k].clone()
            };
            jumps.push(Jump {
                t_left: grid[k],
                t_right: grid[k + 1],
                time,
                u_minus: u_minus.iter().copied().collect(),
                u_plus: u_plus.iter().copied().collect(),
            });
        } else {
            lipschitz = lipschitz.max(step / dt);
        }
    }
    Ok(LimitCurve {
        times: grid.to_vec(),
        states: states.iter().map(|s| s.iter().copied().collect()).collect(),
        jumps,
        lipschitz,
    })
}

/// Samples of `w_ε(s) = u_ε(t_ε + εs)` on a uniform `s` grid.
#[derive(Debug, Clone, Serialize)]
pub struct RescaledOrbit {
    pub eps: f64,
    pub t_eps: f64,
    pub s: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl RescaledOrbit {
    pub fn state(&self, k: usize) -> Vector {
        Vector::from_vec(self.states[k].clone())
    }
}

pub fn rescale_trajectory(
    traj: &Trajectory,
    t_eps: f64,
    eps: f64,
    window: (f64, f64),
    samples: usize,
) -> Result<RescaledOrbit> {
    let (s0, s1) = window;
    if !(s1 > s0) || samples < 2 {
        return Err(Error::Domain(format!(
            "rescaling window [{s0}, {s1}] with {samples} samples is degenerate"
        )));
    }
    let (a, b) = (t_eps + eps * s0, t_eps + eps * s1);
    if traj.is_empty() || a < traj.start() || b > traj.end() {
        return Err(Error::Domain(format!(
            "rescaled window [{a}, {b}] outside trajectory span"
        )));
    }
    let s: Vec<f64> = (0..samples)
        .map(|k| s0 + (s1 - s0) * k as f64 / (samples - 1) as f64)
        .collect();
    let states = s
        .iter()
        .map(|&si| {
            let t = if si == 0.0 { t_eps } else { t_eps + eps * si };
            traj.interpolate(t).map(|v| v.iter().copied().collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(RescaledOrbit {
        eps,
        t_eps,
        s,
        states,
    })
}

/// Sup discrepancy between the samples and `reference(s − shift)`.
pub fn shift_discrepancy<F>(orbit: &RescaledOrbit, reference: &F, shift: f64) -> f64
where
    F: Fn(f64) -> Vector,
{
    orbit
        .s
        .iter()
        .enumerate()
        .map(|(k, &s)| (orbit.state(k) - reference(s - shift)).norm())
        .fold(0.0, f64::max)
}

/// Time shift in `range` minimizing [`shift_discrepancy`]: a coarse scan
/// followed by golden-section refinement. Returns `(shift, discrepancy)`.
pub fn best_shift_discrepancy<F>(orbit: &RescaledOrbit, reference: F, range: (f64, f64)) -> (f64, f64)
where
    F: Fn(f64) -> Vector,
{
    let (lo, hi) = range;
    let coarse = 400;
    let h = (hi - lo) / coarse as f64;
    let mut best = (lo, shift_discrepancy(orbit, &reference, lo));
    for k in 1..=coarse {
        let sh = lo + h * k as f64;
        let d = shift_discrepancy(orbit, &reference, sh);
        if d < best.1 {
            best = (sh, d);
        }
    }
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = ((best.0 - h).max(lo), (best.0 + h).min(hi));
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = shift_discrepancy(orbit, &reference, c);
    let mut fd = shift_discrepancy(orbit, &reference, d);
    while b - a > 1e-10 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = shift_discrepancy(orbit, &reference, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = shift_discrepancy(orbit, &reference, d);
        }
    }
    let mid = 0.5 * (a + b);
    let fm = shift_discrepancy(orbit, &reference, mid);
    if fm < best.1 {
        (mid, fm)
    } else {
        best
    }
}
