//! TR-BDF2: a trapezoidal stage to `t + γh` followed by BDF2 on
//! `{t, t + γh, t + h}`, with `γ = 2 − √2`. Written as an ESDIRK with
//! diagonal `d = γ/2` it is L-stable and second order; a third-order
//! quadrature on the same stages supplies the error estimate.

use nalgebra::LU;

use super::trajectory::{hermite, EventRecord, Point, StepRecord, Trajectory};
use super::{Direction, EventKind, EventSpec, SolveOptions};
use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::{Matrix, Vector};

const GAMMA: f64 = 2.0 - std::f64::consts::SQRT_2;
const D: f64 = GAMMA / 2.0;
const W: f64 = std::f64::consts::SQRT_2 / 4.0;

/// Amplitude below which the state switches to log-scaled storage.
const ENTER_SCALED: f64 = 1e-100;
/// Amplitude above which scaled storage is abandoned again.
const LEAVE_SCALED: f64 = 1e-50;
/// Below this scale the field is replaced by its linearization.
const LINEAR_SCALE: f64 = 1e-200;
const BLOW_UP_NORM: f64 = 1e100;
const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
/// Interior probes per step when looking for event sign changes.
const EVENT_PROBES: usize = 4;

fn embedded_weights() -> (f64, f64, f64) {
    let bg = 1.0 / (6.0 * GAMMA * (1.0 - GAMMA));
    let b1 = 0.5 - 1.0 / (6.0 * (1.0 - GAMMA));
    (1.0 - bg - b1, bg, b1)
}

/// Right-hand side `−∇ₓF(τ, u)/ε` in scaled coordinates `u = e^ℓ z`.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Field<'a> {
    Singular { model: &'a EnergyModel, eps: f64 },
    Autonomous { model: &'a EnergyModel, t_frozen: f64 },
}

impl Field<'_> {
    fn model(&self) -> &EnergyModel {
        match self {
            Field::Singular { model, .. } | Field::Autonomous { model, .. } => model,
        }
    }

    fn energy_time(&self, t: f64) -> f64 {
        match self {
            Field::Singular { .. } => t,
            Field::Autonomous { t_frozen, .. } => *t_frozen,
        }
    }

    fn inv_eps(&self) -> f64 {
        match self {
            Field::Singular { eps, .. } => 1.0 / eps,
            Field::Autonomous { .. } => 1.0,
        }
    }

    pub(crate) fn eval(&self, t: f64, z: &Vector, log_scale: f64) -> Result<Vector> {
        let tau = self.energy_time(t);
        let model = self.model();
        let g = if log_scale == 0.0 {
            model.gradient(tau, z)?
        } else if log_scale < LINEAR_SCALE.ln() {
            model.linearization(tau)? * z
        } else {
            let sigma = log_scale.exp();
            model.gradient(tau, &(z * sigma))? / sigma
        };
        Ok(g * -self.inv_eps())
    }

    fn jacobian(&self, t: f64, z: &Vector, log_scale: f64) -> Result<Matrix> {
        let tau = self.energy_time(t);
        let model = self.model();
        let h = if log_scale == 0.0 {
            model.hessian(tau, z)?
        } else if log_scale < LINEAR_SCALE.ln() {
            model.linearization(tau)?
        } else {
            model.hessian(tau, &(z * log_scale.exp()))?
        };
        Ok(h * -self.inv_eps())
    }
}

struct Stage {
    z: Vector,
    f: Vector,
    iterations: usize,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

struct Tolerances {
    rtol: f64,
    atol: f64,
    floor: f64,
}

impl Tolerances {
    /// Error weight for scaled states of size `m` at scale `ℓ`. Below the
    /// amplitude floor the absolute part shrinks with the state, so control
    /// becomes purely relative.
    fn weight(&self, m: f64, log_scale: f64) -> f64 {
        self.rtol * m + self.atol * (-log_scale).exp().min(m / self.floor)
    }
}

pub(crate) struct Solver<'a> {
    field: Field<'a>,
    opts: &'a SolveOptions,
    t0: f64,
    t1: f64,
}

enum Attempt {
    Accepted {
        z: Vector,
        f: Vector,
        error: f64,
        iterations: usize,
    },
    Rejected {
        error: f64,
    },
    NewtonFailure,
}

impl<'a> Solver<'a> {
    pub(crate) fn new(field: Field<'a>, opts: &'a SolveOptions, t0: f64, t1: f64) -> Self {
        Self { field, opts, t0, t1 }
    }

    fn stage(
        &self,
        t: f64,
        log_scale: f64,
        rhs: &Vector,
        coef: f64,
        guess: Vector,
        tol: &Tolerances,
    ) -> Result<Option<Stage>> {
        let n = rhs.len();
        let mut z = guess;
        for it in 1..=self.opts.newton_max_iter {
            let (fz, jac) = match (
                self.field.eval(t, &z, log_scale),
                self.field.jacobian(t, &z, log_scale),
            ) {
                (Ok(f), Ok(j)) => (f, j),
                (Err(Error::Evaluation { .. }), _) | (_, Err(Error::Evaluation { .. })) => {
                    return Ok(None)
                }
                (Err(e), _) | (_, Err(e)) => return Err(e),
            };
            let residual = &z - &fz * coef - rhs;
            let lu = (Matrix::identity(n, n) - jac * coef).lu();
            let Some(delta) = lu.solve(&residual) else {
                return Ok(None);
            };
            z -= &delta;
            if !z.iter().all(|v| v.is_finite()) {
                return Ok(None);
            }
            let dn = delta.norm();
            let scale = tol.weight(z.norm(), log_scale);
            if dn <= self.opts.newton_tol * scale || dn <= 4.0 * f64::EPSILON * z.norm() {
                let f = match self.field.eval(t, &z, log_scale) {
                    Ok(f) => f,
                    Err(Error::Evaluation { .. }) => return Ok(None),
                    Err(e) => return Err(e),
                };
                return Ok(Some(Stage {
                    z,
                    f,
                    iterations: it,
                    lu,
                }));
            }
        }
        Ok(None)
    }

    fn attempt(
        &self,
        t: f64,
        log_scale: f64,
        v: &Vector,
        f: &Vector,
        h: f64,
        tol: &Tolerances,
    ) -> Result<Attempt> {
        let tg = t + GAMMA * h;
        let rhs1 = v + f * (D * h);
        let guess1 = v + f * (GAMMA * h);
        let Some(s1) = self.stage(tg, log_scale, &rhs1, D * h, guess1, tol)? else {
            return Ok(Attempt::NewtonFailure);
        };
        let rhs2 = v + (f + &s1.f) * (W * h);
        let guess2 = &s1.z + &s1.f * ((1.0 - GAMMA) * h);
        let Some(s2) = self.stage(t + h, log_scale, &rhs2, D * h, guess2, tol)? else {
            return Ok(Attempt::NewtonFailure);
        };
        let (b0, bg, b1) = embedded_weights();
        let raw = (f * (W - b0) + &s1.f * (W - bg) + &s2.f * (D - b1)) * h;
        let est = s2.lu.solve(&raw).unwrap_or(raw);
        let m = v.norm().max(s2.z.norm());
        let weight = tol.weight(m, log_scale);
        let en = est.norm();
        let error = if en == 0.0 {
            0.0
        } else if weight > 0.0 {
            en / weight
        } else {
            f64::INFINITY
        };
        if error <= 1.0 {
            Ok(Attempt::Accepted {
                z: s2.z,
                f: s2.f,
                error,
                iterations: s1.iterations + s2.iterations,
            })
        } else {
            Ok(Attempt::Rejected { error })
        }
    }

    fn event_value(kind: &EventKind, p: &Point) -> f64 {
        match kind {
            EventKind::Norm { radius } => {
                let ln = p.log_norm();
                if ln == f64::NEG_INFINITY {
                    -f64::MAX
                } else {
                    ln - radius.ln()
                }
            }
            EventKind::Coordinate { index, value } => {
                let x = p.scaled[*index];
                if *value == 0.0 {
                    x
                } else {
                    x * p.log_scale.exp() - value
                }
            }
        }
    }

    fn crosses(direction: Direction, g0: f64, g1: f64) -> bool {
        match direction {
            Direction::Rising => g0 < 0.0 && g1 >= 0.0,
            Direction::Falling => g0 > 0.0 && g1 <= 0.0,
            Direction::Either => (g0 < 0.0 && g1 >= 0.0) || (g0 > 0.0 && g1 <= 0.0),
        }
    }

    /// Earliest crossing of `spec` on the step `[a, b]`, located on the
    /// interpolant by bisection.
    fn locate<F>(&self, spec: &EventSpec, a: f64, b: f64, interp: &F) -> Option<Point>
    where
        F: Fn(f64) -> Point,
    {
        let g = |t: f64| Self::event_value(&spec.kind, &interp(t));
        let mut lo = a;
        let mut glo = g(a);
        let mut hi = None;
        for j in 1..=EVENT_PROBES + 1 {
            let t = if j == EVENT_PROBES + 1 {
                b
            } else {
                a + (b - a) * j as f64 / (EVENT_PROBES + 1) as f64
            };
            let gt = g(t);
            if Self::crosses(spec.direction, glo, gt) {
                hi = Some((t, gt));
                break;
            }
            lo = t;
            glo = gt;
        }
        let (mut hi, mut ghi) = hi?;
        let time_tol = 1e-10 * (self.t1 - self.t0);
        for _ in 0..200 {
            let best = glo.abs().min(ghi.abs());
            if (hi - lo) <= time_tol && best <= 1e-12 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let gm = g(mid);
            if Self::crosses(spec.direction, glo, gm) {
                hi = mid;
                ghi = gm;
            } else {
                lo = mid;
                glo = gm;
            }
        }
        Some(if ghi.abs() <= glo.abs() { interp(hi) } else { interp(lo) })
    }

    /// Integrates from `(t0, u0)` to `t1`, storing every accepted step.
    pub(crate) fn run(&self, u0: &Vector, traj: &mut Trajectory) -> Result<()> {
        let opts = self.opts;
        let span = self.t1 - self.t0;
        let mut tol = Tolerances {
            rtol: opts.rtol,
            atol: opts.atol,
            floor: opts.amplitude_floor,
        };
        let mut relaxed = false;

        let mut t = self.t0;
        let (mut log_scale, mut v) = normalize_initial(u0);
        let mut f = self.field.eval(t, &v, log_scale)?;
        traj.push(t, log_scale, v.clone(), f.clone());

        let max_step = opts.max_step.unwrap_or(span).min(span);
        let mut h = match opts.initial_step {
            Some(h) => h,
            None => {
                let (d0, d1) = (v.norm(), f.norm());
                if d0 > 0.0 && d1 > 0.0 {
                    0.01 * d0 / d1
                } else {
                    1e-6 * span
                }
            }
        }
        .clamp(opts.min_step, max_step);

        let end_slack = 1e-14 * self.t1.abs().max(1.0);
        let mut steps = 0usize;
        while self.t1 - t > end_slack {
            if steps >= opts.max_steps {
                return Err(Error::StepLimit {
                    t,
                    limit: opts.max_steps,
                });
            }
            let mut last = false;
            if t + h >= self.t1 - end_slack {
                h = self.t1 - t;
                last = true;
            }
            match self.attempt(t, log_scale, &v, &f, h, &tol)? {
                Attempt::Accepted {
                    z,
                    f: fz,
                    error,
                    iterations,
                } => {
                    steps += 1;
                    let t_new = if last { self.t1 } else { t + h };
                    if !z.iter().all(|x| x.is_finite()) {
                        return Err(Error::BlowUp { t: t_new });
                    }

                    // Events on the step, with the end point still at the
                    // current scale.
                    let (ta, ya, fa) = (t, v.clone(), f.clone());
                    let interp = |s: f64| Point {
                        t: s,
                        log_scale,
                        scaled: if s == ta {
                            ya.clone()
                        } else if s == t_new {
                            z.clone()
                        } else {
                            hermite(ta, t_new, &ya, &fa, &z, &fz, s)
                        },
                    };
                    let mut hits: Vec<(usize, Point)> = opts
                        .events
                        .iter()
                        .enumerate()
                        .filter_map(|(i, spec)| self.locate(spec, ta, t_new, &interp).map(|p| (i, p)))
                        .collect();
                    hits.sort_by(|a, b| a.1.t.total_cmp(&b.1.t));
                    let mut terminal_at = None;
                    for (i, p) in hits {
                        let spec = &opts.events[i];
                        if terminal_at.is_some_and(|te: f64| p.t > te) {
                            break;
                        }
                        traj.events.push(EventRecord {
                            name: spec.name.clone(),
                            t: p.t,
                            state: p.state().iter().copied().collect(),
                            log_norm: p.log_norm(),
                        });
                        if spec.terminal && terminal_at.is_none() {
                            terminal_at = Some(p.t);
                        }
                    }
                    if let Some(te) = terminal_at {
                        let p = interp(te);
                        let fp = self.field.eval(te, &p.scaled, log_scale)?;
                        traj.steps.push(StepRecord {
                            t: te,
                            h: te - t,
                            newton_iterations: iterations,
                            error,
                        });
                        traj.push(te, log_scale, p.scaled, fp);
                        return Ok(());
                    }

                    t = t_new;
                    v = z;
                    f = fz;
                    rescale(&mut log_scale, &mut v, &mut f);
                    let ln = Point {
                        t,
                        log_scale,
                        scaled: v.clone(),
                    }
                    .log_norm();
                    if ln > BLOW_UP_NORM.ln() {
                        return Err(Error::BlowUp { t });
                    }
                    traj.steps.push(StepRecord {
                        t,
                        h,
                        newton_iterations: iterations,
                        error,
                    });
                    traj.push(t, log_scale, v.clone(), f.clone());

                    if let Some(relax) = &opts.relax {
                        if !relaxed && ln >= relax.radius.ln() {
                            tol.rtol = relax.rtol;
                            relaxed = true;
                        }
                    }
                    let factor = if error == 0.0 {
                        MAX_FACTOR
                    } else {
                        (SAFETY * error.powf(-1.0 / 3.0)).clamp(MIN_FACTOR, MAX_FACTOR)
                    };
                    h = (h * factor).clamp(opts.min_step, max_step);
                }
                Attempt::Rejected { error } => {
                    traj.rejected_steps += 1;
                    h *= (SAFETY * error.powf(-1.0 / 3.0)).clamp(MIN_FACTOR, 1.0);
                    if h < opts.min_step {
                        return Err(stiff_failure(t, log_scale, &v));
                    }
                }
                Attempt::NewtonFailure => {
                    traj.rejected_steps += 1;
                    h *= 0.25;
                    if h < opts.min_step {
                        return Err(stiff_failure(t, log_scale, &v));
                    }
                }
            }
        }
        Ok(())
    }
}

fn stiff_failure(t: f64, log_scale: f64, v: &Vector) -> Error {
    Error::StiffFailure {
        t,
        last_state: (v * log_scale.exp()).iter().copied().collect(),
    }
}

fn normalize_initial(u0: &Vector) -> (f64, Vector) {
    let n = u0.norm();
    if n > 0.0 && n < ENTER_SCALED {
        (n.ln(), u0 / n)
    } else {
        (0.0, u0.clone())
    }
}

/// Moves between plain and log-scaled storage after an accepted step.
fn rescale(log_scale: &mut f64, v: &mut Vector, f: &mut Vector) {
    let n = v.norm();
    if n == 0.0 {
        return;
    }
    if *log_scale == 0.0 {
        if n < ENTER_SCALED {
            *log_scale = n.ln();
            *v /= n;
            *f /= n;
        }
        return;
    }
    let new_scale = *log_scale + n.ln();
    if new_scale > LEAVE_SCALED.ln() {
        let s = new_scale.exp();
        *v *= s / n;
        *f *= s / n;
        *log_scale = 0.0;
    } else {
        *log_scale = new_scale;
        *v /= n;
        *f /= n;
    }
}
