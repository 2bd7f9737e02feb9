use serde::Serialize;

use crate::error::{Error, Result};
use crate::Vector;

/// Diagnostics of one accepted step.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepRecord {
    /// End time of the step.
    pub t: f64,
    pub h: f64,
    pub newton_iterations: usize,
    /// Weighted local error estimate, at most 1 for accepted steps.
    pub error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EventRecord {
    pub name: String,
    pub t: f64,
    pub state: Vec<f64>,
    /// `ln ‖u‖` at the event, meaningful even when the state underflows.
    pub log_norm: f64,
}

/// A state stored as `exp(log_scale)·scaled`, so amplitudes far below the
/// smallest double remain representable.
#[derive(Debug, Clone)]
pub struct Point {
    pub t: f64,
    pub log_scale: f64,
    pub scaled: Vector,
}

impl Point {
    pub fn state(&self) -> Vector {
        if self.log_scale == 0.0 {
            self.scaled.clone()
        } else {
            &self.scaled * self.log_scale.exp()
        }
    }

    pub fn log_norm(&self) -> f64 {
        let n = self.scaled.norm();
        if n == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.log_scale + n.ln()
        }
    }

    pub fn norm(&self) -> f64 {
        self.log_norm().exp()
    }
}

/// Cubic Hermite interpolation on `[t0, t1]` from values and slopes.
pub(crate) fn hermite(
    t0: f64,
    t1: f64,
    y0: &Vector,
    f0: &Vector,
    y1: &Vector,
    f1: &Vector,
    t: f64,
) -> Vector {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    y0 * h00 + f0 * (h10 * h) + y1 * h01 + f1 * (h11 * h)
}

/// Accepted solution points of a solve together with step diagnostics and
/// the event log. For the frozen-time flow the time axis is the fast time `s`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `Some(ε)` for the singular flow, `None` for the autonomous one.
    pub eps: Option<f64>,
    /// Frozen time of the autonomous flow.
    pub frozen_time: Option<f64>,
    pub times: Vec<f64>,
    log_scales: Vec<f64>,
    scaled: Vec<Vector>,
    derivs: Vec<Vector>,
    pub steps: Vec<StepRecord>,
    pub events: Vec<EventRecord>,
    pub rejected_steps: usize,
    pub dense: bool,
}

impl Trajectory {
    pub(crate) fn new(eps: Option<f64>, frozen_time: Option<f64>, dense: bool) -> Self {
        Self {
            eps,
            frozen_time,
            times: Vec::new(),
            log_scales: Vec::new(),
            scaled: Vec::new(),
            derivs: Vec::new(),
            steps: Vec::new(),
            events: Vec::new(),
            rejected_steps: 0,
            dense,
        }
    }

    /// Empty autonomous trajectory at `t_frozen`, ready to be extended.
    pub(crate) fn default_for(t_frozen: f64) -> Self {
        Self::new(None, Some(t_frozen), true)
    }

    pub(crate) fn push(&mut self, t: f64, log_scale: f64, scaled: Vector, deriv: Vector) {
        self.times.push(t);
        self.log_scales.push(log_scale);
        self.scaled.push(scaled);
        self.derivs.push(deriv);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.scaled.first().map_or(0, |v| v.len())
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn point(&self, k: usize) -> Point {
        Point {
            t: self.times[k],
            log_scale: self.log_scales[k],
            scaled: self.scaled[k].clone(),
        }
    }

    pub fn state(&self, k: usize) -> Vector {
        self.point(k).state()
    }

    pub fn states(&self) -> Vec<Vector> {
        (0..self.len()).map(|k| self.state(k)).collect()
    }

    pub fn last_state(&self) -> Vector {
        self.state(self.len() - 1)
    }

    /// Time derivative `u̇` at the stored point `k`.
    pub fn derivative(&self, k: usize) -> Vector {
        if self.log_scales[k] == 0.0 {
            self.derivs[k].clone()
        } else {
            &self.derivs[k] * self.log_scales[k].exp()
        }
    }

    pub fn log_norm(&self, k: usize) -> f64 {
        self.point(k).log_norm()
    }

    pub fn norm(&self, k: usize) -> f64 {
        self.point(k).norm()
    }

    pub fn log_norms(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.log_norm(k)).collect()
    }

    /// Index `k` of the step `[t_k, t_{k+1}]` containing `t`.
    fn segment(&self, t: f64) -> Result<usize> {
        if self.len() < 2 {
            return Err(Error::Domain("trajectory has fewer than two points".into()));
        }
        let (a, b) = (self.start(), self.end());
        if !(t >= a && t <= b) {
            return Err(Error::Domain(format!("t = {t} outside trajectory span [{a}, {b}]")));
        }
        let k = self.times.partition_point(|&s| s <= t);
        Ok(k.saturating_sub(1).min(self.len() - 2))
    }

    /// Hermite interpolant on segment `k` evaluated at `t`, expressed at the
    /// scale of the left end point.
    pub(crate) fn segment_point(&self, k: usize, t: f64) -> Point {
        let ratio = (self.log_scales[k + 1] - self.log_scales[k]).exp();
        let (y1, f1) = if ratio == 1.0 {
            (self.scaled[k + 1].clone(), self.derivs[k + 1].clone())
        } else {
            (&self.scaled[k + 1] * ratio, &self.derivs[k + 1] * ratio)
        };
        let scaled = hermite(
            self.times[k],
            self.times[k + 1],
            &self.scaled[k],
            &self.derivs[k],
            &y1,
            &f1,
            t,
        );
        Point {
            t,
            log_scale: self.log_scales[k],
            scaled,
        }
    }

    /// Dense output at `t` in log-scaled form.
    pub fn interpolate_point(&self, t: f64) -> Result<Point> {
        if !self.dense {
            return Err(Error::Precondition("dense output was not requested for this solve".into()));
        }
        let k = self.segment(t)?;
        if t == self.times[k] {
            return Ok(self.point(k));
        }
        if t == self.times[k + 1] {
            return Ok(self.point(k + 1));
        }
        Ok(self.segment_point(k, t))
    }

    /// Dense output `u(t)` by cubic Hermite interpolation between accepted steps.
    pub fn interpolate(&self, t: f64) -> Result<Vector> {
        Ok(self.interpolate_point(t)?.state())
    }

    /// Appends `other`, which must start where `self` ends.
    pub fn extend(&mut self, other: Trajectory) -> Result<()> {
        if self.is_empty() {
            *self = other;
            return Ok(());
        }
        if other.is_empty() {
            return Ok(());
        }
        let gap = (other.start() - self.end()).abs();
        if gap > 1e-12 * (1.0 + self.end().abs()) {
            return Err(Error::Domain(format!(
                "cannot join trajectories: {} does not continue {}",
                other.start(),
                self.end()
            )));
        }
        let Trajectory {
            times,
            log_scales,
            scaled,
            derivs,
            steps,
            events,
            rejected_steps,
            ..
        } = other;
        self.times.extend(times.into_iter().skip(1));
        self.log_scales.extend(log_scales.into_iter().skip(1));
        self.scaled.extend(scaled.into_iter().skip(1));
        self.derivs.extend(derivs.into_iter().skip(1));
        self.steps.extend(steps);
        self.events.extend(events);
        self.rejected_steps += rejected_steps;
        Ok(())
    }

    /// Largest `‖u‖` at stored points with `t ∈ [a, b]`, in log form.
    pub fn max_log_norm_on(&self, a: f64, b: f64) -> f64 {
        self.times
            .iter()
            .enumerate()
            .filter(|(_, &t)| t >= a && t <= b)
            .map(|(k, _)| self.log_norm(k))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}
