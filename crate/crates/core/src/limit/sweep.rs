use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critical::{find_critical_points, CriticalSearch};
use crate::energy::{EnergyModel, SampleBox};
use crate::error::{Error, Result};
use crate::integrator::{solve_singular, EventSpec, Relaxation, SolveOptions, Trajectory};
use crate::spectral::{blowup_time, check_a1, check_a2, lambda1_at, SpectralProfile};
use crate::Vector;

pub const MU_EVENT: &str = "mu-crossing";

/// Side of `e₁` the initial data starts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Side::Plus => "+",
            Side::Minus => "-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MuRule {
    /// `μ = min(r_iso/2, largest r with sup ‖B‖/‖u‖ ≤ |λ₁(t*)|/10 on ‖u‖ ≤ r)`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct MuSelection {
    pub mu: f64,
    /// Half the distance from 0 to the nearest other critical point at `t*`.
    pub r_iso: f64,
    /// Largest radius meeting the remainder bound.
    pub r_remainder: f64,
    /// Sampled `sup ‖B(t,u)‖/‖u‖` over `‖u‖ ≤ μ`.
    pub eta: f64,
}

/// Unit directions for sampling balls: both signs of each axis plus seeded
/// random directions.
pub(crate) fn sample_directions(n: usize, extra: usize, seed: u64) -> Vec<Vector> {
    let mut dirs = Vec::new();
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut d = Vector::zeros(n);
            d[i] = s;
            dirs.push(d);
        }
    }
    if n > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        while dirs.len() < 2 * n + extra {
            let d = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let norm = d.norm();
            if norm > 1e-3 {
                dirs.push(d / norm);
            }
        }
    }
    dirs
}

/// Sampled `sup ‖B(t,u)‖/‖u‖` over `0 < ‖u‖ ≤ r` and `t ∈ times`.
pub fn remainder_ratio(model: &EnergyModel, times: &[f64], r: f64) -> Result<f64> {
    let dirs = sample_directions(model.dimension(), 24, 7);
    let mut worst = 0.0f64;
    for &t in times {
        for d in &dirs {
            for frac in [0.25, 0.5, 0.75, 1.0] {
                let u = d * (frac * r);
                let ratio = model.remainder(t, &u)?.norm() / u.norm();
                worst = worst.max(ratio);
            }
        }
    }
    Ok(worst)
}

fn time_samples(a: f64, b: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| a + (b - a) * k as f64 / (count - 1) as f64)
        .collect()
}

/// Detection radius from `rule`, using the critical set of `F(t*, ·)` on `bx`.
pub fn select_mu(
    model: &EnergyModel,
    t_star: f64,
    span_end: f64,
    rule: MuRule,
    bx: &SampleBox,
    search: &CriticalSearch,
) -> Result<MuSelection> {
    let times = time_samples(0.0, span_end, 21);
    let set = find_critical_points(model, t_star, bx, search)?;
    let nearest = set
        .points
        .iter()
        .map(|p| p.norm())
        .filter(|&r| r > 1e-6)
        .fold(f64::INFINITY, f64::min);
    if !nearest.is_finite() {
        return Err(Error::NotFound(
            "no nonzero critical point of F(t*, ·) in the search box".into(),
        ));
    }
    let r_iso = 0.5 * nearest;
    let target = 0.1 * lambda1_at(model, t_star)?.abs();
    // Largest r with ratio(r) ≤ target, by bisection on [0, 2·r_iso].
    let (mut lo, mut hi) = (0.0, 2.0 * r_iso);
    if remainder_ratio(model, &times, hi)? <= target {
        lo = hi;
    } else {
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if remainder_ratio(model, &times, mid)? <= target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-9 * hi {
                break;
            }
        }
    }
    let r_remainder = lo;
    let mu = match rule {
        MuRule::Auto => (0.5 * r_iso).min(r_remainder),
        MuRule::Fixed(mu) => mu,
    };
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::Options(format!("detection radius must be positive, got {mu}")));
    }
    Ok(MuSelection {
        mu,
        r_iso,
        r_remainder,
        eta: remainder_ratio(model, &times, mu)?,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Strictly decreasing positive values of `ε`.
    pub eps: Vec<f64>,
    /// Initial data `u_ε(0) = ±ε^α·e₁`.
    pub alpha: f64,
    pub side: Side,
    pub mu: MuRule,
    /// Relative tolerance while `‖u‖ ≤ μ`.
    pub rtol: f64,
    pub atol: f64,
    /// Relative tolerance after the first crossing of `μ`.
    pub relaxed_rtol: f64,
    /// Box for the critical-point search at `t*`; `[−2, 2]ⁿ` when unset.
    pub search_box: Option<SampleBox>,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            eps: vec![1e-2, 1e-3, 1e-4],
            alpha: 1.0,
            side: Side::Plus,
            mu: MuRule::Auto,
            rtol: 1e-8,
            atol: 1e-12,
            relaxed_rtol: 1e-6,
            search_box: None,
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps.is_empty() {
            return Err(Error::Options("eps list is empty".into()));
        }
        if self.eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::Options("eps values must be positive".into()));
        }
        if self.eps.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Options("eps list must be strictly decreasing".into()));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::Options(format!("alpha must be positive, got {}", self.alpha)));
        }
        if let MuRule::Fixed(mu) = self.mu {
            if !(mu.is_finite() && mu > 0.0) {
                return Err(Error::Options(format!("mu must be positive, got {mu}")));
            }
        }
        Ok(())
    }

    pub fn search_box(&self, n: usize) -> Result<SampleBox> {
        match &self.search_box {
            Some(b) => Ok(b.clone()),
            None => SampleBox::symmetric(n, 2.0),
        }
    }

    pub fn solve_options(&self, mu: f64) -> SolveOptions {
        let mut opts = SolveOptions::default().with_tolerances(self.rtol, self.atol);
        opts.relax = Some(Relaxation {
            radius: mu,
            rtol: self.relaxed_rtol,
        });
        opts.events.push(EventSpec::norm(MU_EVENT, mu));
        opts
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct JumpEstimate {
    pub eps: f64,
    pub alpha: f64,
    pub mu: f64,
    pub t_eps: Option<f64>,
    /// Sign of `⟨u_ε(0), e₁⟩`.
    pub sign: f64,
    pub state_at_t_eps: Option<Vec<f64>>,
    pub span: (f64, f64),
    pub steps: usize,
    pub rejected_steps: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub estimate: JumpEstimate,
    pub trajectory: Option<Trajectory>,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub t_c: Option<f64>,
    pub t_star: f64,
    pub e1: Vector,
    pub mu: MuSelection,
    pub runs: Vec<SweepRun>,
}

impl Sweep {
    pub fn estimates(&self) -> Vec<JumpEstimate> {
        self.runs.iter().map(|r| r.estimate.clone()).collect()
    }

    /// The run with the smallest `ε` that produced a trajectory.
    pub fn smallest(&self) -> Option<&SweepRun> {
        self.runs.iter().rev().find(|r| r.trajectory.is_some())
    }
}

/// Integration span `[0, min(T, t* + (T − t*)/2)]`.
pub fn sweep_span(model: &EnergyModel, t_star: f64) -> (f64, f64) {
    let horizon = model.horizon();
    (0.0, horizon.min(t_star + 0.5 * (horizon - t_star)))
}

/// One solve from `u0` with the `μ`-crossing recorded.
pub fn run_single(
    model: &EnergyModel,
    eps: f64,
    alpha: f64,
    u0: &Vector,
    e1: &Vector,
    mu: f64,
    span: (f64, f64),
    opts: &SolveOptions,
) -> SweepRun {
    let sign = u0.dot(e1).signum();
    let mut estimate = JumpEstimate {
        eps,
        alpha,
        mu,
        t_eps: None,
        sign: if u0.dot(e1) == 0.0 { 0.0 } else { sign },
        state_at_t_eps: None,
        span,
        steps: 0,
        rejected_steps: 0,
        error: None,
    };
    match solve_singular(model, eps, u0, span, opts) {
        Ok(traj) => {
            if let Some(ev) = traj.events.iter().find(|e| e.name == MU_EVENT) {
                estimate.t_eps = Some(ev.t);
                estimate.state_at_t_eps = Some(ev.state.clone());
            }
            estimate.steps = traj.steps.len();
            estimate.rejected_steps = traj.rejected_steps;
            SweepRun {
                estimate,
                trajectory: Some(traj),
            }
        }
        Err(e) => {
            estimate.error = Some(e.to_string());
            SweepRun {
                estimate,
                trajectory: None,
            }
        }
    }
}

/// Solves for each `ε` from `sign·ε^α·e₁` and records the first time `‖u_ε‖ = μ`.
/// Failures of single entries are recorded in their estimate.
pub fn run_epsilon_sweep(
    model: &EnergyModel,
    profile: &SpectralProfile,
    config: &SweepConfig,
) -> Result<Sweep> {
    config.validate()?;
    let times = blowup_time(profile)?;
    let t_star = times.t_star.ok_or_else(|| {
        Error::Hypothesis("Λ has no zero on the horizon, so t* is undefined".into())
    })?;
    let a1 = check_a1(profile, 1e-8)?;
    if !a1.ok {
        return Err(Error::Hypothesis(format!(
            "lowest eigenvalue is not simple with a fixed eigenvector (gap {:e}, drift {:e})",
            a1.min_gap, a1.max_drift
        )));
    }
    let a2 = check_a2(model, t_star)?;
    if !a2.ok {
        return Err(Error::Hypothesis(format!(
            "A(t*) is singular or λ₁(t*) = {} is not negative",
            a2.lambda1
        )));
    }
    let span = sweep_span(model, t_star);
    let search = CriticalSearch {
        seed: config.seed,
        ..CriticalSearch::default()
    };
    let bx = config.search_box(model.dimension())?;
    let mu = select_mu(model, t_star, span.1, config.mu, &bx, &search)?;
    let opts = config.solve_options(mu.mu);
    let e1 = profile.e1.clone();
    let sign = config.side.sign();
    let runs: Vec<SweepRun> = config
        .eps
        .par_iter()
        .map(|&eps| {
            let u0 = &e1 * (sign * eps.powf(config.alpha));
            run_single(model, eps, config.alpha, &u0, &e1, mu.mu, span, &opts)
        })
        .collect();
    Ok(Sweep {
        t_c: times.t_c,
        t_star,
        e1,
        mu,
        runs,
    })
}
