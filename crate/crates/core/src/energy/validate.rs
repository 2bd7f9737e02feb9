//! Sampled checks of the standing hypotheses on an energy.
//!
//! Coercivity and the `|∂ₜF| ≤ C₁F + C₂` bound are global statements; here
//! they are only tested on a user box, so a pass is evidence, not proof.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::EnergyModel;
use crate::critical::{find_critical_points, CriticalSearch};
use crate::error::{Error, Result};
use crate::spectral::{blowup_time, check_a1, check_a2, spectral_profile};
use crate::Vector;

/// Axis-aligned box `Π [lowerᵢ, upperᵢ]`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SampleBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SampleBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::Domain("box bounds must be nonempty and of equal length".into()));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u))
        {
            return Err(Error::Domain("box must have finite bounds with lower < upper".into()));
        }
        Ok(Self { lower, upper })
    }

    /// `[−r, r]ⁿ`.
    pub fn symmetric(n: usize, r: f64) -> Result<Self> {
        Self::new(vec![-r; n], vec![r; n])
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    /// Norm of the farthest corner from the origin.
    pub fn radius(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| l.abs().max(u.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        x.len() == self.dimension()
            && x.iter()
                .enumerate()
                .all(|(i, &v)| v >= self.lower[i] - tol && v <= self.upper[i] + tol)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vector {
        Vector::from_iterator(
            self.dimension(),
            self.lower
                .iter()
                .zip(&self.upper)
                .map(|(&l, &u)| rng.random_range(l..=u)),
        )
    }

    /// Distance from the origin to the boundary along the unit vector `d`.
    fn exit_distance(&self, d: &Vector) -> f64 {
        let mut s = f64::INFINITY;
        for i in 0..d.len() {
            if d[i] > 0.0 {
                s = s.min(self.upper[i] / d[i]);
            } else if d[i] < 0.0 {
                s = s.min(self.lower[i] / d[i]);
            }
        }
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationOptions {
    pub samples_per_time: usize,
    pub rays: usize,
    pub radii: usize,
    pub eq2_tol: f64,
    pub drift_tol: f64,
    pub rho_window: Option<f64>,
    /// Smallest distance between distinct critical points at `t*` accepted as isolated.
    pub isolation_tol: f64,
    pub seed: u64,
    /// Log-spaced trial values of `C₁`: `(min, max, count)`.
    pub c1_grid: (f64, f64, usize),
    #[serde(skip)]
    pub search: CriticalSearch,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            samples_per_time: 64,
            rays: 32,
            radii: 16,
            eq2_tol: 1e-12,
            drift_tol: 1e-8,
            rho_window: None,
            isolation_tol: 1e-3,
            seed: 0,
            c1_grid: (1e-3, 1e3, 61),
            search: CriticalSearch::default(),
        }
    }
}

/// Growth of `sup_t |F(t, r·d)|` along rays to the box boundary.
#[derive(Debug, Clone, Serialize)]
pub struct CoercivityCheck {
    pub ok: bool,
    /// Radius fractions of the boundary distance.
    pub fractions: Vec<f64>,
    /// Minimum over rays of `sup_t |F|` at each fraction.
    pub min_sup: Vec<f64>,
    pub rays: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct F2Fit {
    pub c1: f64,
    pub c2: f64,
    /// `min (C₁F + C₂ − |∂ₜF|)` over the samples.
    pub worst_slack: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub model: String,
    pub eq2_ok: bool,
    pub eq2_residual: f64,
    pub f1_ok: bool,
    pub f1: CoercivityCheck,
    pub f2: F2Fit,
    pub f3_local_ok: Option<bool>,
    pub f3_min_separation: Option<f64>,
    pub a1_ok: bool,
    pub a1_min_gap: f64,
    pub a1_max_drift: f64,
    pub a2_ok: Option<bool>,
    pub a2_abs_det: Option<f64>,
    pub t_c: Option<f64>,
    pub t_star: Option<f64>,
    pub notes: Vec<String>,
}

impl AssumptionReport {
    /// Names of the failed hypotheses; `t*` being undefined counts as a failure.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.eq2_ok {
            out.push("eq2");
        }
        if !self.f1_ok {
            out.push("F1");
        }
        if self.t_star.is_none() {
            out.push("t*");
        }
        if self.f3_local_ok == Some(false) {
            out.push("F3");
        }
        if !self.a1_ok {
            out.push("A1");
        }
        if self.a2_ok == Some(false) {
            out.push("A2");
        }
        out
    }

    pub fn all_ok(&self) -> bool {
        self.failures().is_empty()
    }
}

fn samples(model: &EnergyModel, grid: &[f64], bx: &SampleBox, opts: &ValidationOptions) -> Vec<(f64, Vector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = Vec::with_capacity(grid.len() * (opts.samples_per_time + 1));
    for &t in grid {
        out.push((t, model.origin()));
        for _ in 0..opts.samples_per_time {
            out.push((t, bx.sample(&mut rng)));
        }
    }
    out
}

fn f2_pairs(model: &EnergyModel, points: &[(f64, Vector)]) -> Result<Vec<(f64, f64)>> {
    points
        .iter()
        .map(|(t, x)| Ok((model.evaluate(*t, x)?, model.time_derivative(*t, x)?.abs())))
        .collect()
}

fn f2_slack(pairs: &[(f64, f64)], c1: f64, c2: f64) -> f64 {
    pairs
        .iter()
        .map(|&(f, d)| c1 * f + c2 - d)
        .fold(f64::INFINITY, f64::min)
}

/// Least `C₁ + C₂` over a log grid of `C₁`, with `C₂` the smallest value
/// making the bound hold on every sample.
pub fn fit_f2(
    model: &EnergyModel,
    grid: &[f64],
    bx: &SampleBox,
    opts: &ValidationOptions,
) -> Result<F2Fit> {
    let pairs = f2_pairs(model, &samples(model, grid, bx, opts))?;
    let (lo, hi, count) = opts.c1_grid;
    if !(lo > 0.0 && hi > lo && count >= 2) {
        return Err(Error::Options("c1 grid must be positive and increasing".into()));
    }
    let mut best: Option<F2Fit> = None;
    for k in 0..count {
        let c1 = lo * (hi / lo).powf(k as f64 / (count - 1) as f64);
        let c2 = pairs
            .iter()
            .map(|&(f, d)| d - c1 * f)
            .fold(f64::NEG_INFINITY, f64::max)
            .max(1e-12);
        if best.as_ref().is_none_or(|b| c1 + c2 < b.c1 + b.c2) {
            best = Some(F2Fit {
                c1,
                c2,
                worst_slack: f2_slack(&pairs, c1, c2),
                samples: pairs.len(),
            });
        }
    }
    best.ok_or_else(|| Error::Options("empty c1 grid".into()))
}

/// Worst slack of `|∂ₜF| ≤ C₁F + C₂` over the samples; negative means violated.
pub fn check_f2(
    model: &EnergyModel,
    grid: &[f64],
    bx: &SampleBox,
    opts: &ValidationOptions,
    c1: f64,
    c2: f64,
) -> Result<f64> {
    let mut pts = samples(model, grid, bx, opts);
    // A dense line through each coordinate axis catches thin violation sets.
    for &t in grid {
        for i in 0..bx.dimension() {
            for k in 0..=64 {
                let mut x = model.origin();
                x[i] = bx.lower[i] + (bx.upper[i] - bx.lower[i]) * k as f64 / 64.0;
                pts.push((t, x));
            }
        }
    }
    Ok(f2_slack(&f2_pairs(model, &pts)?, c1, c2))
}

fn sup_abs(model: &EnergyModel, grid: &[f64], x: &Vector) -> Result<f64> {
    grid.iter()
        .map(|&t| Ok(model.evaluate(t, x)?.abs()))
        .try_fold(0.0f64, |m, v: Result<f64>| Ok(m.max(v?)))
}

pub fn check_coercivity(
    model: &EnergyModel,
    grid: &[f64],
    bx: &SampleBox,
    opts: &ValidationOptions,
) -> Result<CoercivityCheck> {
    let n = bx.dimension();
    if !bx.contains(&model.origin(), 0.0) {
        return Err(Error::Domain("sample box must contain the origin".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
    let mut dirs = Vec::new();
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut d = Vector::zeros(n);
            d[i] = s;
            dirs.push(d);
        }
    }
    while dirs.len() < 2 * n + opts.rays {
        let d = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let norm = d.norm();
        if norm > 1e-3 {
            dirs.push(d / norm);
        }
    }
    let k = opts.radii.max(4);
    let fractions: Vec<f64> = (1..=k).map(|j| j as f64 / k as f64).collect();
    let mut min_sup = vec![f64::INFINITY; k];
    let mut ok = true;
    for d in &dirs {
        let reach = bx.exit_distance(d);
        let values = fractions
            .iter()
            .map(|&f| sup_abs(model, grid, &(d * (f * reach))))
            .collect::<Result<Vec<_>>>()?;
        for (m, v) in min_sup.iter_mut().zip(&values) {
            *m = m.min(*v);
        }
        let outer = &values[k / 2..];
        if outer.windows(2).any(|w| w[1] < w[0]) || !(outer[outer.len() - 1] > outer[0]) {
            ok = false;
        }
    }
    Ok(CoercivityCheck {
        ok,
        fractions,
        min_sup,
        rays: dirs.len(),
    })
}

/// Runs every sampled check on `model` over `grid` (which must span `[0, T]`).
pub fn validate_assumptions(
    model: &EnergyModel,
    grid: &[f64],
    sample_box: &SampleBox,
    opts: &ValidationOptions,
) -> Result<AssumptionReport> {
    let horizon = model.horizon();
    if grid.len() < 2
        || grid[0].abs() > 1e-12
        || (grid[grid.len() - 1] - horizon).abs() > 1e-9 * horizon.max(1.0)
    {
        return Err(Error::Domain(format!("validation grid must span [0, {horizon}]")));
    }
    if sample_box.dimension() != model.dimension() {
        return Err(Error::Domain("sample box dimension does not match the model".into()));
    }
    let mut notes = Vec::new();

    let eq2_residual = grid
        .iter()
        .map(|&t| Ok(model.gradient(t, &model.origin())?.norm()))
        .try_fold(0.0f64, |m, v: Result<f64>| Ok(m.max(v?)))?;
    let eq2_ok = eq2_residual <= opts.eq2_tol;
    if !eq2_ok {
        notes.push(format!("origin is not an equilibrium: max ‖∇F(t,0)‖ = {eq2_residual:e}"));
    }

    let f1 = check_coercivity(model, grid, sample_box, opts)?;
    if !f1.ok {
        notes.push("sup_t |F| does not grow toward the box boundary along every ray".into());
    }
    let f2 = fit_f2(model, grid, sample_box, opts)?;
    notes.push("F1 and F2 are sampled on the box only".into());

    let profile = spectral_profile(model, grid, opts.rho_window)?;
    let times = blowup_time(&profile)?;
    let a1 = check_a1(&profile, opts.drift_tol)?;
    if !a1.ok {
        notes.push(format!(
            "lowest eigenvalue is not simple with a fixed eigenvector: min gap {:e}, max drift {:e}",
            a1.min_gap, a1.max_drift
        ));
    }

    let (mut f3_local_ok, mut f3_min_separation, mut a2_ok, mut a2_abs_det) = (None, None, None, None);
    match times.t_star {
        Some(ts) => {
            let a2 = check_a2(model, ts)?;
            a2_ok = Some(a2.ok);
            a2_abs_det = Some(a2.determinant.abs());
            if !a2.ok {
                notes.push(format!("A(t*) is singular or λ₁(t*) = {} is not negative", a2.lambda1));
            }
            let set = find_critical_points(model, ts, sample_box, &opts.search)?;
            let mut sep = f64::INFINITY;
            for (i, p) in set.points.iter().enumerate() {
                for q in &set.points[i + 1..] {
                    sep = sep.min(q.distance_to(&p.vector()));
                }
            }
            f3_local_ok = Some(sep > opts.isolation_tol);
            f3_min_separation = Some(sep);
            if sep <= opts.isolation_tol {
                notes.push(format!("critical points at t* are not isolated: separation {sep:e}"));
            }
        }
        None => {
            let why = match times.touching_zero {
                Some(tz) => format!("Λ touches zero at t = {tz} without changing sign"),
                None => "Λ never returns to 0".to_string(),
            };
            notes.push(format!("t* undefined ({why}); A2 and F3 not applicable"));
            if let Some(tz) = times.touching_zero {
                let a2 = check_a2(model, tz)?;
                a2_ok = Some(a2.ok);
                a2_abs_det = Some(a2.determinant.abs());
            }
        }
    }

    Ok(AssumptionReport {
        model: model.name().to_string(),
        eq2_ok,
        eq2_residual,
        f1_ok: f1.ok,
        f1,
        f2,
        f3_local_ok,
        f3_min_separation,
        a1_ok: a1.ok,
        a1_min_gap: a1.min_gap,
        a1_max_drift: a1.max_drift,
        a2_ok,
        a2_abs_det,
        t_c: times.t_c,
        t_star: times.t_star,
        notes,
    })
}
