//! Spectrum of `A(t) = ∇²ₓF(t, 0)` along a time grid: the minimal eigenvalue
//! `λ₁(t)`, its eigenvector branch, the primitive `Λ(t) = ∫₀ᵗ λ₁`, and the
//! times `t_c` (first zero of `λ₁`) and `t*` (first zero of `Λ`).

use nalgebra::SymmetricEigen;
use serde::Serialize;

use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, bisect, Quadrature};
use crate::{Matrix, Vector};

/// Tolerance on `|λ₁(t_c)|` when refining the critical time.
pub const CRITICAL_TIME_TOL: f64 = 1e-10;
/// Tolerance on `|Λ(t*)|` when refining the delayed time.
pub const PRIMITIVE_ROOT_TOL: f64 = 1e-8;
/// Smallest singular value of `A(t*)` below which it is declared singular.
pub const SINGULAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct ProfileOptions {
    /// Margin `ρ` past `t*` for the fixed-eigenspace check; `0.1·T` when unset.
    pub rho_window: Option<f64>,
    /// Absolute tolerance of the primitive `Λ`.
    pub quad_tol: f64,
    /// Relative midpoint deviation of `λ₁` that triggers grid refinement.
    pub refine_tol: f64,
    pub max_refine_passes: usize,
    pub max_points: usize,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            rho_window: None,
            quad_tol: 1e-8,
            refine_tol: 1e-6,
            max_refine_passes: 12,
            max_points: 20_000,
        }
    }
}

/// Sorted eigen-decomposition of `A(t)`; eigenvector columns follow the
/// ascending eigenvalues.
pub fn sorted_eigen(a: Matrix, t: f64) -> Result<(Vec<f64>, Matrix)> {
    let n = a.nrows();
    let eig = SymmetricEigen::try_new(a, f64::EPSILON, 10_000).ok_or(Error::Spectral { t })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Spectral { t });
    }
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Flips `v` so that its largest-magnitude component is positive.
pub fn pin_sign(mut v: Vector) -> Vector {
    let mut best = 0;
    for i in 0..v.len() {
        if v[i].abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
    v
}

fn cluster_tol(values: &[f64]) -> f64 {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    1e-10 * (1.0 + scale)
}

/// Eigen data at one grid point.
#[derive(Debug, Clone)]
struct Sample {
    t: f64,
    values: Vec<f64>,
    vectors: Matrix,
}

impl Sample {
    fn at(model: &EnergyModel, t: f64) -> Result<Self> {
        let (values, vectors) = sorted_eigen(model.linearization(t)?, t)?;
        Ok(Self { t, values, vectors })
    }

    fn lambda1(&self) -> f64 {
        self.values[0]
    }

    fn gap(&self) -> f64 {
        if self.values.len() < 2 {
            f64::INFINITY
        } else {
            self.values[1] - self.values[0]
        }
    }

    /// Norm of the projection of `r` onto the eigenspace of the eigenvalues
    /// clustered at `λ₁`.
    fn cluster_projection(&self, r: &Vector) -> f64 {
        let tol = cluster_tol(&self.values);
        let mut sq = 0.0;
        for (k, &v) in self.values.iter().enumerate() {
            if v - self.values[0] > tol {
                break;
            }
            sq += self.vectors.column(k).dot(r).powi(2);
        }
        sq.sqrt().min(1.0)
    }
}

/// Sampled spectral data of `A(t)` on an (adaptively refined) time grid.
#[derive(Debug, Clone)]
pub struct SpectralProfile {
    model: EnergyModel,
    pub grid: Vec<f64>,
    /// Ascending eigenvalues per grid point.
    pub eigenvalues: Vec<Vec<f64>>,
    /// Eigenvector of `λ₁` per grid point, signs continued by overlap.
    pub e1_branch: Vec<Vector>,
    /// Reference eigenvector of `λ₁`, pinned at the start of the grid.
    pub e1: Vector,
    pub gap: Vec<f64>,
    /// Minimal eigenvalue of `A(t)` restricted to `e1⊥`; `+∞` when `n = 1`.
    pub lambda_perp: Vec<f64>,
    /// `1 − |⟨e₁(t), e1⟩|`, using the whole `λ₁` cluster where it is degenerate.
    pub drift: Vec<f64>,
    /// Times where maximal-overlap matching picks a branch other than `λ₁`.
    pub branch_swaps: Vec<f64>,
    pub rho_window: f64,
    /// Upper bound on `|λᵢ(t_{k+1}) − λᵢ(t_k)| / Δt` over the grid.
    pub lipschitz: f64,
    cumulative: Vec<f64>,
    cumulative_err: Vec<f64>,
    quad_tol: f64,
}

/// Builds the profile of `model` on `grid` with default options.
pub fn spectral_profile(
    model: &EnergyModel,
    grid: &[f64],
    rho_window: Option<f64>,
) -> Result<SpectralProfile> {
    let opts = ProfileOptions {
        rho_window,
        ..ProfileOptions::default()
    };
    spectral_profile_with(model, grid, &opts)
}

/// Uniform grid of `points` nodes on `[0, T]`.
pub fn uniform_grid(horizon: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points)
        .map(|k| horizon * k as f64 / (points - 1) as f64)
        .collect()
}

pub fn spectral_profile_with(
    model: &EnergyModel,
    grid: &[f64],
    opts: &ProfileOptions,
) -> Result<SpectralProfile> {
    if grid.len() < 2 {
        return Err(Error::Domain("spectral grid needs at least two points".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("spectral grid must be strictly increasing".into()));
    }
    if !(opts.quad_tol > 0.0) {
        return Err(Error::Options("quadrature tolerance must be positive".into()));
    }
    let horizon = model.horizon();
    let rho_window = opts.rho_window.unwrap_or(0.1 * horizon);
    if !(rho_window > 0.0) {
        return Err(Error::Options(format!("rho window must be positive, got {rho_window}")));
    }

    let mut samples = grid
        .iter()
        .map(|&t| Sample::at(model, t))
        .collect::<Result<Vec<_>>>()?;
    refine(model, &mut samples, opts)?;

    let n = model.dimension();
    let grid: Vec<f64> = samples.iter().map(|s| s.t).collect();

    // Reference eigenvector: first point where λ₁ is simple.
    let first_simple = samples
        .iter()
        .position(|s| s.gap() > cluster_tol(&s.values))
        .unwrap_or(0);
    let e1 = pin_sign(samples[first_simple].vectors.column(0).into_owned());

    let mut e1_branch = Vec::with_capacity(samples.len());
    let mut branch_swaps = Vec::new();
    let mut previous = e1.clone();
    for (k, s) in samples.iter().enumerate() {
        let mut v = s.vectors.column(0).into_owned();
        if v.dot(&previous) < 0.0 {
            v.neg_mut();
        }
        if k > 0 && n > 1 {
            let prev_simple = samples[k - 1].gap() > cluster_tol(&samples[k - 1].values);
            let simple = s.gap() > cluster_tol(&s.values);
            let best = (0..n)
                .max_by(|&i, &j| {
                    let oi = s.vectors.column(i).dot(&previous).abs();
                    let oj = s.vectors.column(j).dot(&previous).abs();
                    oi.total_cmp(&oj)
                })
                .unwrap_or(0);
            if prev_simple && simple && best != 0 {
                branch_swaps.push(s.t);
            }
        }
        previous = v.clone();
        e1_branch.push(v);
    }

    let drift: Vec<f64> = samples.iter().map(|s| 1.0 - s.cluster_projection(&e1)).collect();

    let complement = orthogonal_complement(&e1);
    let lambda_perp = samples
        .iter()
        .map(|s| -> Result<f64> {
            match &complement {
                None => Ok(f64::INFINITY),
                Some(q) => {
                    let a = &s.vectors * Matrix::from_diagonal(&Vector::from_vec(s.values.clone()))
                        * s.vectors.transpose();
                    let restricted = q.transpose() * a * q;
                    let (vals, _) = sorted_eigen(restricted, s.t)?;
                    Ok(vals[0])
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut lipschitz = 0.0f64;
    for w in samples.windows(2) {
        let dt = w[1].t - w[0].t;
        for (a, b) in w[0].values.iter().zip(&w[1].values) {
            lipschitz = lipschitz.max((b - a).abs() / dt);
        }
    }

    // Cumulative primitive at the grid nodes.
    let span = grid[grid.len() - 1] - grid[0];
    let mut cumulative = vec![0.0; grid.len()];
    let mut cumulative_err = vec![0.0; grid.len()];
    for k in 1..grid.len() {
        let (a, b) = (grid[k - 1], grid[k]);
        let tol = opts.quad_tol * (b - a) / span;
        let q = adaptive_simpson(|s| lambda1_at(model, s), a, b, tol)?;
        cumulative[k] = cumulative[k - 1] + q.value;
        cumulative_err[k] = cumulative_err[k - 1] + q.error;
    }

    Ok(SpectralProfile {
        model: model.clone(),
        eigenvalues: samples.iter().map(|s| s.values.clone()).collect(),
        gap: samples.iter().map(Sample::gap).collect(),
        grid,
        e1_branch,
        e1,
        lambda_perp,
        drift,
        branch_swaps,
        rho_window,
        lipschitz,
        cumulative,
        cumulative_err,
        quad_tol: opts.quad_tol,
    })
}

/// Inserts midpoints where linear interpolation of `λ₁` misses the computed value.
fn refine(model: &EnergyModel, samples: &mut Vec<Sample>, opts: &ProfileOptions) -> Result<()> {
    for _ in 0..opts.max_refine_passes {
        let mut inserted = Vec::new();
        for (k, w) in samples.windows(2).enumerate() {
            let mid = Sample::at(model, 0.5 * (w[0].t + w[1].t))?;
            let linear = 0.5 * (w[0].lambda1() + w[1].lambda1());
            let deviation = (mid.lambda1() - linear).abs();
            if deviation > opts.refine_tol * (1.0 + mid.lambda1().abs()) {
                inserted.push((k + 1, mid));
            }
        }
        if inserted.is_empty() || samples.len() + inserted.len() > opts.max_points {
            break;
        }
        for (offset, (idx, s)) in inserted.into_iter().enumerate() {
            samples.insert(idx + offset, s);
        }
    }
    Ok(())
}

/// Orthonormal basis of `v⊥` as matrix columns, `None` in one dimension.
fn orthogonal_complement(v: &Vector) -> Option<Matrix> {
    let n = v.len();
    if n < 2 {
        return None;
    }
    let projector = Matrix::identity(n, n) - v * v.transpose();
    let (values, vectors) = sorted_eigen(projector, 0.0).ok()?;
    let cols: Vec<Vector> = values
        .iter()
        .enumerate()
        .filter(|(_, &val)| val > 0.5)
        .map(|(k, _)| vectors.column(k).into_owned())
        .collect();
    Some(Matrix::from_columns(&cols))
}

/// `λ₁(t)`, the minimal eigenvalue of `A(t)`.
pub fn lambda1_at(model: &EnergyModel, t: f64) -> Result<f64> {
    let (values, _) = sorted_eigen(model.linearization(t)?, t)?;
    Ok(values[0])
}

impl SpectralProfile {
    pub fn model(&self) -> &EnergyModel {
        &self.model
    }

    pub fn lambda1(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|v| v[0]).collect()
    }

    pub fn start(&self) -> f64 {
        self.grid[0]
    }

    pub fn end(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    pub fn lambda1_at(&self, t: f64) -> Result<f64> {
        lambda1_at(&self.model, t)
    }

    pub fn quad_tol(&self) -> f64 {
        self.quad_tol
    }

    /// `Λ` at the grid nodes.
    pub fn primitive_nodes(&self) -> &[f64] {
        &self.cumulative
    }

    /// `Λ(t) = ∫₀ᵗ λ₁(s) ds` with an error estimate.
    pub fn primitive(&self, t: f64) -> Result<Quadrature> {
        self.primitive_tol(t, self.quad_tol)
    }

    pub fn primitive_tol(&self, t: f64, tol: f64) -> Result<Quadrature> {
        let (start, end) = (self.start(), self.end());
        if !(t >= start && t <= end) {
            return Err(Error::Domain(format!("t = {t} outside profile grid [{start}, {end}]")));
        }
        let k = match self.grid.binary_search_by(|g| g.total_cmp(&t)) {
            Ok(k) => {
                return Ok(Quadrature {
                    value: self.cumulative[k],
                    error: self.cumulative_err[k],
                })
            }
            Err(k) => k - 1,
        };
        let q = adaptive_simpson(|s| lambda1_at(&self.model, s), self.grid[k], t, tol)?;
        Ok(Quadrature {
            value: self.cumulative[k] + q.value,
            error: self.cumulative_err[k] + q.error,
        })
    }

    /// `Λ` at each of the increasing `times`, integrating piecewise between them.
    pub fn primitive_along(&self, times: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(times.len());
        let mut last: Option<(f64, f64)> = None;
        for &t in times {
            let value = match last {
                Some((t0, v0)) if t >= t0 => {
                    let tol = (self.quad_tol * 1e-2).max(1e-14);
                    v0 + adaptive_simpson(|s| lambda1_at(&self.model, s), t0, t, tol)?.value
                }
                _ => self.primitive(t)?.value,
            };
            out.push(value);
            last = Some((t, value));
        }
        Ok(out)
    }
}

/// The characteristic times of the spectrum.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityTimes {
    pub t_c: Option<f64>,
    pub t_star: Option<f64>,
    pub lambda1_at_tstar: Option<f64>,
    /// Estimated quadrature error of `Λ(t*)`.
    pub primitive_error: Option<f64>,
    /// `Λ` at the end of the profile grid.
    pub primitive_at_end: f64,
    /// `λ₁(0) > 0` and `Λ(T) < 0`.
    pub fundamental_ok: bool,
    /// Zero of `Λ` where it touches the axis without changing sign.
    pub touching_zero: Option<f64>,
}

/// First zero of `λ₁`, refined to `|λ₁| ≤ 1e-10`.
pub fn critical_time(profile: &SpectralProfile) -> Result<Option<f64>> {
    let lambda = profile.lambda1();
    if !(lambda[0] > 0.0) {
        return Err(Error::Hypothesis(format!(
            "λ₁(0) = {} must be positive for the trivial equilibrium to start stable",
            lambda[0]
        )));
    }
    let Some(k) = lambda.iter().position(|&l| l <= 0.0) else {
        return Ok(None);
    };
    if lambda[k] == 0.0 {
        return Ok(Some(profile.grid[k]));
    }
    let root = bisect(
        |t| profile.lambda1_at(t),
        profile.grid[k - 1],
        profile.grid[k],
        CRITICAL_TIME_TOL,
        1e-14,
    )?;
    Ok(Some(root))
}

/// Computes `t_c`, `t*` and `λ₁(t*)`.
pub fn blowup_time(profile: &SpectralProfile) -> Result<StabilityTimes> {
    let t_c = critical_time(profile)?;
    let nodes = profile.primitive_nodes();
    let grid = &profile.grid;
    let primitive_at_end = nodes[nodes.len() - 1];
    let lambda = profile.lambda1();

    // Node values within the quadrature error of zero are not sign changes;
    // otherwise a double root of Λ would pass for a crossing.
    let crossing = (1..nodes.len()).find(|&k| nodes[k] < -(1e-12 + profile.cumulative_err[k]));
    let mut t_star = None;
    if let Some(k) = crossing {
        let j = (0..k).rev().find(|&j| nodes[j] > 0.0).unwrap_or(0);
        let root = bisect(
            |t| Ok(profile.primitive_tol(t, profile.quad_tol() * 1e-2)?.value),
            grid[j],
            grid[k],
            PRIMITIVE_ROOT_TOL * 1e-2,
            1e-13,
        )?;
        t_star = Some(root);
    }

    // A zero of Λ without a sign change sits at a local minimum where λ₁
    // changes sign from negative to positive.
    let mut touching_zero = None;
    let search_end = crossing.unwrap_or(nodes.len());
    for k in 1..search_end.min(lambda.len()) {
        if lambda[k - 1] < 0.0 && lambda[k] >= 0.0 {
            let tau = bisect(
                |t| profile.lambda1_at(t),
                grid[k - 1],
                grid[k],
                CRITICAL_TIME_TOL,
                1e-14,
            )?;
            if profile.primitive(tau)?.value.abs() <= PRIMITIVE_ROOT_TOL {
                touching_zero = Some(tau);
                break;
            }
        }
    }

    let (lambda1_at_tstar, primitive_error) = match t_star {
        Some(ts) => (
            Some(profile.lambda1_at(ts)?),
            Some(profile.primitive(ts)?.error),
        ),
        None => (None, None),
    };
    Ok(StabilityTimes {
        t_c,
        t_star,
        lambda1_at_tstar,
        primitive_error,
        primitive_at_end,
        fundamental_ok: lambda[0] > 0.0 && primitive_at_end < 0.0,
        touching_zero,
    })
}

/// Outcome of the fixed-eigenspace check.
#[derive(Debug, Clone, Serialize)]
pub struct A1Verdict {
    pub ok: bool,
    pub min_gap: f64,
    pub max_drift: f64,
    pub window_end: f64,
    pub branch_swaps: usize,
}

/// Checks that `λ₁` is simple with a fixed eigenvector on `[0, t* + ρ]`.
pub fn check_a1(profile: &SpectralProfile, drift_tol: f64) -> Result<A1Verdict> {
    let t_star = blowup_time(profile)?.t_star;
    let window_end = match t_star {
        Some(ts) => (ts + profile.rho_window).min(profile.end()),
        None => profile.end(),
    };
    let mut min_gap = f64::INFINITY;
    let mut max_drift = 0.0f64;
    let mut floor = 0.0f64;
    for (k, &t) in profile.grid.iter().enumerate() {
        if t > window_end {
            break;
        }
        min_gap = min_gap.min(profile.gap[k]);
        max_drift = max_drift.max(profile.drift[k]);
        floor = floor.max(cluster_tol(&profile.eigenvalues[k]));
    }
    let branch_swaps = profile
        .branch_swaps
        .iter()
        .filter(|&&t| t <= window_end)
        .count();
    Ok(A1Verdict {
        ok: min_gap > floor && max_drift <= drift_tol && branch_swaps == 0,
        min_gap,
        max_drift,
        window_end,
        branch_swaps,
    })
}

/// Outcome of the nondegeneracy check at `t*`.
#[derive(Debug, Clone, Serialize)]
pub struct A2Verdict {
    pub ok: bool,
    pub determinant: f64,
    pub lambda1: f64,
    pub min_singular_value: f64,
}

pub fn check_a2(model: &EnergyModel, t_star: f64) -> Result<A2Verdict> {
    let a = model.linearization(t_star)?;
    let (values, _) = sorted_eigen(a, t_star)?;
    let determinant = values.iter().product();
    let min_singular_value = values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let lambda1 = values[0];
    Ok(A2Verdict {
        ok: min_singular_value > SINGULAR_TOL && lambda1 < 0.0,
        determinant,
        lambda1,
        min_singular_value,
    })
}
