//! Critical points of `x ↦ F(t, x)`: seeded Newton search, Hessian
//! classification, ω-limits of the frozen-time flow and the one-dimensional
//! extremes `u*,±`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::energy::{EnergyModel, SampleBox};
use crate::error::{Error, Result};
use crate::integrator::{solve_autonomous, SolveOptions, Trajectory};
use crate::spectral::sorted_eigen;
use crate::Vector;

pub const RESIDUAL_TOL: f64 = 1e-10;
pub const DEDUP_RADIUS: f64 = 1e-6;
pub const MATCH_RADIUS: f64 = 1e-6;
/// Largest dimension searched with a full seed grid.
pub const MAX_GRID_DIMENSION: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    StrictLocalMin,
    Saddle,
    Degenerate,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalPoint {
    pub location: Vec<f64>,
    pub time: f64,
    pub hessian_eigenvalues: Vec<f64>,
    pub classification: Classification,
    pub residual: f64,
}

impl CriticalPoint {
    pub fn vector(&self) -> Vector {
        Vector::from_vec(self.location.clone())
    }

    pub fn norm(&self) -> f64 {
        self.vector().norm()
    }

    pub fn distance_to(&self, x: &Vector) -> f64 {
        (self.vector() - x).norm()
    }
}

#[derive(Debug, Clone)]
pub struct CriticalSearch {
    /// Seeds per axis.
    pub resolution: usize,
    /// Seed displacement as a fraction of the grid spacing.
    pub jitter: f64,
    pub seed: u64,
    pub max_iter: usize,
    /// Extra seeds, required above [`MAX_GRID_DIMENSION`].
    pub extra_seeds: Vec<Vector>,
}

impl Default for CriticalSearch {
    fn default() -> Self {
        Self {
            resolution: 11,
            jitter: 0.05,
            seed: 0,
            max_iter: 200,
            extra_seeds: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalSet {
    pub time: f64,
    /// Sorted lexicographically by location.
    pub points: Vec<CriticalPoint>,
    pub seeds: usize,
    pub converged: usize,
}

impl CriticalSet {
    /// Fraction of seeds whose Newton iteration converged.
    pub fn coverage(&self) -> f64 {
        if self.seeds == 0 {
            0.0
        } else {
            self.converged as f64 / self.seeds as f64
        }
    }

    /// Nearest point to `x` and its distance.
    pub fn nearest(&self, x: &Vector) -> Option<(&CriticalPoint, f64)> {
        self.points
            .iter()
            .map(|p| (p, p.distance_to(x)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Classifies the critical point `x` of `F(t, ·)` from its Hessian spectrum.
pub fn classify(model: &EnergyModel, t: f64, x: &Vector) -> Result<CriticalPoint> {
    let residual = model.gradient(t, x)?.norm();
    let h = model.hessian(t, x)?;
    let scale = h.norm();
    let (values, _) = sorted_eigen(h, t)?;
    let tol = 1e-8 * (1.0 + scale);
    let classification = if values.iter().any(|v| v.abs() <= tol) {
        Classification::Degenerate
    } else if values[0] > 0.0 {
        Classification::StrictLocalMin
    } else {
        Classification::Saddle
    };
    Ok(CriticalPoint {
        location: x.iter().copied().collect(),
        time: t,
        hessian_eigenvalues: values,
        classification,
        residual,
    })
}

/// Newton iteration on `∇ₓF(t, ·) = 0`. Returns `None` if it leaves `limit`
/// (a radius) or fails to converge; degenerate roots are approached linearly.
pub fn newton(
    model: &EnergyModel,
    t: f64,
    x0: &Vector,
    limit: f64,
    max_iter: usize,
) -> Result<Option<Vector>> {
    let mut x = x0.clone();
    for _ in 0..max_iter {
        let g = match model.gradient(t, &x) {
            Ok(g) => g,
            Err(Error::Evaluation { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        if g.norm() == 0.0 {
            return Ok(Some(x));
        }
        let h = model.hessian(t, &x)?;
        let step = match h.clone().lu().solve(&g) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => match h.svd(true, true).solve(&g, 1e-14) {
                Ok(s) => s,
                Err(_) => return Ok(None),
            },
        };
        x -= &step;
        if !(x.norm() <= limit) {
            return Ok(None);
        }
        let residual = model.gradient(t, &x)?.norm();
        if residual <= RESIDUAL_TOL && step.norm() <= 1e-12 * (1.0 + x.norm()) {
            return Ok(Some(x));
        }
    }
    let residual = model.gradient(t, &x)?.norm();
    if residual <= 1e-14 {
        return Ok(Some(x));
    }
    Ok(None)
}

fn seed_grid(bx: &SampleBox, search: &CriticalSearch) -> Result<Vec<Vector>> {
    let n = bx.dimension();
    let mut seeds = search.extra_seeds.clone();
    if n > MAX_GRID_DIMENSION {
        if seeds.is_empty() {
            return Err(Error::Precondition(format!(
                "dimension {n} exceeds {MAX_GRID_DIMENSION}; supply explicit seeds"
            )));
        }
        return Ok(seeds);
    }
    let r = search.resolution.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
    let total = r.pow(n as u32);
    for idx in 0..total {
        let mut rem = idx;
        let mut x = Vector::zeros(n);
        for i in 0..n {
            let k = rem % r;
            rem /= r;
            let (lo, hi) = (bx.lower[i], bx.upper[i]);
            let spacing = (hi - lo) / (r - 1) as f64;
            let shift = if search.jitter > 0.0 {
                search.jitter * spacing * rng.random_range(-1.0..1.0)
            } else {
                0.0
            };
            x[i] = (lo + spacing * k as f64 + shift).clamp(lo, hi);
        }
        seeds.push(x);
    }
    Ok(seeds)
}

fn lexicographic(a: &CriticalPoint, b: &CriticalPoint) -> std::cmp::Ordering {
    for (x, y) in a.location.iter().zip(&b.location) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Critical points of `F(t, ·)` reached by Newton from a seed grid over `bx`.
/// The origin is always included.
pub fn find_critical_points(
    model: &EnergyModel,
    t: f64,
    bx: &SampleBox,
    search: &CriticalSearch,
) -> Result<CriticalSet> {
    if bx.dimension() != model.dimension() {
        return Err(Error::Domain(format!(
            "box has dimension {}, model expects {}",
            bx.dimension(),
            model.dimension()
        )));
    }
    let seeds = seed_grid(bx, search)?;
    let limit = 4.0 * bx.radius().max(1.0);
    let results: Vec<Option<Vector>> = seeds
        .par_iter()
        .map(|s| newton(model, t, s, limit, search.max_iter))
        .collect::<Result<_>>()?;
    let converged = results.iter().filter(|r| r.is_some()).count();

    let mut found: Vec<Vector> = Vec::new();
    let origin = model.origin();
    if model.gradient(t, &origin)?.norm() <= RESIDUAL_TOL {
        found.push(origin);
    }
    for x in results.into_iter().flatten() {
        if !bx.contains(&x, 1e-9) {
            continue;
        }
        if found.iter().all(|y| (y - &x).norm() > DEDUP_RADIUS) {
            found.push(x);
        }
    }
    let mut points = found
        .iter()
        .map(|x| classify(model, t, x))
        .collect::<Result<Vec<_>>>()?;
    points.retain(|p| p.residual <= RESIDUAL_TOL);
    points.sort_by(lexicographic);
    Ok(CriticalSet {
        time: t,
        points,
        seeds: seeds.len(),
        converged,
    })
}

#[derive(Debug, Clone)]
pub struct OmegaOptions {
    pub solve: SolveOptions,
    /// First integration chunk in fast time; later chunks double.
    pub chunk: f64,
    pub max_span: f64,
    /// Trailing window over which the orbit must have stalled.
    pub stall_window: f64,
    pub stall_tol: f64,
    pub search: CriticalSearch,
    /// Box for the critical-point list; sized from the orbit when unset.
    pub search_box: Option<SampleBox>,
}

impl Default for OmegaOptions {
    fn default() -> Self {
        Self {
            solve: SolveOptions::default().with_tolerances(1e-10, 1e-13),
            chunk: 20.0,
            max_span: 1e4,
            stall_window: 1.0,
            stall_tol: 1e-10,
            search: CriticalSearch::default(),
            search_box: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OmegaLimit {
    pub point: CriticalPoint,
    pub orbit: Trajectory,
}

fn stalled(model: &EnergyModel, t: f64, orbit: &Trajectory, opts: &OmegaOptions) -> Result<bool> {
    let end = orbit.end();
    let last = orbit.last_state();
    if model.gradient(t, &last)?.norm() > RESIDUAL_TOL {
        return Ok(false);
    }
    let from = end - opts.stall_window;
    if from < orbit.start() {
        return Ok(false);
    }
    Ok((orbit.interpolate(from)? - last).norm() <= opts.stall_tol)
}

/// Integrates the flow frozen at `t_frozen` from `w0` until it stalls and
/// matches the end point against the critical set.
pub fn omega_limit(
    model: &EnergyModel,
    t_frozen: f64,
    w0: &Vector,
    opts: &OmegaOptions,
) -> Result<OmegaLimit> {
    let mut solve = opts.solve.clone();
    solve.dense_output = true;
    let mut orbit = Trajectory::default_for(t_frozen);
    if model.gradient(t_frozen, w0)?.norm() <= RESIDUAL_TOL {
        orbit = solve_autonomous(model, t_frozen, w0, (0.0, opts.stall_window), &solve)?;
        let point = classify(model, t_frozen, w0)?;
        return Ok(OmegaLimit { point, orbit });
    }
    let mut s = 0.0;
    let mut chunk = opts.chunk;
    let mut w = w0.clone();
    loop {
        let piece = solve_autonomous(model, t_frozen, &w, (s, s + chunk), &solve)?;
        w = piece.last_state();
        s = piece.end();
        orbit.extend(piece)?;
        if stalled(model, t_frozen, &orbit, opts)? {
            break;
        }
        if s >= opts.max_span {
            return Err(Error::NonConvergence {
                reason: format!("orbit did not stall within fast time {}", opts.max_span),
                state: w.iter().copied().collect(),
            });
        }
        chunk = (2.0 * chunk).min(opts.max_span - s).max(opts.stall_window);
    }

    let bx = match &opts.search_box {
        Some(b) => b.clone(),
        None => {
            let reach = orbit
                .states()
                .iter()
                .flat_map(|x| x.iter().map(|v| v.abs()).collect::<Vec<_>>())
                .fold(0.0f64, f64::max);
            SampleBox::symmetric(model.dimension(), 1.5 * reach + 0.5)?
        }
    };
    let set = find_critical_points(model, t_frozen, &bx, &opts.search)?;
    let (nearest, dist) = set
        .nearest(&w)
        .ok_or_else(|| Error::NotFound("critical set is empty".into()))?;
    if dist > MATCH_RADIUS {
        return Err(Error::NonConvergence {
            reason: format!("orbit end point is {dist:e} from the nearest critical point"),
            state: w.iter().copied().collect(),
        });
    }
    Ok(OmegaLimit {
        point: nearest.clone(),
        orbit,
    })
}

/// `(u*,−, u*,+)`: the largest negative and smallest positive critical points
/// of a one-dimensional `F(t*, ·)` inside `bx`.
pub fn one_d_extremes(
    model: &EnergyModel,
    t_star: f64,
    bx: &SampleBox,
    search: &CriticalSearch,
) -> Result<(f64, f64)> {
    if model.dimension() != 1 {
        return Err(Error::Precondition(format!(
            "one-dimensional extremes need n = 1, model has n = {}",
            model.dimension()
        )));
    }
    let set = find_critical_points(model, t_star, bx, search)?;
    let tol = DEDUP_RADIUS;
    let plus = set
        .points
        .iter()
        .map(|p| p.location[0])
        .filter(|&x| x > tol)
        .fold(f64::INFINITY, f64::min);
    let minus = set
        .points
        .iter()
        .map(|p| p.location[0])
        .filter(|&x| x < -tol)
        .fold(f64::NEG_INFINITY, f64::max);
    if !plus.is_finite() {
        return Err(Error::NotFound("no positive critical point in the box".into()));
    }
    if !minus.is_finite() {
        return Err(Error::NotFound("no negative critical point in the box".into()));
    }
    Ok((minus, plus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{make_polynomial, make_quartic_family, PolyTerm};
    use approx::assert_relative_eq;

    fn octic() -> EnergyModel {
        // F = (t_c − t)x²/2 + 2.75x⁴/4 − 3.25x⁶/6 + x⁸/8 with t_c = 0.5: at
        // t = 1 the positive critical points are 0.5, 1 and √2.
        make_polynomial(
            "octic",
            1,
            1.5,
            vec![
                PolyTerm::new(vec![0.25, -0.5], vec![2], 1.0),
                PolyTerm::new(vec![2.75 / 4.0], vec![4], 1.0),
                PolyTerm::new(vec![-3.25 / 6.0], vec![6], 1.0),
                PolyTerm::new(vec![1.0 / 8.0], vec![8], 1.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn quartic_1d_critical_set_at_t_star() {
        let m = make_quartic_family(1, 0.5, 1.5).unwrap();
        let bx = SampleBox::symmetric(1, 2.0).unwrap();
        let set = find_critical_points(&m, 1.0, &bx, &CriticalSearch::default()).unwrap();
        assert_eq!(set.points.len(), 3);
        let r = 0.5f64.sqrt();
        let expected = [(-r, 1.0), (0.0, -0.5), (r, 1.0)];
        for (p, (x, h)) in set.points.iter().zip(expected) {
            assert_relative_eq!(p.location[0], x, epsilon = 1e-10);
            assert_relative_eq!(p.hessian_eigenvalues[0], h, epsilon = 1e-9);
            assert!(p.residual <= RESIDUAL_TOL);
        }
        assert_eq!(set.points[0].classification, Classification::StrictLocalMin);
        assert_eq!(set.points[1].classification, Classification::Saddle);
        assert!(set.coverage() > 0.5);
    }

    #[test]
    fn quartic_2d_critical_sets() {
        let m = make_quartic_family(2, 0.5, 1.5).unwrap();
        let bx = SampleBox::symmetric(2, 2.0).unwrap();
        let set = find_critical_points(&m, 1.0, &bx, &CriticalSearch::default()).unwrap();
        assert_eq!(set.points.len(), 3);
        let r = 0.5f64.sqrt();
        let origin = set.points.iter().find(|p| p.norm() < 1e-9).unwrap();
        assert_eq!(origin.classification, Classification::Saddle);
        assert_relative_eq!(origin.hessian_eigenvalues[0], -0.5, epsilon = 1e-12);
        assert_relative_eq!(origin.hessian_eigenvalues[1], 1.0, epsilon = 1e-12);
        for sign in [-1.0, 1.0] {
            let p = set
                .nearest(&Vector::from_vec(vec![sign * r, 0.0]))
                .filter(|(_, d)| *d < 1e-9)
                .unwrap()
                .0;
            assert_eq!(p.classification, Classification::StrictLocalMin);
            assert_relative_eq!(p.hessian_eigenvalues[0], 1.0, epsilon = 1e-9);
            assert_relative_eq!(p.hessian_eigenvalues[1], 1.5, epsilon = 1e-9);
        }

        let at0 = find_critical_points(&m, 0.0, &bx, &CriticalSearch::default()).unwrap();
        assert_eq!(at0.points.len(), 1);
        assert_eq!(at0.points[0].classification, Classification::StrictLocalMin);
    }

    #[test]
    fn degenerate_points_are_flagged() {
        // F = x⁴/4 at the critical time has a degenerate minimum at 0.
        let m = make_quartic_family(1, 0.5, 1.5).unwrap();
        let p = classify(&m, 0.5, &Vector::zeros(1)).unwrap();
        assert_eq!(p.classification, Classification::Degenerate);
        let found = newton(&m, 0.5, &Vector::from_element(1, 0.3), 10.0, 200).unwrap().unwrap();
        assert!(found.norm() < 1e-6);
    }

    #[test]
    fn omega_limits_follow_the_phase_line() {
        let m = make_quartic_family(1, 0.5, 1.5).unwrap();
        let r = 0.5f64.sqrt();
        let opts = OmegaOptions::default();
        let up = omega_limit(&m, 1.0, &Vector::from_element(1, 0.01), &opts).unwrap();
        assert!((up.point.location[0] - r).abs() <= 1e-6);
        let down = omega_limit(&m, 1.0, &Vector::from_element(1, -0.01), &opts).unwrap();
        assert!((down.point.location[0] + r).abs() <= 1e-6);
        let fixed = omega_limit(&m, 1.0, &Vector::from_element(1, r), &opts).unwrap();
        assert_relative_eq!(fixed.point.location[0], r, epsilon = 1e-15);
    }

    #[test]
    fn one_d_extremes_pick_the_innermost_roots() {
        let m = make_quartic_family(1, 0.5, 1.5).unwrap();
        let bx = SampleBox::symmetric(1, 2.0).unwrap();
        let (lo, hi) = one_d_extremes(&m, 1.0, &bx, &CriticalSearch::default()).unwrap();
        assert_relative_eq!(lo, -0.5f64.sqrt(), epsilon = 1e-10);
        assert_relative_eq!(hi, 0.5f64.sqrt(), epsilon = 1e-10);

        let (lo, hi) = one_d_extremes(&octic(), 1.0, &bx, &CriticalSearch::default()).unwrap();
        assert_relative_eq!(hi, 0.5, epsilon = 1e-10);
        assert_relative_eq!(lo, -0.5, epsilon = 1e-10);

        let m2 = make_quartic_family(2, 0.5, 1.5).unwrap();
        let bx2 = SampleBox::symmetric(2, 2.0).unwrap();
        assert!(matches!(
            one_d_extremes(&m2, 1.0, &bx2, &CriticalSearch::default()),
            Err(Error::Precondition(_))
        ));
    }
}
