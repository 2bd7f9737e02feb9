//! Acceptance criteria on the built-in benchmark families, one test per
//! criterion. Each prints a `PASS`/`FAIL` line before asserting.

mod common;

use std::time::Instant;

use common::*;
use delaystab::critical::{CriticalSearch, OmegaOptions};
use delaystab::energy::{PolynomialEnergy, TimeProfile};
use delaystab::limit::{
    best_shift_discrepancy, check_energy_gap, estimate_limit_curve, DiagnosticBounds, Side,
};
use delaystab::spectral::uniform_grid;
use delaystab::{
    blowup_time, check_gronwall_bounds, energy_balance_residual, make_commuting_family,
    make_rotating_family, predict_jump_target, rescale_trajectory, solve_autonomous,
    solve_singular, validate_assumptions, verify_delay, EnergyModel, Matrix, SampleBox,
    SolveOptions, ValidationOptions, Vector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn criterion_1_blowup_time() {
    let start = Instant::now();
    let model = quartic(1);
    let times = blowup_time(&profile_of(&model)).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let t_star = times.t_star.unwrap();
    let t_c = times.t_c.unwrap();
    // Λ(t) = 0.5t − t²/2 vanishes at t = 1; λ₁ = 0.5 − t at t = 0.5.
    let ok = (t_star - 1.0).abs() <= 1e-6 && (t_c - 0.5).abs() <= 1e-8 && elapsed < 1.0;
    report(
        1,
        "t* and t_c on the 1D quartic",
        ok,
        &format!("t* = {t_star:.12}, t_c = {t_c:.12}, {elapsed:.3} s"),
    );
    assert!(ok);
}

#[test]
fn criterion_2_delayed_loss_of_stability() {
    let fx = quartic_1d_sweep();
    let mut ok = fx.elapsed.as_secs_f64() < 120.0;
    let mut lines = Vec::new();
    for est in fx.sweep.estimates() {
        let t = est.t_eps.expect("every sweep entry reaches μ");
        let eps = est.eps;
        let allowed = 3.0 * eps * (1.0 / eps).ln() / 0.5 + 0.01;
        let entry_ok = (t - 1.0).abs() <= allowed && t - 0.5 >= 0.4;
        ok &= entry_ok;
        lines.push(format!("ε = {eps:e}: t_ε = {t:.6} (allowed ±{allowed:.4})"));
    }
    let delay = verify_delay(&fx.sweep.estimates(), &fx.times).unwrap();
    ok &= (delay.extrapolated - 1.0).abs() <= 0.02 && delay.delayed;
    report(
        2,
        "delayed loss of stability",
        ok,
        &format!(
            "{}; extrapolated {:.5}; μ = {:.5}; {:.2} s",
            lines.join(", "),
            delay.extrapolated,
            fx.sweep.mu.mu,
            fx.elapsed.as_secs_f64()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_3_pre_blowup_collapse() {
    let fx = quartic_1d_sweep();
    let sups: Vec<(f64, f64)> = fx
        .sweep
        .runs
        .iter()
        .map(|r| {
            let traj = r.trajectory.as_ref().unwrap();
            (r.estimate.eps, traj.max_log_norm_on(0.0, 0.9).exp())
        })
        .collect();
    let monotone = sups.windows(2).all(|w| w[1].1 < w[0].1);
    let smallest = sups.last().unwrap().1;
    let ok = monotone && smallest <= 1e-6;
    let detail = sups
        .iter()
        .map(|(e, s)| format!("ε = {e:e}: sup = {s:.3e}"))
        .collect::<Vec<_>>()
        .join(", ");
    report(
        3,
        "sup over [0, 0.9] of ‖u_ε‖",
        ok,
        &format!("{detail}; monotone = {monotone}"),
    );
    assert!(ok);
}

#[test]
fn criterion_4_jump_target() {
    let fx = quartic_2d_sweep();
    let t_star = fx.times.t_star.unwrap();
    let target = 0.5f64.sqrt();
    let opts = OmegaOptions::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for side in [Side::Plus, Side::Minus] {
        let pred = predict_jump_target(&fx.model, &fx.profile, t_star, side, &opts).unwrap();
        let expected = Vector::from_vec(vec![side.sign() * target, 0.0]);
        let err = (pred.point.vector() - &expected).norm();
        ok &= err <= 1e-3 && pred.positive_definite;
        parts.push(format!("{} predicted err {err:.2e}", side.label()));
    }

    let run = fx.sweep.smallest().unwrap();
    let traj = run.trajectory.as_ref().unwrap();
    let grid = uniform_grid(1.2, 121);
    let bx = SampleBox::symmetric(2, 2.0).unwrap();
    let curve =
        estimate_limit_curve(&fx.model, &fx.profile, traj, &grid, &bx, &CriticalSearch::default())
            .unwrap();
    let jump = curve.jumps.first();
    let curve_err = jump.map_or(f64::INFINITY, |j| {
        (Vector::from_vec(j.u_plus.clone()) - Vector::from_vec(vec![target, 0.0])).norm()
    });
    ok &= curve.jumps.len() == 1 && curve_err <= 1e-3;
    parts.push(format!(
        "+ curve err {curve_err:.2e} at t = {:.4}",
        jump.map_or(f64::NAN, |j| j.time)
    ));
    report(4, "jump target on the 2D quartic", ok, &parts.join(", "));
    assert!(ok);
}

#[test]
fn criterion_5_heteroclinic_convergence() {
    let fx = quartic_1d_sweep();
    let mut errors = Vec::new();
    for run in &fx.sweep.runs {
        let eps = run.estimate.eps;
        if eps > 1.5e-3 {
            continue;
        }
        let traj = run.trajectory.as_ref().unwrap();
        let t_eps = run.estimate.t_eps.unwrap();
        let orbit = rescale_trajectory(traj, t_eps, eps, (-5.0, 15.0), 801).unwrap();
        let (shift, err) = best_shift_discrepancy(&orbit, closed_form_heteroclinic, (-30.0, 30.0));
        errors.push((eps, err, shift));
    }
    let at_1e3 = errors.iter().find(|e| e.0 == 1e-3).unwrap().1;
    let at_1e4 = errors.iter().find(|e| e.0 == 1e-4).unwrap().1;
    let ok = at_1e3 <= 5e-3 && at_1e4 < at_1e3;
    let detail = errors
        .iter()
        .map(|(e, d, s)| format!("ε = {e:e}: sup err {d:.3e} (shift {s:.3})"))
        .collect::<Vec<_>>()
        .join(", ");
    report(5, "rescaled orbit vs closed-form heteroclinic", ok, &detail);
    assert!(ok);
}

fn gronwall_at(n: usize) -> (bool, String) {
    let model = quartic(n);
    let profile = profile_of(&model);
    let fx = if n == 1 { quartic_1d_sweep() } else { quartic_2d_sweep() };
    let run = fx.sweep.runs.iter().find(|r| r.estimate.eps == 1e-3).unwrap();
    let traj = run.trajectory.as_ref().unwrap();
    let t_eps = run.estimate.t_eps.unwrap();
    let t_star = fx.times.t_star.unwrap();
    let u0 = traj.state(0);
    let bounds =
        DiagnosticBounds::for_initial(&model, &profile, t_star, &fx.sweep.mu, &u0).unwrap();
    let r = check_gronwall_bounds(&model, traj, &profile, &bounds, (0.0, t_eps)).unwrap();
    (
        r.all_ok(),
        format!(
            "n = {n}: upper {:.2e}, lower {:.2e}, cone {:.2e} over {} points",
            r.upper.worst_slack, r.lower.worst_slack, r.cone.worst_slack, r.points
        ),
    )
}

#[test]
fn criterion_6_gronwall_sandwich() {
    let (ok1, d1) = gronwall_at(1);
    let (ok2, d2) = gronwall_at(2);
    let ok = ok1 && ok2;
    report(6, "Gronwall sandwich and cone condition", ok, &format!("{d1}; {d2}"));
    assert!(ok);
}

#[test]
fn criterion_7_energy_gap() {
    let fx = quartic_1d_sweep();
    let run = fx.sweep.runs.iter().find(|r| r.estimate.eps == 1e-3).unwrap();
    let traj = run.trajectory.as_ref().unwrap();
    let t_star = fx.times.t_star.unwrap();
    let bounds =
        DiagnosticBounds::for_initial(&fx.model, &fx.profile, t_star, &fx.sweep.mu, &traj.state(0))
            .unwrap();
    let gap = check_energy_gap(&fx.model, traj, &bounds).unwrap();
    report(
        7,
        "energy-gap inequality",
        gap.ok,
        &format!(
            "dissipation {:.5} ≥ μG_μ/2 = {:.5} (G_μ = {:.5}) over [{:.6}, {:.6}]",
            gap.dissipation, gap.bound, bounds.g_mu, gap.window.0, gap.window.1
        ),
    );
    assert!(gap.ok);
}

fn models_for_gradients() -> Vec<EnergyModel> {
    vec![
        quartic(1),
        quartic(3),
        make_commuting_family(
            Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 1.0])),
            TimeProfile::polynomial(vec![0.25, 0.5]),
            1.5,
        )
        .unwrap(),
        make_rotating_family(1.0, 0.5, 1.5).unwrap(),
        EnergyModel::new(PolynomialEnergy::pure_quadratic(0.5, 1.5).unwrap()),
    ]
}

fn gradient_check() -> (bool, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst = 0.0f64;
    for model in models_for_gradients() {
        let n = model.dimension();
        for _ in 0..100 {
            let t = rng.random_range(0.0..model.horizon());
            let x = Vector::from_fn(n, |_, _| rng.random_range(-1.5..1.5));
            let g = model.gradient(t, &x).unwrap();
            let mut fd = Vector::zeros(n);
            for i in 0..n {
                let h = 1e-6 * (1.0 + x[i].abs());
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                fd[i] = (model.evaluate(t, &xp).unwrap() - model.evaluate(t, &xm).unwrap())
                    / (2.0 * h);
            }
            worst = worst.max((&g - &fd).norm() / (1.0 + fd.norm()));
        }
    }
    (worst <= 1e-5, worst)
}

fn balance_check() -> (bool, f64, f64) {
    let model = quartic(2);
    let eps = 1e-2;
    let u0 = Vector::from_vec(vec![0.3, 0.2]);
    let residual = |rtol: f64| {
        let opts = SolveOptions::default().with_tolerances(rtol, rtol * 1e-4);
        let traj = solve_singular(&model, eps, &u0, (0.0, 1.5), &opts).unwrap();
        let max_f = traj
            .states()
            .iter()
            .zip(&traj.times)
            .map(|(u, &t)| model.evaluate(t, u).unwrap().abs())
            .fold(0.0, f64::max);
        (energy_balance_residual(&model, &traj, eps).unwrap(), max_f)
    };
    let (coarse, max_f) = residual(1e-6);
    let (fine, _) = residual(5e-7);
    // The residual is first order in the tolerance; "halves" is read as a
    // ratio of at most 0.5 within 10%.
    (
        coarse <= 1e-6 * (1.0 + max_f) && fine <= 0.55 * coarse,
        coarse,
        fine,
    )
}

fn descent_check() -> (bool, f64) {
    let model = quartic(2);
    let w0 = Vector::from_vec(vec![1e-3, 0.4]);
    let opts = SolveOptions::default().with_tolerances(1e-10, 1e-13);
    let orbit = solve_autonomous(&model, 1.0, &w0, (0.0, 40.0), &opts).unwrap();
    let values: Vec<f64> = orbit
        .states()
        .iter()
        .map(|w| model.evaluate(1.0, w).unwrap())
        .collect();
    let worst = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    (worst <= 1e-10, worst)
}

fn a1_check() -> (bool, String) {
    let bx = SampleBox::symmetric(2, 2.0).unwrap();
    let opts = ValidationOptions::default();
    let rotating = make_rotating_family(1.0, 0.5, 1.5).unwrap();
    let rot = validate_assumptions(&rotating, &uniform_grid(1.5, 31), &bx, &opts).unwrap();
    // A(t) = I − (1/4 + t/2)·diag(2, 1): fixed eigenbasis and λ₁ = 0.5 − t.
    let commuting = make_commuting_family(
        Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 1.0])),
        TimeProfile::polynomial(vec![0.25, 0.5]),
        1.5,
    )
    .unwrap();
    let com = validate_assumptions(&commuting, &uniform_grid(1.5, 31), &bx, &opts).unwrap();
    (
        !rot.a1_ok && com.a1_ok,
        format!(
            "rotating drift {:.2e} (rejected: {}), commuting drift {:.2e} (accepted: {})",
            rot.a1_max_drift, !rot.a1_ok, com.a1_max_drift, com.a1_ok
        ),
    )
}

fn linear_check() -> (bool, f64) {
    let model = EnergyModel::new(PolynomialEnergy::pure_quadratic(0.5, 1.5).unwrap());
    let eps = 1e-2;
    let u0 = Vector::from_element(1, 0.1);
    let traj = solve_singular(&model, eps, &u0, (0.0, 1.4), &SolveOptions::default()).unwrap();
    let worst = (0..traj.len())
        .map(|k| {
            let t = traj.times[k];
            let exact = 0.1f64.ln() - quartic_primitive(0.5, t) / eps;
            (traj.log_norm(k) - exact).abs()
        })
        .fold(0.0, f64::max);
    // |ln(a/b)| ≤ 1e-4 is relative agreement to about 1e-4.
    (worst <= 1e-4, worst)
}

#[test]
fn criterion_8_property_suites() {
    let (grad_ok, grad) = gradient_check();
    let (bal_ok, coarse, fine) = balance_check();
    let (desc_ok, desc) = descent_check();
    let (a1_ok, a1) = a1_check();
    let (lin_ok, lin) = linear_check();
    let ok = grad_ok && bal_ok && desc_ok && a1_ok && lin_ok;
    report(
        8,
        "property suites",
        ok,
        &format!(
            "gradient rel err {grad:.2e}; energy balance {coarse:.2e} → {fine:.2e}; \
             descent worst increase {desc:.2e}; {a1}; linear log err {lin:.2e}"
        ),
    );
    assert!(grad_ok, "gradient check {grad}");
    assert!(bal_ok, "energy balance {coarse} -> {fine}");
    assert!(desc_ok, "descent {desc}");
    assert!(a1_ok, "{a1}");
    assert!(lin_ok, "linear {lin}");
}
