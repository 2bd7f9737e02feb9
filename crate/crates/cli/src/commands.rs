use std::path::PathBuf;

use delaystab::critical::{find_critical_points, CriticalSearch, OmegaOptions};
use delaystab::io::{
    write_events_jsonl, write_heteroclinic_csv, write_limit_curve_csv, write_spectral_csv,
    write_trajectory_csv,
};
use delaystab::limit::Side;
use delaystab::spectral::{spectral_profile, uniform_grid};
use delaystab::{
    blowup_time, estimate_limit_curve, heteroclinic, predict_jump_target, run_epsilon_sweep,
    validate_assumptions, verify_delay, EnergyModel, SpectralProfile, ValidationOptions,
};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// What a command produced: the summary payload, files to write and an
/// optional failure that still comes with a report.
pub struct Report {
    pub result: Value,
    pub files: Vec<(PathBuf, Vec<u8>)>,
    pub failure: Option<CliError>,
}

impl Report {
    fn ok(result: Value) -> Self {
        Self {
            result,
            files: Vec::new(),
            failure: None,
        }
    }
}

struct Setup {
    model: EnergyModel,
    profile: SpectralProfile,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup, CliError> {
    let model = cfg.model.build()?;
    let profile = spectral_profile(&model, &uniform_grid(model.horizon(), cfg.grid_points), None)?;
    Ok(Setup { model, profile })
}

fn search(cfg: &ExperimentConfig) -> CriticalSearch {
    CriticalSearch {
        seed: cfg.seed,
        ..CriticalSearch::default()
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn csv<F>(name: &str, write: F) -> Result<(PathBuf, Vec<u8>), CliError>
where
    F: FnOnce(&mut Vec<u8>) -> delaystab::Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok((PathBuf::from(name), buf))
}

fn eps_tag(eps: f64) -> String {
    format!("{eps:e}")
}

pub fn validate(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let model = cfg.model.build()?;
    let opts = ValidationOptions {
        seed: cfg.seed,
        search: search(cfg),
        ..ValidationOptions::default()
    };
    let grid = uniform_grid(model.horizon(), cfg.grid_points);
    let report = validate_assumptions(&model, &grid, &cfg.search_box(model.dimension())?, &opts)?;
    let failures = report.failures();
    let mut out = Report::ok(json!({ "report": to_value(&report), "failures": failures }));
    if !failures.is_empty() {
        out.failure = Some(CliError::Hypothesis(format!(
            "failed hypotheses: {}",
            failures.join(", ")
        )));
    }
    Ok(out)
}

pub fn analyze(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let s = setup(cfg)?;
    let times = blowup_time(&s.profile)?;
    let horizon = s.model.horizon();
    let (note, margins) = match (times.t_star, times.t_c) {
        (Some(ts), Some(tc)) => (
            Value::Null,
            json!({ "delay": ts - tc, "to_horizon": horizon - ts }),
        ),
        (Some(ts), None) => (Value::Null, json!({ "to_horizon": horizon - ts })),
        (None, _) => (json!("t* undefined (Λ never returns to 0)"), Value::Null),
    };
    let mut out = Report::ok(json!({
        "times": to_value(&times),
        "margins": margins,
        "note": note,
    }));
    out.files
        .push(csv("spectral.csv", |b| write_spectral_csv(b, &s.profile))?);
    Ok(out)
}

pub fn critical(cfg: &ExperimentConfig, time: Option<f64>) -> Result<Report, CliError> {
    let s = setup(cfg)?;
    let t = match time {
        Some(t) => t,
        None => blowup_time(&s.profile)?.t_star.unwrap_or(0.0),
    };
    let set = find_critical_points(&s.model, t, &cfg.search_box(s.model.dimension())?, &search(cfg))?;
    Ok(Report::ok(json!({
        "time": t,
        "points": to_value(&set.points),
        "seeds": set.seeds,
        "coverage": set.coverage(),
    })))
}

fn t_star_of(profile: &SpectralProfile) -> Result<f64, CliError> {
    blowup_time(profile)?
        .t_star
        .ok_or_else(|| CliError::Hypothesis("t* undefined (Λ never returns to 0)".into()))
}

fn error_value(e: CliError) -> Value {
    json!({ "kind": e.kind(), "message": e.to_string() })
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let s = setup(cfg)?;
    let times = blowup_time(&s.profile)?;
    let sweep = run_epsilon_sweep(&s.model, &s.profile, &cfg.sweep())?;
    let t_star = sweep.t_star;
    let estimates = sweep.estimates();
    let mut files = Vec::new();
    for run in &sweep.runs {
        if let Some(traj) = &run.trajectory {
            let tag = eps_tag(run.estimate.eps);
            files.push(csv(&format!("trajectory_eps_{tag}.csv"), |b| {
                write_trajectory_csv(b, &s.model, traj)
            })?);
            files.push(csv(&format!("events_eps_{tag}.jsonl"), |b| write_events_jsonl(b, traj))?);
        }
    }

    let delay = match verify_delay(&estimates, &times) {
        Ok(r) => to_value(&r),
        Err(e) => error_value(e.into()),
    };

    let opts = OmegaOptions {
        search: search(cfg),
        ..OmegaOptions::default()
    };
    let target = match predict_jump_target(&s.model, &s.profile, t_star, cfg.sign, &opts) {
        Ok(t) => to_value(&t),
        Err(e) => error_value(e.into()),
    };

    let curve = match sweep.smallest().and_then(|r| r.trajectory.as_ref()) {
        Some(traj) => {
            let end = traj.end();
            let grid: Vec<f64> = (0..cfg.curve_points)
                .map(|k| end * k as f64 / (cfg.curve_points - 1) as f64)
                .collect();
            let bx = cfg.search_box(s.model.dimension())?;
            match estimate_limit_curve(&s.model, &s.profile, traj, &grid, &bx, &search(cfg)) {
                Ok(c) => {
                    files.push(csv("limit_curve.csv", |b| write_limit_curve_csv(b, &c))?);
                    json!({ "jumps": to_value(&c.jumps), "lipschitz": c.lipschitz })
                }
                Err(e) => error_value(e.into()),
            }
        }
        None => Value::Null,
    };

    let h = heteroclinic(&s.model, &s.profile, t_star, cfg.sign, cfg.delta0, &opts)?;
    files.push(csv(&format!("heteroclinic_{}.csv", side_name(cfg.sign)), |b| {
        write_heteroclinic_csv(b, &h, &s.profile.e1)
    })?);

    let failed: Vec<f64> = estimates
        .iter()
        .filter(|e| e.error.is_some())
        .map(|e| e.eps)
        .collect();
    let mut out = Report {
        result: json!({
            "times": to_value(&times),
            "mu": to_value(&sweep.mu),
            "e1": sweep.e1.iter().copied().collect::<Vec<f64>>(),
            "estimates": to_value(&estimates),
            "delay": delay,
            "jump_target": target,
            "limit_curve": curve,
        }),
        files,
        failure: None,
    };
    if failed.len() == estimates.len() {
        out.failure = Some(CliError::Numerical("every sweep entry failed".into()));
    }
    Ok(out)
}

fn side_name(side: Side) -> &'static str {
    match side {
        Side::Plus => "plus",
        Side::Minus => "minus",
    }
}

pub fn heteroclinics(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let s = setup(cfg)?;
    let t_star = t_star_of(&s.profile)?;
    let opts = OmegaOptions {
        search: search(cfg),
        ..OmegaOptions::default()
    };
    let mut files = Vec::new();
    let mut sides = Vec::new();
    for side in [Side::Plus, Side::Minus] {
        let target = predict_jump_target(&s.model, &s.profile, t_star, side, &opts)?;
        let h = heteroclinic(&s.model, &s.profile, t_star, side, cfg.delta0, &opts)?;
        files.push(csv(&format!("heteroclinic_{}.csv", side_name(side)), |b| {
            write_heteroclinic_csv(b, &h, &s.profile.e1)
        })?);
        sides.push(json!({
            "side": side_name(side),
            "omega": to_value(&h.omega),
            "alignment_ok": h.alignment_ok,
            "min_alignment": h.min_alignment(),
            "orbit_points": h.orbit.len(),
            "warnings": h.warnings,
            "positive_definite": target.positive_definite,
            "weak_only": target.weak_only,
            "degenerate": target.degenerate,
        }));
    }
    Ok(Report {
        result: json!({ "t_star": t_star, "delta0": cfg.delta0, "orbits": sides }),
        files,
        failure: None,
    })
}
