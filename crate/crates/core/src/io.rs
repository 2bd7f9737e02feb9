//! Plain-text emitters: CSV with a header row and 17 significant digits,
//! events as JSON lines.

use std::io::{self, Write};

use crate::energy::EnergyModel;
use crate::error::Result;
use crate::integrator::Trajectory;
use crate::limit::{Heteroclinic, LimitCurve, RescaledOrbit};
use crate::spectral::SpectralProfile;

/// Formats `v` with 17 significant digits, which round-trips every `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn row<W: Write>(out: &mut W, values: impl IntoIterator<Item = f64>) -> io::Result<()> {
    let line: Vec<String> = values.into_iter().map(fmt_f64).collect();
    writeln!(out, "{}", line.join(","))
}

fn header<W: Write>(out: &mut W, first: &str, n: usize, prefix: &str, rest: &[&str]) -> io::Result<()> {
    let mut cols = vec![first.to_string()];
    cols.extend((1..=n).map(|i| format!("{prefix}{i}")));
    cols.extend(rest.iter().map(|s| s.to_string()));
    writeln!(out, "{}", cols.join(","))
}

fn io_err(e: io::Error) -> crate::Error {
    crate::Error::Domain(format!("write failed: {e}"))
}

/// Columns `t, x_1..x_n, norm, F, grad_norm, log_norm` at the stored steps.
/// For the frozen-time flow the first column is the fast time `s`.
pub fn write_trajectory_csv<W: Write>(
    out: &mut W,
    model: &EnergyModel,
    traj: &Trajectory,
) -> Result<()> {
    let time = if traj.frozen_time.is_some() { "s" } else { "t" };
    header(out, time, traj.dimension(), "x_", &["norm", "F", "grad_norm", "log_norm"])
        .map_err(io_err)?;
    for k in 0..traj.len() {
        let t = traj.times[k];
        let tau = traj.frozen_time.unwrap_or(t);
        let u = traj.state(k);
        let f = model.evaluate(tau, &u)?;
        let g = model.gradient(tau, &u)?.norm();
        let log_norm = traj.log_norm(k);
        let values = std::iter::once(t)
            .chain(u.iter().copied())
            .chain([log_norm.exp(), f, g, log_norm]);
        row(out, values).map_err(io_err)?;
    }
    Ok(())
}

/// One JSON object per recorded event.
pub fn write_events_jsonl<W: Write>(out: &mut W, traj: &Trajectory) -> Result<()> {
    for e in &traj.events {
        let line = serde_json::to_string(e)
            .map_err(|err| crate::Error::Domain(format!("event serialization failed: {err}")))?;
        writeln!(out, "{line}").map_err(io_err)?;
    }
    Ok(())
}

/// Columns `t, lambda_1..lambda_n, Lambda` on the profile grid.
pub fn write_spectral_csv<W: Write>(out: &mut W, profile: &SpectralProfile) -> Result<()> {
    let n = profile.eigenvalues.first().map_or(0, |v| v.len());
    header(out, "t", n, "lambda_", &["Lambda"]).map_err(io_err)?;
    let nodes = profile.primitive_nodes();
    for (k, &t) in profile.grid.iter().enumerate() {
        let values = std::iter::once(t)
            .chain(profile.eigenvalues[k].iter().copied())
            .chain([nodes[k]]);
        row(out, values).map_err(io_err)?;
    }
    Ok(())
}

/// Columns `s, w_1..w_n, norm, alignment` along the orbit, where alignment
/// is `⟨w, e₁⟩/‖w‖`.
pub fn write_heteroclinic_csv<W: Write>(
    out: &mut W,
    het: &Heteroclinic,
    e1: &crate::Vector,
) -> Result<()> {
    let orbit = &het.orbit;
    header(out, "s", orbit.dimension(), "w_", &["norm", "alignment"]).map_err(io_err)?;
    for k in 0..orbit.len() {
        let w = orbit.state(k);
        let norm = w.norm();
        let align = if norm > 0.0 { w.dot(e1) / norm } else { 0.0 };
        let values = std::iter::once(orbit.times[k])
            .chain(w.iter().copied())
            .chain([norm, align]);
        row(out, values).map_err(io_err)?;
    }
    Ok(())
}

/// Columns `t, u_1..u_n` of the projected limit curve.
pub fn write_limit_curve_csv<W: Write>(out: &mut W, curve: &LimitCurve) -> Result<()> {
    let n = curve.states.first().map_or(0, |v| v.len());
    header(out, "t", n, "u_", &[]).map_err(io_err)?;
    for (t, s) in curve.times.iter().zip(&curve.states) {
        row(out, std::iter::once(*t).chain(s.iter().copied())).map_err(io_err)?;
    }
    Ok(())
}

/// Columns `s, w_1..w_n` of a rescaled orbit.
pub fn write_rescaled_csv<W: Write>(out: &mut W, orbit: &RescaledOrbit) -> Result<()> {
    let n = orbit.states.first().map_or(0, |v| v.len());
    header(out, "s", n, "w_", &[]).map_err(io_err)?;
    for (s, w) in orbit.s.iter().zip(&orbit.states) {
        row(out, std::iter::once(*s).chain(w.iter().copied())).map_err(io_err)?;
    }
    Ok(())
}
