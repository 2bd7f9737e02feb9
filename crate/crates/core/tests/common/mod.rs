#![allow(dead_code)]

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use delaystab::limit::{run_epsilon_sweep, Sweep, SweepConfig};
use delaystab::spectral::{spectral_profile, uniform_grid, StabilityTimes};
use delaystab::{blowup_time, make_quartic_family, EnergyModel, SpectralProfile, Vector};

pub const HORIZON: f64 = 1.5;

/// Writes past the test harness capture so the line shows in plain `cargo test` output.
pub fn report(id: u32, title: &str, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{verdict} [{id}] {title}: {detail}");
    let _ = out.flush();
}

pub fn quartic(n: usize) -> EnergyModel {
    make_quartic_family(n, 0.5, HORIZON).unwrap()
}

pub fn profile_of(model: &EnergyModel) -> SpectralProfile {
    spectral_profile(model, &uniform_grid(model.horizon(), 61), None).unwrap()
}

pub struct Fixture {
    pub model: EnergyModel,
    pub profile: SpectralProfile,
    pub times: StabilityTimes,
    pub sweep: Sweep,
    pub elapsed: Duration,
}

fn build(n: usize) -> Fixture {
    let model = quartic(n);
    let profile = profile_of(&model);
    let times = blowup_time(&profile).unwrap();
    let config = SweepConfig {
        eps: vec![1e-2, 1e-3, 1e-4],
        ..SweepConfig::default()
    };
    let start = Instant::now();
    let sweep = run_epsilon_sweep(&model, &profile, &config).unwrap();
    let elapsed = start.elapsed();
    Fixture {
        model,
        profile,
        times,
        sweep,
        elapsed,
    }
}

/// The `ε ∈ {1e-2, 1e-3, 1e-4}`, `α = 1`, sign `+` sweep on the quartic in one dimension.
pub fn quartic_1d_sweep() -> &'static Fixture {
    static CELL: OnceLock<Fixture> = OnceLock::new();
    CELL.get_or_init(|| build(1))
}

pub fn quartic_2d_sweep() -> &'static Fixture {
    static CELL: OnceLock<Fixture> = OnceLock::new();
    CELL.get_or_init(|| build(2))
}

/// Heteroclinic of `ẇ = w/2 − w³` leaving 0 upward: `√0.5·(1 + e^{−s})^{−1/2}`.
pub fn closed_form_heteroclinic(s: f64) -> Vector {
    Vector::from_element(1, 0.5f64.sqrt() / (1.0 + (-s).exp()).sqrt())
}

/// `Λ(t) = t_c·t − t²/2` of the quartic family.
pub fn quartic_primitive(t_c: f64, t: f64) -> f64 {
    t_c * t - 0.5 * t * t
}
