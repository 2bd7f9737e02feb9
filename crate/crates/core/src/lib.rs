//! Numerical study of singularly perturbed gradient flows
//! `ε u̇ = −∇ₓF(t, u)` whose trivial equilibrium loses stability.
//!
//! The minimal eigenvalue `λ₁(t)` of `A(t) = ∇²ₓF(t, 0)` turns negative at
//! `t_c`, but for small `ε` solutions started near zero only leave it at the
//! first zero `t*` of `Λ(t) = ∫₀ᵗ λ₁`. The crate computes `t_c` and `t*`,
//! integrates the stiff flow, sweeps `ε`, and analyses the jump at `t*`
//! through the frozen-time heteroclinic orbits.

pub mod critical;
pub mod energy;
pub mod error;
pub mod integrator;
pub mod io;
pub mod limit;
pub mod quadrature;
pub mod spectral;

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;

pub use critical::{
    classify, find_critical_points, omega_limit, one_d_extremes, Classification, CriticalPoint,
    CriticalSearch, CriticalSet, OmegaLimit, OmegaOptions,
};
pub use energy::{
    make_commuting_family, make_polynomial, make_quartic_family, make_rotating_family,
    validate_assumptions, AssumptionReport, Energy, EnergyModel, PolyTerm, SampleBox, TimeProfile,
    ValidationOptions,
};
pub use error::{Error, Result};
pub use integrator::{
    dissipation_integral, energy_balance_residual, first_hitting, solve_autonomous,
    solve_singular, EventSpec, SolveOptions, Trajectory,
};
pub use limit::{
    check_gronwall_bounds, estimate_limit_curve, heteroclinic, predict_jump_target,
    rescale_trajectory, run_epsilon_sweep, verify_delay, DelayReport, DiagnosticBounds,
    GronwallReport, Heteroclinic, JumpEstimate, LimitCurve, MuRule, Side, SweepConfig,
};
pub use spectral::{
    blowup_time, check_a1, check_a2, critical_time, spectral_profile, SpectralProfile,
    StabilityTimes,
};
