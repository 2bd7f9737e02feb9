//! The `ε → 0` picture: sweeps over `ε`, the projected limit curve and its
//! jump, frozen-time heteroclinics and the escape estimates near `u = 0`.

mod bounds;
mod curve;
mod delay;
mod hetero;
mod sweep;

pub use bounds::{
    annulus_crossing_window, annulus_gradient_min, check_energy_gap, check_gronwall_bounds,
    check_pre_collapse, cone_delta, BoundVerdict, CollapseCheck, DiagnosticBounds,
    EnergyGapReport, GapCondition, GronwallReport,
};
pub use curve::{
    best_shift_discrepancy, estimate_limit_curve, rescale_trajectory, shift_discrepancy, Jump,
    LimitCurve, RescaledOrbit,
};
pub use delay::{verify_delay, DelayPoint, DelayReport};
pub use hetero::{heteroclinic, predict_jump_target, AlignmentSample, Heteroclinic, JumpTarget};
pub use sweep::{
    remainder_ratio, run_epsilon_sweep, run_single, select_mu, sweep_span, JumpEstimate, MuRule,
    MuSelection, Side, Sweep, SweepConfig, SweepRun, MU_EVENT,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critical::{CriticalSearch, OmegaOptions};
    use crate::energy::{make_quartic_family, SampleBox};
    use crate::spectral::{spectral_profile, uniform_grid};
    use crate::Vector;
    use approx::assert_relative_eq;

    #[test]
    fn auto_mu_on_the_quartic() {
        let m = make_quartic_family(1, 0.5, 1.5).unwrap();
        let bx = SampleBox::symmetric(1, 2.0).unwrap();
        let sel = select_mu(&m, 1.0, 1.25, MuRule::Auto, &bx, &CriticalSearch::default()).unwrap();
        // r_iso = √0.5/2, remainder |x|³/|x| = x² ≤ 0.05 up to r = √0.05.
        assert_relative_eq!(sel.r_iso, 0.5f64.sqrt() / 2.0, epsilon = 1e-9);
        assert_relative_eq!(sel.r_remainder, 0.05f64.sqrt(), epsilon = 1e-7);
        assert_relative_eq!(sel.mu, 0.5f64.sqrt() / 4.0, epsilon = 1e-9);
        assert_relative_eq!(sel.eta, sel.mu * sel.mu, epsilon = 1e-12);
        let fixed = select_mu(&m, 1.0, 1.25, MuRule::Fixed(0.1), &bx, &CriticalSearch::default())
            .unwrap();
        assert_eq!(fixed.mu, 0.1);
    }

    #[test]
    fn sweep_config_rejects_bad_eps_lists() {
        let mut c = SweepConfig::default();
        assert!(c.validate().is_ok());
        c.eps = vec![1e-3, 1e-2];
        assert!(c.validate().is_err());
        c.eps = vec![];
        assert!(c.validate().is_err());
        c.eps = vec![1e-2, -1e-3];
        assert!(c.validate().is_err());
    }

    #[test]
    fn annulus_minimum_in_one_dimension() {
        // |−x/2 + x³| on [μ/2, μ] is smallest at x = μ/2.
        let m = make_quartic_family(1, 0.5, 1.5).unwrap();
        let mu = 0.2;
        let g = annulus_gradient_min(&m, 1.0, mu).unwrap();
        assert_relative_eq!(g, 0.05 - 0.001, epsilon = 1e-12);
    }

    #[test]
    fn cone_delta_is_clipped() {
        let e1 = Vector::from_vec(vec![1.0, 0.0]);
        assert_eq!(cone_delta(&Vector::from_vec(vec![0.3, 0.0]), &e1).unwrap(), 1e-6);
        assert_relative_eq!(cone_delta(&Vector::from_vec(vec![1.0, 1.0]), &e1).unwrap(), 1.0);
        assert!(cone_delta(&Vector::from_vec(vec![0.0, 1.0]), &e1).is_err());
    }

    #[test]
    fn heteroclinics_of_the_planar_quartic() {
        let m = make_quartic_family(2, 0.5, 1.5).unwrap();
        let p = spectral_profile(&m, &uniform_grid(1.5, 31), None).unwrap();
        let opts = OmegaOptions::default();
        for side in [Side::Plus, Side::Minus] {
            let h = heteroclinic(&m, &p, 1.0, side, 1e-4, &opts).unwrap();
            assert_relative_eq!(h.omega.location[0], side.sign() * 0.5f64.sqrt(), epsilon = 1e-8);
            assert!(h.omega.location[1].abs() < 1e-10);
            assert!(h.alignment_ok);
            assert!(h.warnings.is_empty());
        }
        let t = predict_jump_target(&m, &p, 1.0, Side::Plus, &opts).unwrap();
        assert!(t.positive_definite && !t.degenerate);
        assert_relative_eq!(t.point.hessian_eigenvalues[0], 1.0, epsilon = 1e-8);
        assert_relative_eq!(t.point.hessian_eigenvalues[1], 1.5, epsilon = 1e-8);
    }
}
