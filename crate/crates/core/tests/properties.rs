use delaystab::energy::TimeProfile;
use delaystab::{
    make_commuting_family, make_polynomial, make_quartic_family, make_rotating_family, EnergyModel,
    Matrix, PolyTerm, Vector,
};
use proptest::prelude::*;

fn models() -> Vec<EnergyModel> {
    vec![
        make_quartic_family(1, 0.5, 1.5).unwrap(),
        make_quartic_family(2, 0.5, 1.5).unwrap(),
        make_quartic_family(3, 0.3, 1.0).unwrap(),
        make_commuting_family(
            Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            TimeProfile::polynomial(vec![0.25, 0.5]),
            1.5,
        )
        .unwrap(),
        make_rotating_family(1.0, 0.5, 1.5).unwrap(),
        make_polynomial(
            "mixed",
            2,
            2.0,
            vec![
                PolyTerm::new(vec![1.0, -1.0], vec![2, 0], 0.5),
                PolyTerm::new(vec![0.0, 0.3], vec![1, 1], 1.0),
                PolyTerm::new(vec![1.0], vec![0, 2], 0.5),
                PolyTerm::new(vec![0.25], vec![4, 0], 1.0),
                PolyTerm::new(vec![0.25], vec![0, 4], 1.0),
            ],
        )
        .unwrap(),
    ]
}

fn point(n: usize, raw: &[f64]) -> Vector {
    Vector::from_iterator(n, raw.iter().copied().take(n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gradient_matches_central_differences(
        which in 0usize..6,
        frac in 0.0f64..1.0,
        raw in prop::collection::vec(-1.5f64..1.5, 3),
    ) {
        let model = &models()[which];
        let x = point(model.dimension(), &raw);
        let t = frac * model.horizon();
        let g = model.gradient(t, &x).unwrap();
        for i in 0..x.len() {
            let h = 1e-6 * (1.0 + x[i].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (model.evaluate(t, &xp).unwrap() - model.evaluate(t, &xm).unwrap()) / (2.0 * h);
            prop_assert!((g[i] - fd).abs() <= 1e-5 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn hessian_is_symmetric_and_matches_gradient_differences(
        which in 0usize..6,
        frac in 0.0f64..1.0,
        raw in prop::collection::vec(-1.5f64..1.5, 3),
    ) {
        let model = &models()[which];
        let x = point(model.dimension(), &raw);
        let t = frac * model.horizon();
        let h = model.hessian(t, &x).unwrap();
        prop_assert!((&h - h.transpose()).norm() <= 1e-12 * (1.0 + h.norm()));
        for j in 0..x.len() {
            let d = 1e-6 * (1.0 + x[j].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += d;
            xm[j] -= d;
            let col = (model.gradient(t, &xp).unwrap() - model.gradient(t, &xm).unwrap()) / (2.0 * d);
            prop_assert!((h.column(j) - &col).norm() <= 1e-5 * (1.0 + col.norm()));
        }
    }

    #[test]
    fn time_derivative_matches_differences(
        which in 0usize..6,
        frac in 0.05f64..0.95,
        raw in prop::collection::vec(-1.5f64..1.5, 3),
    ) {
        let model = &models()[which];
        let x = point(model.dimension(), &raw);
        let t = frac * model.horizon();
        let d = 1e-6;
        let fd = (model.evaluate(t + d, &x).unwrap() - model.evaluate(t - d, &x).unwrap()) / (2.0 * d);
        prop_assert!((model.time_derivative(t, &x).unwrap() - fd).abs() <= 1e-5 * (1.0 + fd.abs()));
    }

    #[test]
    fn origin_is_always_critical(which in 0usize..6, frac in 0.0f64..1.0) {
        let model = &models()[which];
        let t = frac * model.horizon();
        prop_assert!(model.gradient(t, &model.origin()).unwrap().norm() <= 1e-14);
    }

    #[test]
    fn remainder_is_superlinear(
        which in 0usize..6,
        frac in 0.0f64..1.0,
        raw in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let model = &models()[which];
        let dir = point(model.dimension(), &raw);
        prop_assume!(dir.norm() > 1e-3);
        let dir = dir.normalize();
        let t = frac * model.horizon();
        // ‖B(t, r·d)‖/r → 0: halving r at least halves the ratio for these
        // models, whose remainders start at order three.
        let ratio = |r: f64| model.remainder(t, &(&dir * r)).unwrap().norm() / r;
        let (a, b) = (ratio(1e-2), ratio(5e-3));
        prop_assert!(b <= 0.5 * a + 1e-15);
    }
}
