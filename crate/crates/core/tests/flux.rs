mod common;

use common::{simpson, unit_bump};
use proptest::prelude::*;
use sncl_core::{
    regularize, verify_hypothesis, Field, FluxModel, Grid, HypothesisBox, Resolution, Response, Spatial, Temporal,
};

#[test]
fn regularization_error_of_a_smooth_flux_is_second_order() {
    let grid = Grid::new(-4.0, 4.0, 4096).unwrap();
    let f = FluxModel::smooth_nonlocal();
    let errs: Vec<f64> = [0.4, 0.2, 0.1]
        .iter()
        .map(|&e| (regularize(&f, e, &grid).unwrap().value(0.0, 0.0, 0.0) - f.value(0.0, 0.0, 0.0)).abs())
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.6..4.4).contains(&ratio), "{errs:?}");
    }
}

#[test]
fn regularized_flux_matches_quadrature_of_the_base() {
    // Fε(x) = ∫ b(x - y) ρε(y) dy for the discontinuous indicator.
    let grid = Grid::new(-4.0, 4.0, 2048).unwrap();
    let eps = 0.125;
    let f = FluxModel::indicator_nonlocal();
    let reg = regularize(&f, eps, &grid).unwrap();
    let rho = unit_bump(0.0, eps);
    for &x in &[-1.1, -1.0, -0.95, 0.0, 0.93, 1.0, 1.07] {
        let exact = simpson(-eps, eps, 4000, |y| {
            let b = if (-1.0..=1.0).contains(&(x - y)) { 1.0 } else { 0.0 };
            b * rho(y)
        });
        assert!((reg.value(0.0, x, 0.0) - exact).abs() < 2e-3, "x = {x}");
    }
}

#[test]
fn nonlocal_chain_rule_matches_refined_oracle() {
    // F = z along conv = K∗u for the default kernel and datum: the total
    // derivative is (K∗u)'(x).
    let grid = Grid::new(-8.0, 8.0, 2048).unwrap();
    let reg = regularize(&FluxModel::burgers_like(), 4.0 * grid.dx(), &grid).unwrap();
    let (k, u) = (unit_bump(0.0, 0.5), unit_bump(0.0, 1.5));
    let c = |x: f64| simpson(-0.5, 0.5, 800, |s| k(s) * u(x - s));
    let conv = Field::from_fn(grid, 0.0, c).unwrap();
    let h = grid.dx() / 16.0;
    for &x in &[-1.0, -0.5, 0.0, 0.3, 0.77, 1.4] {
        let oracle = (c(x + h) - c(x - h)) / (2.0 * h);
        let d = reg.total_spatial_derivative(0.0, x, &conv).unwrap();
        assert!((d - oracle).abs() < 1e-4, "x = {x}: {d} vs {oracle}");
    }
}

#[test]
fn smooth_model_l1_norm_is_one() {
    let f = FluxModel::smooth_nonlocal();
    let b = HypothesisBox {
        t: (0.0, 1.0),
        x: (-4.0, 4.0),
        z: (-2.0, 2.0),
    };
    let r = verify_hypothesis(&f, &b, Resolution::default()).unwrap();
    // ∫|b| = 1 and sup g = g(0) = 1.
    let oracle = simpson(-1.0, 1.0, 4000, unit_bump(0.0, 1.0));
    assert!((oracle - 1.0).abs() < 1e-9);
    assert!((r.flux_l1 - oracle).abs() < 1e-3, "{}", r.flux_l1);
    assert_eq!(r.time_derivative_l1, 0.0);
}

#[test]
fn oscillating_modulation_enters_the_time_derivative_norm() {
    let f = FluxModel::smooth_nonlocal().with_temporal(Temporal::Oscillating {
        depth: 0.5,
        frequency: 1.0,
    });
    let b = HypothesisBox {
        t: (0.0, 1.0),
        x: (-4.0, 4.0),
        z: (-1.0, 1.0),
    };
    let r = verify_hypothesis(
        &f,
        &b,
        Resolution {
            nt: 64,
            nx: 2048,
            nz: 32,
        },
    )
    .unwrap();
    // sup_t |θ'(t)| · ∫|b| · sup g = 0.5·2π.
    assert!((r.time_derivative_l1 - std::f64::consts::PI).abs() < 1e-3);
    assert!((r.flux_l1 - 1.5).abs() < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn z_partials_are_consistent(t in 0.0..1.0f64, x in -1.5..1.5f64, z in -3.0..3.0f64) {
        let h = 1e-4;
        for f in [
            FluxModel::smooth_nonlocal(),
            FluxModel::burgers_like(),
            FluxModel::new("q", Spatial::Bump { amplitude: 2.0, center: 0.5, radius: 1.5 }, Response::Lorentzian)
                .with_temporal(Temporal::Oscillating { depth: 0.3, frequency: 2.0 }),
        ] {
            let d1 = (f.value(t, x, z + h) - f.value(t, x, z - h)) / (2.0 * h);
            let d2 = (f.value(t, x, z + h) - 2.0 * f.value(t, x, z) + f.value(t, x, z - h)) / (h * h);
            let dt = (f.value(t + h, x, z) - f.value(t - h, x, z)) / (2.0 * h);
            prop_assert!((f.dz(t, x, z) - d1).abs() < 1e-6);
            prop_assert!((f.dzz(t, x, z) - d2).abs() < 1e-4);
            prop_assert!((f.time_derivative(t, x, z) - dt).abs() < 1e-5);
        }
    }

    #[test]
    fn builtin_evaluators_are_finite(t in 0.0..1.0f64, x in -10.0..10.0f64, z in -100.0..100.0f64) {
        for f in sncl_core::builtin_models() {
            prop_assert!(f.value(t, x, z).is_finite());
            prop_assert!(f.dz(t, x, z).is_finite());
            prop_assert!(f.dzz(t, x, z).is_finite());
            prop_assert!(f.time_derivative(t, x, z).is_finite());
        }
    }

    #[test]
    fn regularized_flux_is_bounded_by_the_base(eps in 0.05..0.5f64, x in -3.0..3.0f64) {
        let grid = Grid::new(-4.0, 4.0, 1024).unwrap();
        for f in [FluxModel::indicator_nonlocal(), FluxModel::linear_irregular(), FluxModel::linear_discontinuous()] {
            let reg = regularize(&f, eps, &grid).unwrap();
            prop_assert!(reg.value(0.0, x, 0.0).abs() <= 1.0 + 1e-12);
        }
    }
}
