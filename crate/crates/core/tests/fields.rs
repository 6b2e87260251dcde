mod common;

use common::{simpson, unit_bump};
use proptest::prelude::*;
use sncl_core::{convolve, BumpKernel, Field, Grid, Kernel, Mollifier};

#[test]
fn convolution_matches_refined_quadrature() {
    let grid = Grid::new(-8.0, 8.0, 2048).unwrap();
    let u0 = unit_bump(0.3, 1.5);
    let k = unit_bump(0.0, 0.5);
    let u = Field::from_fn(grid, 0.0, &u0).unwrap();
    let ku = convolve(&u, &BumpKernel::new(0.0, 0.5).unwrap()).unwrap();
    for i in (0..grid.n_nodes()).step_by(7) {
        let x = grid.node(i);
        let exact = simpson(-0.5, 0.5, 2000, |s| k(s) * u0(x - s));
        assert!(
            (ku.values()[i] - exact).abs() <= 1e-6,
            "x = {x}: {} vs {exact}",
            ku.values()[i]
        );
    }
}

#[test]
fn off_centre_kernel_shifts_the_result() {
    // K(x) = bump((x - 0.25)/0.5): (K∗u)(x) = ∫ K(s) u(x - s) ds.
    let grid = Grid::new(-4.0, 4.0, 1024).unwrap();
    let u0 = unit_bump(0.0, 1.0);
    let k = unit_bump(0.25, 0.5);
    let u = Field::from_fn(grid, 0.0, &u0).unwrap();
    let ku = convolve(&u, &BumpKernel::new(0.25, 0.5).unwrap()).unwrap();
    for i in (0..grid.n_nodes()).step_by(13) {
        let x = grid.node(i);
        let exact = simpson(-0.25, 0.75, 2000, |s| k(s) * u0(x - s));
        assert!((ku.values()[i] - exact).abs() <= 1e-6);
    }
}

#[test]
fn bump_norms_match_quadrature() {
    let grid = Grid::new(-4.0, 4.0, 2048).unwrap();
    let f = unit_bump(0.0, 1.5);
    let u = Field::from_fn(grid, 0.0, |x| 2.0 * f(x)).unwrap();
    let n = u.norms();
    assert!((n.l1 - 2.0).abs() < 1e-9);
    let l2 = simpson(-1.5, 1.5, 4000, |x| 4.0 * f(x) * f(x)).sqrt();
    assert!((n.l2 - l2).abs() < 1e-9);
    assert!((n.linf - 2.0 * f(0.0)).abs() < 1e-12);
}

#[test]
fn mollification_error_is_second_order() {
    // Smooth u: |uε - u| at the peak shrinks by about 4 per halving.
    let grid = Grid::new(-4.0, 4.0, 4096).unwrap();
    let u = Field::from_fn(grid, 0.0, unit_bump(0.0, 1.5)).unwrap();
    let mid = grid.n_cells() / 2;
    let errs: Vec<f64> = [0.4, 0.2, 0.1]
        .iter()
        .map(|&e| (convolve(&u, &Mollifier::new(e).unwrap()).unwrap().values()[mid] - u.values()[mid]).abs())
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.6..4.4).contains(&ratio), "{errs:?}");
    }
}

#[test]
fn kernel_values_match_the_profile() {
    let k = BumpKernel::new(0.2, 0.7).unwrap();
    let f = unit_bump(0.2, 0.7);
    for &x in &[-0.6, -0.1, 0.2, 0.5, 0.89, 0.9, 2.0] {
        assert!((k.eval(x) - f(x)).abs() < 1e-9);
    }
    let h = 1e-5;
    assert!((k.derivative(0.4) - (f(0.4 + h) - f(0.4 - h)) / (2.0 * h)).abs() < 1e-6);
}

fn field(grid: Grid, c: f64, r: f64, a: f64) -> Field {
    let f = unit_bump(c, r);
    Field::from_fn(grid, 0.0, |x| a * f(x)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn convolution_is_linear(a in -3.0..3.0f64, b in -3.0..3.0f64, c1 in -2.0..2.0f64, c2 in -2.0..2.0f64) {
        let grid = Grid::new(-6.0, 6.0, 384).unwrap();
        let k = BumpKernel::new(0.0, 0.5).unwrap();
        let f = field(grid, c1, 1.0, 1.0);
        let g = field(grid, c2, 0.8, 1.0);
        let lhs = convolve(&f.combine(a, &g, b).unwrap(), &k).unwrap();
        let rhs = convolve(&f, &k).unwrap().combine(a, &convolve(&g, &k).unwrap(), b).unwrap();
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn convolution_commutes_with_grid_shifts(m in -40i32..40, c in -1.0..1.0f64) {
        let grid = Grid::new(-6.0, 6.0, 384).unwrap();
        let k = BumpKernel::new(0.1, 0.5).unwrap();
        let shift = m as f64 * grid.dx();
        let f = field(grid, c, 1.0, 1.0);
        let g = field(grid, c + shift, 1.0, 1.0);
        let kf = convolve(&f, &k).unwrap();
        let kg = convolve(&g, &k).unwrap();
        for i in 60..(grid.n_nodes() - 60) {
            let j = (i as i64 - m as i64) as usize;
            prop_assert!((kg.values()[i] - kf.values()[j]).abs() <= 1e-10);
        }
    }

    #[test]
    fn convolution_preserves_mass_and_sign(c in -2.0..2.0f64, r in 0.3..1.5f64, eps in 0.1..0.6f64) {
        let grid = Grid::new(-6.0, 6.0, 512).unwrap();
        let f = field(grid, c, r, 1.0);
        let g = convolve(&f, &Mollifier::resolved(eps, grid.dx()).unwrap()).unwrap();
        prop_assert!((g.integral() - f.integral()).abs() <= 1e-12);
        prop_assert!(g.values().iter().all(|&v| v >= 0.0));
    }
}
