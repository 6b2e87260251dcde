use proptest::prelude::*;
use sncl_core::flow::forward_flow_nodes;
use sncl_core::{
    backward_flow, forward_flow, jacobian_inverse_moment, regularize, sample_path, Field, FluxModel, Grid, Response,
    Spatial, TimeGrid,
};

fn linear(a: f64) -> FluxModel {
    FluxModel::new(
        "linear",
        Spatial::Linear {
            slope: a,
            intercept: 0.0,
        },
        Response::Unit,
    )
}

#[test]
fn brownian_increments_have_the_right_law() {
    let tg = TimeGrid::uniform(1.0, 64).unwrap();
    let n_paths = 4000u64;
    let mut end = Vec::new();
    let mut products = 0.0;
    let mut incs = Vec::new();
    for i in 0..n_paths {
        let p = sample_path(42, i, &tg);
        let d = p.increments();
        products += d[3] * d[40];
        incs.extend(d.iter().map(|x| x / tg.dt(0).sqrt()));
        end.push(p.value(64));
    }
    let n = incs.len() as f64;
    let mean = incs.iter().sum::<f64>() / n;
    let var = incs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let kurt = incs.iter().map(|x| x.powi(4)).sum::<f64>() / n;
    // Standard normal: mean 0, variance 1, fourth moment 3.
    assert!(mean.abs() < 4.0 / n.sqrt(), "{mean}");
    assert!((var - 1.0).abs() < 4.0 * (2.0 / n).sqrt(), "{var}");
    assert!((kurt - 3.0).abs() < 4.0 * (96.0 / n).sqrt(), "{kurt}");
    // B(1) ~ N(0, 1) across paths; distinct increments uncorrelated.
    let m = n_paths as f64;
    let bvar = end.iter().map(|b| b * b).sum::<f64>() / m;
    assert!((bvar - 1.0).abs() < 4.0 * (2.0 / m).sqrt(), "{bvar}");
    let corr = products / m / tg.dt(0);
    assert!(corr.abs() < 4.0 / m.sqrt(), "{corr}");
}

#[test]
fn linear_drift_flow_matches_the_euler_recurrence() {
    let a = 0.7;
    let grid = Grid::new(-4.0, 4.0, 512).unwrap();
    let tg = TimeGrid::uniform(0.5, 100).unwrap();
    let path = sample_path(9, 0, &tg);
    let flux = regularize(&linear(a), 4.0 * grid.dx(), &grid).unwrap();
    let hist = vec![Field::zeros(grid, 0.0); 100];
    let nodes = 200..312;
    let map = forward_flow_nodes(&flux, &hist, &path, 0, 100, nodes.clone()).unwrap();
    for (p, i) in nodes.enumerate() {
        let (mut x, mut j) = (grid.node(i), 1.0);
        let x0 = x;
        let mut drift = 0.0;
        for k in 0..100 {
            drift += a * x * tg.dt(k);
            j *= 1.0 + a * tg.dt(k);
            x = x0 + drift + path.value(k + 1);
        }
        assert!((map.positions()[p] - x).abs() < 1e-9);
        assert!((map.jacobians()[p] - j).abs() < 1e-9);
    }
}

#[test]
fn linear_drift_jacobian_approaches_the_exponential() {
    // J = (1 + aΔt)^n → e^{aT} at first order in Δt.
    let (a, t) = (0.8, 0.5);
    let grid = Grid::new(-4.0, 4.0, 256).unwrap();
    let flux = regularize(&linear(a), 4.0 * grid.dx(), &grid).unwrap();
    let mut errs = Vec::new();
    for n in [32usize, 64, 128, 256] {
        let tg = TimeGrid::uniform(t, n).unwrap();
        let path = sample_path(1, 0, &tg);
        let hist = vec![Field::zeros(grid, 0.0); n];
        let map = forward_flow_nodes(&flux, &hist, &path, 0, n, 120..136).unwrap();
        errs.push((map.jacobians()[5] - (a * t).exp()).abs());
    }
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.8..2.2).contains(&ratio), "{errs:?}");
    }
}

#[test]
fn deterministic_jacobian_gives_exact_moment() {
    let a = -0.6;
    let grid = Grid::new(-4.0, 4.0, 256).unwrap();
    let tg = TimeGrid::uniform(0.5, 50).unwrap();
    let flux = regularize(&linear(a), 4.0 * grid.dx(), &grid).unwrap();
    let hist = vec![Field::zeros(grid, 0.0); 50];
    let maps: Vec<_> = (0..4)
        .map(|i| forward_flow_nodes(&flux, &hist, &sample_path(2, i, &tg), 0, 50, 100..140).unwrap())
        .collect();
    let refs: Vec<_> = maps.iter().collect();
    let m = jacobian_inverse_moment(&refs).unwrap();
    let expect = (1.0 + a * 0.01f64).powi(-50);
    assert!(m.mean.iter().all(|v| (v - expect).abs() < 1e-12));
}

fn nonlocal_history(grid: Grid, n: usize) -> Vec<Field> {
    (0..n)
        .map(|k| {
            let s = 0.3 * k as f64 / n as f64;
            Field::from_fn(grid, 0.0, |x| 0.4 * (-(x - s) * (x - s)).exp()).unwrap()
        })
        .collect()
}

#[test]
fn monotone_inversion_agrees_with_backward_integration() {
    // Both approximate Y_{0,T}; the gap is first order in Δt.
    let grid = Grid::new(-6.0, 6.0, 1536).unwrap();
    let model = FluxModel::new(
        "b",
        Spatial::Bump {
            amplitude: 2.0,
            center: 0.0,
            radius: 1.5,
        },
        Response::Lorentzian,
    );
    let flux = regularize(&model, 8.0 * grid.dx(), &grid).unwrap();
    let mut gaps = Vec::new();
    for n in [64usize, 128, 256] {
        let tg = TimeGrid::uniform(0.5, n).unwrap();
        let path = sample_path(4, 2, &tg);
        let hist = nonlocal_history(grid, n);
        let map = forward_flow(&flux, &hist, &path, 0, n).unwrap();
        let inv = map.inverse().unwrap();
        let gap = [-1.0, -0.3, 0.0, 0.4, 1.2]
            .iter()
            .map(|&x| {
                let x = x + path.value(n);
                (inv.eval(x).position - backward_flow(&flux, &hist, &path, 0, n, x).unwrap()).abs()
            })
            .fold(0.0, f64::max);
        gaps.push(gap);
    }
    assert!(gaps[0] < 0.05, "{gaps:?}");
    for w in gaps.windows(2) {
        assert!(w[1] < 0.7 * w[0], "{gaps:?}");
    }
}

#[test]
fn flows_compose() {
    // X_{0,T} = X_{s,T} ∘ X_{0,s}, up to interpolation between nodes.
    let grid = Grid::new(-6.0, 6.0, 3072).unwrap();
    let tg = TimeGrid::uniform(0.5, 128).unwrap();
    let path = sample_path(12, 5, &tg);
    let model = FluxModel::new(
        "b",
        Spatial::Bump {
            amplitude: 1.0,
            center: 0.0,
            radius: 1.5,
        },
        Response::Lorentzian,
    );
    let flux = regularize(&model, 8.0 * grid.dx(), &grid).unwrap();
    let hist = nonlocal_history(grid, 128);
    let whole = forward_flow(&flux, &hist, &path, 0, 128).unwrap();
    let first = forward_flow(&flux, &hist, &path, 0, 64).unwrap();
    let second = forward_flow(&flux, &hist, &path, 64, 128).unwrap();
    let dx = grid.dx();
    for i in (1000..2000).step_by(37) {
        let y = first.positions()[i];
        let (m, th) = grid.locate(y).unwrap();
        let composed = (1.0 - th) * second.positions()[m] + th * second.positions()[m + 1];
        assert!((composed - whole.positions()[i]).abs() < 1e-4, "{i}");
        let j = ((1.0 - th) * second.jacobians()[m] + th * second.jacobians()[m + 1]) * first.jacobians()[i];
        assert!((j - whole.jacobians()[i]).abs() < 50.0 * dx, "{i}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flow_is_increasing_with_positive_jacobian(seed in 0u64..1000, idx in 0u64..100, amp in -3.0..3.0f64) {
        let grid = Grid::new(-6.0, 6.0, 512).unwrap();
        let tg = TimeGrid::uniform(0.5, 64).unwrap();
        let model = FluxModel::new("b", Spatial::Bump { amplitude: amp, center: 0.0, radius: 1.5 }, Response::Lorentzian);
        let flux = regularize(&model, 8.0 * grid.dx(), &grid).unwrap();
        let hist = nonlocal_history(grid, 64);
        let map = forward_flow_nodes(&flux, &hist, &sample_path(seed, idx, &tg), 0, 64, 100..400).unwrap();
        prop_assert!(map.jacobians().iter().all(|&j| j > 0.0));
        prop_assert!(map.positions().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn paths_restrict_to_coarse_grids(seed in 0u64..1000, idx in 0u64..1000, f in 0usize..5) {
        let fine = TimeGrid::uniform(1.0, 64).unwrap();
        let factor = 1usize << f;
        let p = sample_path(seed, idx, &fine);
        let c = p.coarsen(factor).unwrap();
        for k in 0..=64 / factor {
            prop_assert_eq!(c.value(k), p.value(k * factor));
        }
    }
}
