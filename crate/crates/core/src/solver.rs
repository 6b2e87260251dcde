//! Per-path solvers.
//!
//! [`solve_picard`] is the constructive scheme: each sweep freezes `K∗u`
//! from the previous iterate over the whole horizon, integrates the
//! characteristics of the mollified flux and sets
//! `uⁿ⁺¹(t, ·) = u₀ε(Y_t(·))·JY_t(·)`. [`solve_marching`] is a single-pass
//! cross-check that lags the nonlocal field by one time step instead of one
//! sweep. [`weak_residual`] evaluates the Itô form of the weak formulation
//! on a computed solution.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{apply_stencil, BoundaryExcursions, BumpKernel, Field, Grid, Kernel, Mollifier, Stencil};
use crate::flow::{map_paths, sample_path, stable_time_step, BrownianPath, ConvSampler, FlowMap, FlowState, TimeGrid};
use crate::flux::{regularize, FluxModel, RegularizedFlux};

/// Initial datum `u₀`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    /// `mass` times the unit-mass bump of the given radius.
    Bump { center: f64, radius: f64, mass: f64 },
    /// `height` on `[left, right]` with C^∞ ramps of half-width `ramp`
    /// centred on each end.
    Plateau {
        left: f64,
        right: f64,
        ramp: f64,
        height: f64,
    },
    #[serde(skip)]
    Sampled(Field),
}

/// C^∞ transition from 0 (s ≤ -1) to 1 (s ≥ 1).
pub fn smooth_step(s: f64) -> f64 {
    let f = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let a = f(0.5 * (s + 1.0));
    let b = f(0.5 * (1.0 - s));
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

impl InitialData {
    pub fn sample(&self, grid: &Grid) -> Result<Field> {
        match self {
            InitialData::Bump { center, radius, mass } => {
                let k = BumpKernel::new(*center, *radius)?;
                Field::from_fn(*grid, 0.0, |x| mass * k.eval(x))
            }
            InitialData::Plateau {
                left,
                right,
                ramp,
                height,
            } => Field::from_fn(*grid, 0.0, |x| {
                height * smooth_step((x - left) / ramp) * smooth_step((right - x) / ramp)
            }),
            InitialData::Sampled(f) => {
                if f.grid() != grid {
                    return Err(Error::Mismatch("sampled initial datum on a different grid".into()));
                }
                Ok(f.clone().with_time(0.0))
            }
        }
    }
}

/// Everything one path solve needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub grid: Grid,
    pub time_grid: TimeGrid,
    pub kernel: BumpKernel,
    pub flux: FluxModel,
    pub initial: InitialData,
    /// Mollification width for the initial datum.
    pub eps_u: f64,
    /// Mollification width for the flux (x only).
    pub eps_f: f64,
    /// Stop once successive iterates are closer than this in sup-in-time L¹.
    pub picard_tol: f64,
    pub picard_max_iters: usize,
    /// Time indices whose flow maps are retained (snapshots are kept at
    /// every time regardless).
    pub output_indices: Vec<usize>,
}

impl SolverConfig {
    /// Every violated constraint, not just the first.
    pub fn violations(&self) -> Vec<Error> {
        let mut errs = Vec::new();
        let dx = self.grid.dx();
        for (what, eps) in [("eps_u", self.eps_u), ("eps_f", self.eps_f)] {
            if let Err(e) = Mollifier::resolved(eps, dx) {
                errs.push(match e {
                    Error::Resolution {
                        width, required, dx, ..
                    } => Error::Resolution {
                        what,
                        width,
                        required,
                        dx,
                    },
                    other => other,
                });
            }
        }
        if !(self.picard_tol > 0.0) {
            errs.push(Error::Mismatch(format!(
                "picard_tol must be positive, got {}",
                self.picard_tol
            )));
        }
        if self.picard_max_iters == 0 {
            errs.push(Error::Mismatch("picard_max_iters must be at least 1".into()));
        }
        let n = self.time_grid.n_steps();
        if let Some(&k) = self.output_indices.iter().find(|&&k| k > n) {
            errs.push(Error::Mismatch(format!(
                "output index {k} beyond the last time index {n}"
            )));
        }
        if self.kernel.radius() < dx {
            errs.push(Error::Resolution {
                what: "kernel",
                width: self.kernel.radius(),
                required: dx,
                dx,
            });
        }
        if errs.is_empty() {
            match self.stable_time_step() {
                Ok(limit) if self.time_grid.max_dt() > limit => errs.push(Error::Mismatch(format!(
                    "time step {} violates the step rule dt <= {limit} (0.5 / sup|dF/dx|)",
                    self.time_grid.max_dt()
                ))),
                Ok(_) => {}
                Err(e) => errs.push(e),
            }
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// `u₀ε = ρ_{eps_u} ∗ u₀` on the grid.
    pub fn regularized_initial(&self) -> Result<Field> {
        let u0 = self.initial.sample(&self.grid)?;
        crate::fields::convolve(&u0, &Mollifier::resolved(self.eps_u, self.grid.dx())?)
    }

    /// Mollified flux tabulated on the grid padded by a quarter of its
    /// width on each side.
    pub fn regularized_flux(&self) -> Result<RegularizedFlux> {
        let pad = self.grid.n_cells() / 4;
        regularize(&self.flux, self.eps_f, &self.grid.padded(pad))
    }

    /// Largest admissible time step for this configuration.
    pub fn stable_time_step(&self) -> Result<f64> {
        let mass = self.regularized_initial()?.norms().l1;
        let flux = self.regularized_flux()?;
        Ok(stable_time_step(
            &flux,
            mass * self.kernel.max_value(),
            mass * self.kernel.max_slope(),
        ))
    }
}

/// One path's solution with every snapshot retained.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSolution {
    pub path: BrownianPath,
    /// `u₀ε`.
    pub initial: Field,
    /// `u(t_k, ·)` for every path time.
    pub snapshots: Vec<Field>,
    /// `(K∗u)(t_k, ·)` for every path time, from `snapshots`; empty when the
    /// flux ignores its nonlocal argument.
    pub conv_history: Vec<Field>,
    pub output_indices: Vec<usize>,
    /// Flow maps `X_{0,t}` at the output indices, tracked nodes only.
    pub flows: Vec<FlowMap>,
    pub iterations_used: usize,
    pub converged: bool,
    /// Sup-in-time L¹ distance between successive iterates.
    pub distances: Vec<f64>,
    /// Per iterate: max over times of `|∫|u(t)| - ∫|u₀ε|| / ∫|u₀ε|`.
    pub mass_drift: Vec<f64>,
    pub min_value: f64,
    pub min_jacobian: f64,
    pub boundary_excursions: BoundaryExcursions,
}

impl PathSolution {
    pub fn times(&self) -> &[f64] {
        self.path.time_grid().times()
    }

    pub fn final_snapshot(&self) -> &Field {
        self.snapshots.last().expect("at least one snapshot")
    }

    pub fn max_mass_drift(&self) -> f64 {
        self.mass_drift.iter().copied().fold(0.0, f64::max)
    }
}

/// Shared preprocessing for both schemes.
struct Prepared {
    path: BrownianPath,
    u0: Field,
    flux: RegularizedFlux,
    kernel: Stencil,
    nodes: std::ops::Range<usize>,
    nonlocal: bool,
    mass0: f64,
}

fn prepare(cfg: &SolverConfig, path: &BrownianPath) -> Result<Prepared> {
    cfg.validate()?;
    let path = if path.time_grid() == &cfg.time_grid {
        path.clone()
    } else {
        path.restrict(&cfg.time_grid)?
    };
    let u0 = cfg.regularized_initial()?;
    let n = cfg.grid.n_nodes();
    let nodes = match u0.support() {
        Some((a, b)) => a.saturating_sub(1)..(b + 2).min(n),
        None => 0..n,
    };
    Ok(Prepared {
        path,
        mass0: u0.norms().l1,
        flux: cfg.regularized_flux()?,
        kernel: Stencil::sample(&cfg.kernel, cfg.grid.dx())?,
        nodes,
        nonlocal: cfg.flux.depends_on_nonlocal(),
        u0,
    })
}

struct Sweep {
    snapshots: Vec<Field>,
    flows: Vec<FlowMap>,
    mass_drift: f64,
    min_value: f64,
    min_jacobian: f64,
    excursions: BoundaryExcursions,
}

impl Prepared {
    fn relative_mass_drift(&self, u: &Field) -> f64 {
        let m = u.norms().l1;
        if self.mass0 > 0.0 {
            (m - self.mass0).abs() / self.mass0
        } else {
            m
        }
    }

    fn conv(&self, u: &Field) -> Field {
        apply_stencil(u, &self.kernel)
    }

    /// One pass over the horizon. `conv_for_step(k, snapshots)` supplies the
    /// frozen nonlocal field for the step `t_k → t_{k+1}`.
    fn sweep(&self, outputs: &[usize], mut conv_for_step: impl FnMut(usize, &[Field]) -> Field) -> Result<Sweep> {
        let grid = *self.u0.grid();
        let n = self.path.time_grid().n_steps();
        let mut state = FlowState::new(grid, self.nodes.clone(), &self.path, 0);
        let mut snapshots = Vec::with_capacity(n + 1);
        snapshots.push(self.u0.clone());
        let mut flows = Vec::with_capacity(outputs.len());
        if outputs.contains(&0) {
            flows.push(state.snapshot(&self.path));
        }
        let mut sweep = Sweep {
            snapshots: Vec::new(),
            flows: Vec::new(),
            mass_drift: 0.0,
            min_value: self.u0.values().iter().copied().fold(f64::INFINITY, f64::min),
            min_jacobian: 1.0,
            excursions: BoundaryExcursions::default(),
        };
        for k in 0..n {
            let conv = conv_for_step(k, &snapshots);
            state.step(&self.flux, &ConvSampler::new(&conv), &self.path)?;
            let map = state.snapshot(&self.path);
            let (u, exc) = map.inverse()?.pushforward(&self.u0)?;
            sweep.excursions.merge(exc);
            sweep.mass_drift = sweep.mass_drift.max(self.relative_mass_drift(&u));
            sweep.min_value = u.values().iter().copied().fold(sweep.min_value, f64::min);
            sweep.min_jacobian = map.jacobians().iter().copied().fold(sweep.min_jacobian, f64::min);
            snapshots.push(u);
            if outputs.contains(&(k + 1)) {
                flows.push(map);
            }
        }
        sweep.excursions.merge(state.snapshot(&self.path).boundary_excursions());
        sweep.snapshots = snapshots;
        sweep.flows = flows;
        Ok(sweep)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        self,
        cfg: &SolverConfig,
        sweep: Sweep,
        conv_history: Option<Vec<Field>>,
        iterations_used: usize,
        converged: bool,
        distances: Vec<f64>,
        mass_drift: Vec<f64>,
    ) -> PathSolution {
        let conv_history = match conv_history {
            Some(c) => c,
            None if self.nonlocal => sweep.snapshots.iter().map(|u| self.conv(u)).collect(),
            None => Vec::new(),
        };
        PathSolution {
            path: self.path,
            initial: self.u0,
            snapshots: sweep.snapshots,
            conv_history,
            output_indices: cfg.output_indices.clone(),
            flows: sweep.flows,
            iterations_used,
            converged,
            distances,
            mass_drift,
            min_value: sweep.min_value,
            min_jacobian: sweep.min_jacobian,
            boundary_excursions: sweep.excursions,
        }
    }
}

fn sup_l1_distance(a: &[Field], b: &[Field]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.l1_distance(y)).fold(0.0, f64::max)
}

/// Picard iteration on one Brownian path.
///
/// Sweep 1 freezes `K∗u₀ε`; sweep `n+1` freezes `K∗uⁿ` at every path time.
/// Stops when the sup-in-time L¹ distance between successive iterates drops
/// below `picard_tol`, or after `picard_max_iters` sweeps with
/// `converged = false`. Fluxes that ignore the nonlocal argument are solved
/// exactly by the first sweep.
pub fn solve_picard(cfg: &SolverConfig, path: &BrownianPath) -> Result<PathSolution> {
    let prep = prepare(cfg, path)?;
    let n_times = prep.path.time_grid().n_steps() + 1;
    let mut conv_prev: Vec<Field> = if prep.nonlocal {
        vec![prep.conv(&prep.u0); n_times]
    } else {
        vec![Field::zeros(cfg.grid, 0.0); 1]
    };
    let mut previous: Vec<Field> = vec![prep.u0.clone(); n_times];
    let mut distances = Vec::new();
    let mut mass_drift = Vec::new();
    let mut iteration = 0;
    loop {
        iteration += 1;
        let sweep = prep.sweep(&cfg.output_indices, |k, _| {
            conv_prev[k.min(conv_prev.len() - 1)].clone()
        })?;
        mass_drift.push(sweep.mass_drift);
        if !prep.nonlocal {
            return Ok(prep.finish(cfg, sweep, None, iteration, true, distances, mass_drift));
        }
        let d = sup_l1_distance(&sweep.snapshots, &previous);
        distances.push(d);
        let conv_next: Vec<Field> = sweep.snapshots.iter().map(|u| prep.conv(u)).collect();
        if d < cfg.picard_tol || iteration >= cfg.picard_max_iters {
            let converged = d < cfg.picard_tol;
            return Ok(prep.finish(cfg, sweep, Some(conv_next), iteration, converged, distances, mass_drift));
        }
        conv_prev = conv_next;
        previous = sweep.snapshots;
    }
}

/// Single pass over time. The step `t_k → t_{k+1}` uses `K∗u(t_{k-1})` of
/// the solution being built (`K∗u₀ε` for the first step), and the density is
/// the pushforward of `u₀ε` through the accumulated one-step maps.
pub fn solve_marching(cfg: &SolverConfig, path: &BrownianPath) -> Result<PathSolution> {
    let prep = prepare(cfg, path)?;
    let zero = Field::zeros(cfg.grid, 0.0);
    let mut conv_cache: Vec<Field> = Vec::new();
    let sweep = prep.sweep(&cfg.output_indices, |k, snaps| {
        if !prep.nonlocal {
            return zero.clone();
        }
        let lag = k.saturating_sub(1);
        while conv_cache.len() <= lag {
            conv_cache.push(prep.conv(&snaps[conv_cache.len()]));
        }
        conv_cache[lag].clone()
    })?;
    let drift = vec![sweep.mass_drift];
    Ok(prep.finish(cfg, sweep, None, 1, true, Vec::new(), drift))
}

/// Which per-path scheme to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Picard,
    Marching,
}

pub fn solve_path(cfg: &SolverConfig, path: &BrownianPath, scheme: Scheme) -> Result<PathSolution> {
    match scheme {
        Scheme::Picard => solve_picard(cfg, path),
        Scheme::Marching => solve_marching(cfg, path),
    }
}

/// The parts of a [`PathSolution`] that ensemble statistics need: output
/// snapshots and flows, plus scalar health indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSummary {
    pub path_index: u64,
    pub output_times: Vec<f64>,
    pub snapshots: Vec<Field>,
    pub flows: Vec<FlowMap>,
    pub initial: Field,
    pub iterations_used: usize,
    pub converged: bool,
    pub distances: Vec<f64>,
    pub max_mass_drift: f64,
    pub min_value: f64,
    pub min_jacobian: f64,
    pub boundary_excursions: BoundaryExcursions,
}

impl PathSolution {
    pub fn summarize(&self) -> PathSummary {
        let times = self.times();
        PathSummary {
            path_index: self.path.path_index(),
            output_times: self.output_indices.iter().map(|&k| times[k]).collect(),
            snapshots: self.output_indices.iter().map(|&k| self.snapshots[k].clone()).collect(),
            flows: self.flows.clone(),
            initial: self.initial.clone(),
            iterations_used: self.iterations_used,
            converged: self.converged,
            distances: self.distances.clone(),
            max_mass_drift: self.max_mass_drift(),
            min_value: self.min_value,
            min_jacobian: self.min_jacobian,
            boundary_excursions: self.boundary_excursions,
        }
    }
}

/// Solves paths `0..n_paths` of `master_seed` and maps each solution through
/// `f` before the next is kept, so full solutions never accumulate.
pub fn solve_ensemble<T, F>(
    cfg: &SolverConfig,
    scheme: Scheme,
    master_seed: u64,
    n_paths: usize,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(PathSolution) -> Result<T> + Sync + Send,
{
    cfg.validate()?;
    map_paths(n_paths, |i| {
        let path = sample_path(master_seed, i, &cfg.time_grid);
        f(solve_path(cfg, &path, scheme)?)
    })
}

/// Residual of the Itô weak form per output time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakResidual {
    pub test_function: BumpKernel,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl WeakResidual {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// `∫u(t)φ - ∫u₀φ - ∫∫u·Fε·φ' - ∫∫u·φ' dB - ½∫∫u·φ''` with left-point
/// (Itô) sums in time and the nonlocal argument recomputed as `K∗u`.
pub fn weak_residual(
    sol: &PathSolution,
    phi: &BumpKernel,
    flux: &RegularizedFlux,
    kernel: &BumpKernel,
) -> Result<WeakResidual> {
    let grid = *sol.initial.grid();
    let dx = grid.dx();
    let (lo, hi) = (phi.center() - phi.radius(), phi.center() + phi.radius());
    if lo <= grid.x_min() + dx || hi >= grid.x_max() - dx {
        return Err(Error::OutOfDomain {
            x: if lo <= grid.x_min() + dx { lo } else { hi },
            lo: grid.x_min() + dx,
            hi: grid.x_max() - dx,
        });
    }
    let first = ((lo - grid.x_min()) / dx).floor().max(0.0) as usize;
    let last = (((hi - grid.x_min()) / dx).ceil() as usize).min(grid.n_cells());
    let idx: Vec<usize> = (first..=last).collect();
    let xs: Vec<f64> = idx.iter().map(|&i| grid.node(i)).collect();
    let w0: Vec<f64> = xs.iter().map(|&x| phi.eval(x) * dx).collect();
    let w1: Vec<f64> = xs.iter().map(|&x| phi.derivative(x) * dx).collect();
    let w2: Vec<f64> = xs.iter().map(|&x| phi.second_derivative(x) * dx).collect();
    let stencil = Stencil::sample(kernel, dx)?;

    let path = &sol.path;
    let tg = path.time_grid();
    let pair = |u: &Field, w: &[f64]| -> f64 { idx.iter().zip(w).map(|(&i, w)| u.values()[i] * w).sum() };

    let base = pair(&sol.snapshots[0], &w0);
    let mut integral = 0.0;
    let mut residual_at = Vec::with_capacity(sol.snapshots.len());
    residual_at.push(0.0);
    for (k, u) in sol.snapshots.iter().enumerate().take(tg.n_steps()) {
        let t = tg.times()[k];
        let dt = tg.dt(k);
        let conv = apply_stencil(u, &stencil);
        let drift: f64 = idx
            .iter()
            .zip(&xs)
            .zip(&w1)
            .map(|((&i, &x), w)| u.values()[i] * flux.value(t, x, conv.values()[i]) * w)
            .sum();
        integral += drift * dt + pair(u, &w1) * path.increment(k) + 0.5 * pair(u, &w2) * dt;
        residual_at.push(pair(&sol.snapshots[k + 1], &w0) - base - integral);
    }
    let times: Vec<f64> = sol.output_indices.iter().map(|&k| tg.times()[k]).collect();
    let values = sol.output_indices.iter().map(|&k| residual_at[k]).collect();
    Ok(WeakResidual {
        test_function: *phi,
        times,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn config(flux: FluxModel, n_cells: usize, n_steps: usize) -> SolverConfig {
        let grid = Grid::new(-6.0, 6.0, n_cells).unwrap();
        SolverConfig {
            grid,
            time_grid: TimeGrid::uniform(0.25, n_steps).unwrap(),
            kernel: BumpKernel::new(0.0, 0.5).unwrap(),
            flux,
            initial: InitialData::Bump {
                center: 0.0,
                radius: 1.5,
                mass: 1.0,
            },
            eps_u: 4.0 * grid.dx(),
            eps_f: 8.0 * grid.dx(),
            picard_tol: 1e-10,
            picard_max_iters: 30,
            output_indices: vec![0, n_steps / 2, n_steps],
        }
    }

    #[test]
    fn smooth_step_limits() {
        assert_eq!(smooth_step(-1.0), 0.0);
        assert_eq!(smooth_step(1.0), 1.0);
        assert_abs_diff_eq!(smooth_step(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(smooth_step(0.3) + smooth_step(-0.3), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_flux_converges_in_one_sweep() {
        let cfg = config(FluxModel::zero(), 512, 32);
        let path = sample_path(1, 0, &cfg.time_grid);
        let sol = solve_picard(&cfg, &path).unwrap();
        assert_eq!(sol.iterations_used, 1);
        assert!(sol.converged);
        assert_eq!(sol.snapshots.len(), 33);
        assert_eq!(sol.flows.len(), 3);
        assert!(sol.max_mass_drift() < 1e-12);
        assert_eq!(sol.min_jacobian, 1.0);
    }

    #[test]
    fn zero_flux_marching_matches_picard_exactly() {
        let cfg = config(FluxModel::zero(), 256, 16);
        let path = sample_path(2, 5, &cfg.time_grid);
        let a = solve_picard(&cfg, &path).unwrap();
        let b = solve_marching(&cfg, &path).unwrap();
        assert_eq!(a.snapshots, b.snapshots);
    }

    #[test]
    fn solution_is_deterministic() {
        let cfg = config(FluxModel::smooth_nonlocal(), 256, 16);
        let path = sample_path(3, 1, &cfg.time_grid);
        assert_eq!(solve_picard(&cfg, &path).unwrap(), solve_picard(&cfg, &path).unwrap());
    }

    #[test]
    fn nonlocal_iterates_stay_positive_and_conserve_mass() {
        let cfg = config(FluxModel::smooth_nonlocal(), 512, 32);
        let path = sample_path(4, 2, &cfg.time_grid);
        let sol = solve_picard(&cfg, &path).unwrap();
        assert!(sol.converged, "distances {:?}", sol.distances);
        assert!(sol.min_value >= 0.0);
        assert!(sol.mass_drift.iter().all(|&d| d < 1e-3), "{:?}", sol.mass_drift);
    }

    #[test]
    fn validation_reports_every_violation() {
        let mut cfg = config(FluxModel::zero(), 256, 16);
        cfg.eps_u = cfg.grid.dx();
        cfg.eps_f = cfg.grid.dx();
        cfg.picard_tol = 0.0;
        let v = cfg.violations();
        assert_eq!(v.len(), 3, "{v:?}");
    }

    #[test]
    fn step_rule_is_enforced() {
        let mut cfg = config(FluxModel::linear_discontinuous(), 1024, 4);
        cfg.eps_f = 4.0 * cfg.grid.dx();
        assert!(cfg.validate().is_err());
        cfg.time_grid = TimeGrid::uniform(0.25, 64).unwrap();
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn residual_of_zero_solution_vanishes() {
        let mut cfg = config(FluxModel::zero(), 256, 16);
        cfg.initial = InitialData::Bump {
            center: 0.0,
            radius: 1.0,
            mass: 0.0,
        };
        let path = sample_path(0, 0, &cfg.time_grid);
        let sol = solve_picard(&cfg, &path).unwrap();
        let r = weak_residual(
            &sol,
            &BumpKernel::new(0.0, 1.0).unwrap(),
            &cfg.regularized_flux().unwrap(),
            &cfg.kernel,
        )
        .unwrap();
        assert!(r.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn residual_rejects_test_function_at_boundary() {
        let cfg = config(FluxModel::zero(), 256, 16);
        let path = sample_path(0, 0, &cfg.time_grid);
        let sol = solve_picard(&cfg, &path).unwrap();
        let phi = BumpKernel::new(5.5, 1.0).unwrap();
        assert!(weak_residual(&sol, &phi, &cfg.regularized_flux().unwrap(), &cfg.kernel).is_err());
    }
}
