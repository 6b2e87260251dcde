//! Brownian paths, forward characteristics with their variational
//! Jacobians, inverse flows and the Monte Carlo inverse-Jacobian moment.

use std::ops::Range;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{BoundaryExcursions, Field, Grid};
use crate::flux::RegularizedFlux;

/// Increasing simulation times `0 = t₀ < … < t_N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidTimeGrid("need at least two times".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidTimeGrid(format!(
                "first time must be 0, got {}",
                times[0]
            )));
        }
        if let Some(k) = times.windows(2).position(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidTimeGrid(format!(
                "times not strictly increasing at index {}: {} then {}",
                k,
                times[k],
                times[k + 1]
            )));
        }
        Ok(Self { times })
    }

    pub fn uniform(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) || n_steps == 0 {
            return Err(Error::InvalidTimeGrid(format!(
                "horizon {horizon} with {n_steps} steps"
            )));
        }
        Self::new((0..=n_steps).map(|k| horizon * k as f64 / n_steps as f64).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn dt(&self, k: usize) -> f64 {
        self.times[k + 1] - self.times[k]
    }

    pub fn max_dt(&self) -> f64 {
        (0..self.n_steps()).map(|k| self.dt(k)).fold(0.0, f64::max)
    }

    /// Keeps every `factor`-th time.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.n_steps().is_multiple_of(factor) {
            return Err(Error::NonNested(format!(
                "factor {factor} does not divide {} steps",
                self.n_steps()
            )));
        }
        Ok(Self {
            times: self.times.iter().step_by(factor).copied().collect(),
        })
    }

    /// `Some(f)` when `self` is `fine` coarsened by `f`.
    pub fn nesting_factor(&self, fine: &TimeGrid) -> Option<usize> {
        if !fine.n_steps().is_multiple_of(self.n_steps()) {
            return None;
        }
        let f = fine.n_steps() / self.n_steps();
        let tol = 1e-12 * fine.horizon();
        let nested = self
            .times
            .iter()
            .enumerate()
            .all(|(k, &t)| (fine.times[k * f] - t).abs() <= tol);
        nested.then_some(f)
    }

    /// Index of `t` on the grid, if present.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * self.horizon();
        let k = self.times.partition_point(|&s| s < t - tol);
        (k < self.times.len() && (self.times[k] - t).abs() <= tol).then_some(k)
    }
}

/// One realization of a standard Brownian motion on a [`TimeGrid`].
///
/// Stores `B(t_k)` rather than increments so that coarsening keeps the
/// values at shared times bit-identical.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrownianPath {
    time_grid: TimeGrid,
    values: Vec<f64>,
    master_seed: u64,
    path_index: u64,
}

/// Standard normal from two uniform words (Box–Muller, cosine branch).
fn box_muller(a: u64, b: u64) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = ((a >> 11) as f64 + 1.0) * SCALE;
    let u2 = (b >> 11) as f64 * SCALE;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Counter-based stream of standard normals: the `k`-th draw of path
/// `path_index` depends only on `(master_seed, path_index, k)`.
pub fn normal_draw(master_seed: u64, path_index: u64, k: u64) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(path_index);
    rng.set_word_pos(4 * k as u128);
    box_muller(rng.next_u64(), rng.next_u64())
}

/// Samples path `path_index` of the ensemble keyed by `master_seed`.
pub fn sample_path(master_seed: u64, path_index: u64, time_grid: &TimeGrid) -> BrownianPath {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(path_index);
    let mut values = Vec::with_capacity(time_grid.times.len());
    let mut b = 0.0;
    values.push(b);
    for k in 0..time_grid.n_steps() {
        b += time_grid.dt(k).sqrt() * box_muller(rng.next_u64(), rng.next_u64());
        values.push(b);
    }
    BrownianPath {
        time_grid: time_grid.clone(),
        values,
        master_seed,
        path_index,
    }
}

impl BrownianPath {
    pub fn time_grid(&self) -> &TimeGrid {
        &self.time_grid
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    /// `B(t_k)`.
    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `ΔB_k = B(t_{k+1}) - B(t_k)`.
    pub fn increment(&self, k: usize) -> f64 {
        self.values[k + 1] - self.values[k]
    }

    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn coarsen(&self, factor: usize) -> Result<BrownianPath> {
        let time_grid = self.time_grid.coarsen(factor)?;
        Ok(BrownianPath {
            time_grid,
            values: self.values.iter().step_by(factor).copied().collect(),
            ..*self
        })
    }

    /// Restricts the path to a time grid nested in its own.
    pub fn restrict(&self, coarse: &TimeGrid) -> Result<BrownianPath> {
        let f = coarse.nesting_factor(&self.time_grid).ok_or_else(|| {
            Error::NonNested(format!(
                "{} steps are not nested in the path's {} steps",
                coarse.n_steps(),
                self.time_grid.n_steps()
            ))
        })?;
        self.coarsen(f)
    }
}

/// Runs `f` for every path index in parallel; results come back in index
/// order regardless of scheduling.
pub fn map_paths<T, F>(n_paths: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..n_paths as u64).into_par_iter().map(f).collect()
}

/// Nonlocal field with its central slopes, sampled at particle positions.
pub(crate) struct ConvSampler<'a> {
    field: &'a Field,
    slopes: Vec<f64>,
}

impl<'a> ConvSampler<'a> {
    pub(crate) fn new(field: &'a Field) -> Self {
        Self {
            slopes: field.central_slopes(),
            field,
        }
    }

    /// `(z, ∂ₓz)` at `x`; zero outside the grid.
    pub(crate) fn sample(&self, x: f64) -> (f64, f64) {
        match self.field.grid().locate(x) {
            Some((i, th)) => {
                let v = self.field.values();
                (
                    (1.0 - th) * v[i] + th * v[i + 1],
                    (1.0 - th) * self.slopes[i] + th * self.slopes[i + 1],
                )
            }
            None => (0.0, 0.0),
        }
    }
}

/// Euler–Maruyama state for a block of particles started at grid nodes.
#[derive(Debug, Clone)]
pub(crate) struct FlowState {
    grid: Grid,
    nodes: Range<usize>,
    start_index: usize,
    start_time: f64,
    b_start: f64,
    displacement: Vec<f64>,
    positions: Vec<f64>,
    jacobians: Vec<f64>,
    escaped: Vec<bool>,
    excursions: BoundaryExcursions,
    index: usize,
}

impl FlowState {
    pub(crate) fn new(grid: Grid, nodes: Range<usize>, path: &BrownianPath, start_index: usize) -> Self {
        let positions: Vec<f64> = nodes.clone().map(|i| grid.node(i)).collect();
        let n = positions.len();
        Self {
            grid,
            nodes,
            start_index,
            start_time: path.time_grid.times[start_index],
            b_start: path.value(start_index),
            displacement: vec![0.0; n],
            positions,
            jacobians: vec![1.0; n],
            escaped: vec![false; n],
            excursions: BoundaryExcursions::default(),
            index: start_index,
        }
    }

    /// Advances from `t_k` to `t_{k+1}` with the nonlocal field frozen at
    /// `conv`.
    pub(crate) fn step(&mut self, flux: &RegularizedFlux, conv: &ConvSampler<'_>, path: &BrownianPath) -> Result<()> {
        let k = self.index;
        let t = path.time_grid.times[k];
        let dt = path.time_grid.dt(k);
        let noise = path.value(k + 1) - self.b_start;
        for (p, x) in self.positions.iter_mut().enumerate() {
            let (z, dz) = conv.sample(*x);
            let (drift, slope) = flux.drift_and_slope(t, *x, z, dz);
            let j = self.jacobians[p] * (1.0 + slope * dt);
            if !(j > 0.0) {
                return Err(Error::StepSize {
                    node: self.nodes.start + p,
                    time: t,
                    jacobian: j,
                });
            }
            self.jacobians[p] = j;
            self.displacement[p] += drift * dt;
            let origin = self.grid.node(self.nodes.start + p);
            *x = origin + self.displacement[p] + noise;
            if !self.grid.contains(*x) && !self.escaped[p] {
                self.escaped[p] = true;
                self.excursions.record();
            }
        }
        self.index += 1;
        Ok(())
    }

    pub(crate) fn snapshot(&self, path: &BrownianPath) -> FlowMap {
        FlowMap {
            grid: self.grid,
            nodes: self.nodes.clone(),
            start_time: self.start_time,
            end_time: path.time_grid.times[self.index],
            start_index: self.start_index,
            end_index: self.index,
            positions: self.positions.clone(),
            jacobians: self.jacobians.clone(),
            boundary_excursions: self.excursions,
        }
    }
}

/// `X_{s,t}(x_i)` and `∂ₓX_{s,t}(x_i)` for a contiguous block of grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowMap {
    grid: Grid,
    nodes: Range<usize>,
    start_time: f64,
    end_time: f64,
    start_index: usize,
    end_index: usize,
    positions: Vec<f64>,
    jacobians: Vec<f64>,
    boundary_excursions: BoundaryExcursions,
}

impl FlowMap {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Grid node indices of the tracked particles.
    pub fn nodes(&self) -> Range<usize> {
        self.nodes.clone()
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn end_time(&self) -> f64 {
        self.end_time
    }

    pub fn end_index(&self) -> usize {
        self.end_index
    }

    pub fn initial(&self, p: usize) -> f64 {
        self.grid.node(self.nodes.start + p)
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn jacobians(&self) -> &[f64] {
        &self.jacobians
    }

    pub fn boundary_excursions(&self) -> BoundaryExcursions {
        self.boundary_excursions
    }

    /// Positions strictly increasing and Jacobians positive.
    pub fn check(&self) -> Result<()> {
        if let Some(p) = self.jacobians.iter().position(|&j| !(j > 0.0)) {
            return Err(Error::StepSize {
                node: self.nodes.start + p,
                time: self.end_time,
                jacobian: self.jacobians[p],
            });
        }
        if let Some(p) = self.positions.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::NonMonotone {
                node: self.nodes.start + p,
                next: self.nodes.start + p + 1,
                time: self.end_time,
            });
        }
        Ok(())
    }

    pub fn inverse(&self) -> Result<InverseFlow<'_>> {
        self.check()?;
        Ok(InverseFlow { map: self })
    }
}

/// `Y_{s,t}(x)` and its Jacobian at one query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseSample {
    pub position: f64,
    pub jacobian: f64,
    /// False when `x` lies outside the image of the tracked particles and
    /// the result was clamped to the nearest end.
    pub inside: bool,
}

/// Monotone piecewise-linear inversion of a [`FlowMap`].
#[derive(Debug, Clone, Copy)]
pub struct InverseFlow<'a> {
    map: &'a FlowMap,
}

impl<'a> InverseFlow<'a> {
    pub fn eval(&self, x: f64) -> InverseSample {
        let xs = &self.map.positions;
        let js = &self.map.jacobians;
        let last = xs.len() - 1;
        if x < xs[0] || x > xs[last] {
            let p = if x < xs[0] { 0 } else { last };
            return InverseSample {
                position: self.map.initial(p),
                jacobian: 1.0 / js[p],
                inside: false,
            };
        }
        let p = xs.partition_point(|&v| v <= x).clamp(1, last) - 1;
        let th = (x - xs[p]) / (xs[p + 1] - xs[p]);
        let (y0, y1) = (self.map.initial(p), self.map.initial(p + 1));
        InverseSample {
            position: y0 + th * (y1 - y0),
            jacobian: (1.0 - th) / js[p] + th / js[p + 1],
            inside: true,
        }
    }

    /// Pushes `data` (on the map's grid) forward: `u(x) = data(Y(x))·JY(x)`
    /// at every grid node. Nodes outside the image of the tracked block get
    /// zero; an excursion is recorded when the data at the clamped end is
    /// nonzero.
    pub fn pushforward(&self, data: &Field) -> Result<(Field, BoundaryExcursions)> {
        let map = self.map;
        if data.grid() != &map.grid {
            return Err(Error::Mismatch("pushforward data on a different grid".into()));
        }
        let grid = map.grid;
        let u = data.values();
        let xs = &map.positions;
        let js = &map.jacobians;
        let first = map.nodes.start;
        let last = xs.len() - 1;
        let mut excursions = BoundaryExcursions::default();
        if u[first] != 0.0 || u[first + last] != 0.0 {
            excursions.record();
        }
        let mut out = vec![0.0; grid.n_nodes()];
        let mut p = 0usize;
        for (j, slot) in out.iter_mut().enumerate() {
            let x = grid.node(j);
            if x < xs[0] {
                continue;
            }
            if x > xs[last] {
                break;
            }
            while p + 1 < last && xs[p + 1] <= x {
                p += 1;
            }
            let th = (x - xs[p]) / (xs[p + 1] - xs[p]);
            let value = (1.0 - th) * u[first + p] + th * u[first + p + 1];
            let jac = (1.0 - th) / js[p] + th / js[p + 1];
            *slot = value * jac;
        }
        Ok((Field::from_raw(grid, out, map.end_time), excursions))
    }
}

fn check_history(conv_history: &[Field], path: &BrownianPath, s: usize, t: usize) -> Result<()> {
    if s > t || t > path.time_grid.n_steps() {
        return Err(Error::Mismatch(format!(
            "flow interval [{s}, {t}] outside the path's {} steps",
            path.time_grid.n_steps()
        )));
    }
    if conv_history.len() < t {
        return Err(Error::Mismatch(format!(
            "nonlocal history has {} entries, need {t}",
            conv_history.len()
        )));
    }
    Ok(())
}

/// Forward characteristics from every node of the history's grid.
pub fn forward_flow(
    flux: &RegularizedFlux,
    conv_history: &[Field],
    path: &BrownianPath,
    s: usize,
    t: usize,
) -> Result<FlowMap> {
    let grid = *conv_history
        .first()
        .ok_or_else(|| Error::Mismatch("empty nonlocal history".into()))?
        .grid();
    forward_flow_nodes(flux, conv_history, path, s, t, 0..grid.n_nodes())
}

/// Forward characteristics `X_{s,t}` (path time indices) for the particles
/// started at grid nodes `nodes`, with `conv_history[k]` the frozen
/// nonlocal field `K∗u` at `t_k`.
///
/// Euler–Maruyama for the positions; the Jacobian is the product of the
/// one-step factors `1 + ∂ₓ[Fε(t_k, ·, conv_k)](X_k)·Δt`.
pub fn forward_flow_nodes(
    flux: &RegularizedFlux,
    conv_history: &[Field],
    path: &BrownianPath,
    s: usize,
    t: usize,
    nodes: Range<usize>,
) -> Result<FlowMap> {
    check_history(conv_history, path, s, t)?;
    let grid = *conv_history
        .first()
        .ok_or_else(|| Error::Mismatch("empty nonlocal history".into()))?
        .grid();
    if nodes.len() < 2 || nodes.end > grid.n_nodes() {
        return Err(Error::Mismatch(format!("node range {nodes:?} invalid")));
    }
    let mut state = FlowState::new(grid, nodes, path, s);
    for conv in &conv_history[s..t] {
        state.step(flux, &ConvSampler::new(conv), path)?;
    }
    Ok(state.snapshot(path))
}

/// Integrates the backward equation
/// `Y_{s,t}(x) = x - ∫ₛᵗ Fε(r, Y_{r,t}(x), conv_r) dr - (B_t - B_s)`
/// from `r = t` down to `r = s`. Independent of [`InverseFlow`]; used to
/// cross-check it.
pub fn backward_flow(
    flux: &RegularizedFlux,
    conv_history: &[Field],
    path: &BrownianPath,
    s: usize,
    t: usize,
    x: f64,
) -> Result<f64> {
    check_history(conv_history, path, s, t)?;
    let mut y = x;
    for k in (s..t).rev() {
        let conv = &conv_history[k];
        let tk = path.time_grid.times[k];
        let z = conv.try_interpolate(y).unwrap_or(0.0);
        y -= flux.value(tk, y, z) * path.time_grid.dt(k) + path.increment(k);
    }
    Ok(y)
}

/// Node-wise Monte Carlo estimate of `E[|∂ₓX_{s,t}(x)|⁻¹]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentField {
    pub grid: Grid,
    pub nodes: Range<usize>,
    pub end_time: f64,
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub n_paths: usize,
}

impl MomentField {
    /// Largest node estimate and its standard error.
    pub fn max(&self) -> (f64, f64) {
        self.mean.iter().zip(&self.std_error).fold(
            (f64::NEG_INFINITY, 0.0),
            |acc, (&m, &s)| if m > acc.0 { (m, s) } else { acc },
        )
    }
}

/// Averages `1/J` per node over an ensemble of flow maps.
pub fn jacobian_inverse_moment(maps: &[&FlowMap]) -> Result<MomentField> {
    let first = maps.first().ok_or(Error::EmptyEnsemble)?;
    if maps.len() < 2 {
        return Err(Error::Mismatch("moment estimate needs at least two paths".into()));
    }
    if maps
        .iter()
        .any(|m| m.grid != first.grid || m.nodes != first.nodes || m.end_time != first.end_time)
    {
        return Err(Error::Mismatch("flow maps differ in grid, nodes or time".into()));
    }
    let n = maps.len() as f64;
    let len = first.jacobians.len();
    let mut mean = vec![0.0; len];
    let mut sq = vec![0.0; len];
    for m in maps {
        for (p, &j) in m.jacobians.iter().enumerate() {
            let r = 1.0 / j;
            mean[p] += r;
            sq[p] += r * r;
        }
    }
    let std_error = mean
        .iter_mut()
        .zip(&sq)
        .map(|(m, &s)| {
            *m /= n;
            let var = ((s - n * *m * *m) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        })
        .collect();
    Ok(MomentField {
        grid: first.grid,
        nodes: first.nodes.clone(),
        end_time: first.end_time,
        mean,
        std_error,
        n_paths: maps.len(),
    })
}

/// Largest time step allowed by `Δt·sup|∂ₓFε| ≤ 1/2`.
pub fn stable_time_step(flux: &RegularizedFlux, z_bound: f64, conv_slope_bound: f64) -> f64 {
    let s = flux.max_total_slope(z_bound, conv_slope_bound);
    if s > 0.0 {
        0.5 / s
    } else {
        f64::INFINITY
    }
}
