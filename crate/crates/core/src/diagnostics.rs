//! Numerical counterparts of the a priori estimates: mass and L² tracking,
//! the DiPerna–Lions commutator, mutual collapse of approximation sequences
//! and refinement studies over shared Brownian paths.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{apply_stencil, BoundaryExcursions, Field, Grid, Mollifier, Stencil};
use crate::flow::{jacobian_inverse_moment, map_paths, sample_path, MomentField, TimeGrid};
use crate::flux::{FluxModel, Response, Spatial, Temporal};
use crate::solver::{solve_marching, solve_picard, weak_residual, PathSolution, PathSummary, SolverConfig};

/// What each report entry is the discrete version of.
pub mod mirrors {
    pub const MASS: &str = "pathwise mass identity: integral of |u(t)| equals integral of |u0| for every iterate";
    pub const POSITIVITY: &str = "nonnegative data stay nonnegative under pushforward with positive Jacobian";
    pub const JACOBIAN: &str = "flow of diffeomorphisms: spatial derivative of the flow stays positive";
    pub const L2_BOUND: &str = "L2 bound: E|u(t)|^2 <= sup E[1/dX] * |u0|^2";
    pub const MOMENT: &str = "inverse-Jacobian moment bound E[1/dX] <= C, uniform in the mollification";
    pub const COMMUTATOR: &str = "commutator F_eps dV_eps - (F dV)_eps vanishes as eps -> 0";
    pub const UNIQUENESS: &str =
        "uniqueness of L2-weak solutions, tested as mutual collapse of approximation sequences";
    pub const WEAK_FORM: &str = "Ito form of the weak formulation tested against a bump";
    pub const PICARD: &str = "iteration with the nonlocal field frozen from the previous iterate";
    pub const CONSISTENCY: &str = "Picard fixed point versus one-step-lagged marching";
    pub const TRANSLATION: &str = "zero-flux solution is the translate of the datum by the Brownian path";
    pub const EXCURSIONS: &str = "whole-line problem truncated to a grid; mass must not reach its ends";
    pub const SHOCKS: &str = "local Burgers-type flux steepens gradients in finite time (demo only)";
    pub const HYPOTHESIS: &str = "admissibility norms of the flux on the box the run visits";
}

/// `log(v_i/v_{i+1}) / log(h_i/h_{i+1})` for consecutive levels.
pub fn empirical_orders(h: &[f64], v: &[f64]) -> Vec<f64> {
    h.windows(2)
        .zip(v.windows(2))
        .map(|(h, v)| (v[0] / v[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn rms(xs: &[f64]) -> f64 {
    (xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64).sqrt()
}

/// `x ↦ F(t, x, (K∗u)(x))` at the grid nodes.
fn composed_flux(u: &Field, flux: &FluxModel, kernel: &Stencil) -> Field {
    let conv = apply_stencil(u, kernel);
    let grid = *u.grid();
    let t = u.time();
    let values = (0..grid.n_nodes())
        .map(|i| flux.value(t, grid.node(i), conv.values()[i]))
        .collect();
    Field::from_raw(grid, values, t)
}

/// Discrete `L²([0,T]×grid)` norm of `R_ε = (Fc)ε·uε − (Fc·u)ε` with
/// `Fc(x) = F(t, x, (K∗u)(x))`, left-point in time. `snapshots` holds `u` at
/// every time of `time_grid`.
pub fn commutator_norm(
    snapshots: &[Field],
    time_grid: &TimeGrid,
    flux: &FluxModel,
    kernel: &crate::fields::BumpKernel,
    epsilon: f64,
) -> Result<f64> {
    if snapshots.len() != time_grid.n_steps() + 1 {
        return Err(Error::LengthMismatch {
            expected: time_grid.n_steps() + 1,
            got: snapshots.len(),
        });
    }
    let grid = *snapshots[0].grid();
    let rho = Stencil::sample(&Mollifier::resolved(epsilon, grid.dx())?, grid.dx())?;
    let k = Stencil::sample(kernel, grid.dx())?;
    let mut total = 0.0;
    for (step, u) in snapshots.iter().take(time_grid.n_steps()).enumerate() {
        if u.values().iter().all(|&v| v == 0.0) {
            continue;
        }
        let fc = composed_flux(u, flux, &k);
        let fu = Field::from_raw(
            grid,
            fc.values().iter().zip(u.values()).map(|(a, b)| a * b).collect(),
            u.time(),
        );
        let fc_eps = apply_stencil(&fc, &rho);
        let u_eps = apply_stencil(u, &rho);
        let fu_eps = apply_stencil(&fu, &rho);
        let r: Vec<f64> = (0..grid.n_nodes())
            .map(|i| fc_eps.values()[i] * u_eps.values()[i] - fu_eps.values()[i])
            .collect();
        total += time_grid.dt(step) * Field::from_raw(grid, r, u.time()).norms().l2.powi(2);
    }
    Ok(total.sqrt())
}

/// Commutator norm per mollification width, root-mean-square over paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommutatorStudy {
    pub flux: String,
    pub epsilons: Vec<f64>,
    pub values: Vec<f64>,
    pub orders: Vec<f64>,
    pub strictly_decreasing: bool,
}

pub fn commutator_study(
    solutions: &[PathSolution],
    flux: &FluxModel,
    kernel: &crate::fields::BumpKernel,
    epsilons: &[f64],
) -> Result<CommutatorStudy> {
    if solutions.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut values = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let per_path = solutions
            .iter()
            .map(|s| commutator_norm(&s.snapshots, s.path.time_grid(), flux, kernel, eps))
            .collect::<Result<Vec<_>>>()?;
        values.push(rms(&per_path));
    }
    Ok(CommutatorStudy {
        flux: flux.name.clone(),
        orders: empirical_orders(epsilons, &values),
        strictly_decreasing: values.windows(2).all(|w| w[1] < w[0]),
        epsilons: epsilons.to_vec(),
        values,
    })
}

/// One rung of a uniqueness ladder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessLevel {
    pub label: String,
    /// Path mean of `sup_t ‖u_A(t) − u_B(t)‖_{L¹}` over shared times.
    pub distance: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessStudy {
    pub levels: Vec<UniquenessLevel>,
    pub strictly_decreasing: bool,
    /// `log2(d_ℓ/d_{ℓ+1})`.
    pub rates: Vec<f64>,
    pub note: &'static str,
}

fn same_problem(a: &SolverConfig, b: &SolverConfig) -> Result<()> {
    if a.flux != b.flux || a.kernel != b.kernel || a.initial != b.initial {
        return Err(Error::Mismatch(
            "configurations differ in flux, kernel or initial datum".into(),
        ));
    }
    if a.time_grid.horizon() != b.time_grid.horizon() {
        return Err(Error::Mismatch("configurations differ in horizon".into()));
    }
    Ok(())
}

/// The finer of two time grids, provided one is nested in the other.
fn finer_time_grid<'a>(a: &'a TimeGrid, b: &'a TimeGrid) -> Result<&'a TimeGrid> {
    if a.nesting_factor(b).is_some() {
        Ok(b)
    } else if b.nesting_factor(a).is_some() {
        Ok(a)
    } else {
        Err(Error::NonNested(format!(
            "time grids with {} and {} steps are not nested",
            a.n_steps(),
            b.n_steps()
        )))
    }
}

fn nested_space(a: &Grid, b: &Grid) -> bool {
    let (c, f) = if a.n_cells() <= b.n_cells() { (a, b) } else { (b, a) };
    c.x_min() == f.x_min() && c.x_max() == f.x_max() && f.n_cells() % c.n_cells() == 0
}

/// Path-averaged distance between two approximations driven by the same
/// Brownian paths.
pub fn uniqueness_proxy(
    a: &SolverConfig,
    b: &SolverConfig,
    master_seed: u64,
    n_paths: usize,
) -> Result<UniquenessLevel> {
    same_problem(a, b)?;
    if !nested_space(&a.grid, &b.grid) {
        return Err(Error::NonNested("spatial grids are not nested".into()));
    }
    let fine = finer_time_grid(&a.time_grid, &b.time_grid)?.clone();
    let coarse_steps = a.time_grid.n_steps().min(b.time_grid.n_steps());
    let fa = fine.n_steps() / a.time_grid.n_steps();
    let fb = fine.n_steps() / b.time_grid.n_steps();
    let per_path = map_paths(n_paths, |i| {
        let path = sample_path(master_seed, i, &fine);
        let ua = solve_picard(a, &path)?;
        let ub = solve_picard(b, &path)?;
        let step = fine.n_steps() / coarse_steps;
        Ok((0..=coarse_steps)
            .map(|k| ua.snapshots[k * step / fa].l1_distance(&ub.snapshots[k * step / fb]))
            .fold(0.0, f64::max))
    })?;
    if per_path.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let (distance, std_error) = mean_and_se(&per_path);
    Ok(UniquenessLevel {
        label: String::new(),
        distance,
        std_error,
        n_paths,
    })
}

/// Runs [`uniqueness_proxy`] on each labelled pair.
pub fn uniqueness_study(
    pairs: &[(String, SolverConfig, SolverConfig)],
    master_seed: u64,
    n_paths: usize,
) -> Result<UniquenessStudy> {
    let levels = pairs
        .iter()
        .map(|(label, a, b)| {
            let mut level = uniqueness_proxy(a, b, master_seed, n_paths)?;
            level.label = label.clone();
            Ok(level)
        })
        .collect::<Result<Vec<_>>>()?;
    let d: Vec<f64> = levels.iter().map(|l| l.distance).collect();
    Ok(UniquenessStudy {
        strictly_decreasing: d.windows(2).all(|w| w[1] < w[0]),
        rates: d.windows(2).map(|w| (w[0] / w[1]).log2()).collect(),
        levels,
        note: "distances compare successive approximations on shared paths; \
               no two distinct weak solutions are constructed",
    })
}

/// Ensemble-level health and L² bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub n_paths: usize,
    pub max_mass_drift: f64,
    pub min_value: f64,
    pub min_jacobian: f64,
    pub boundary_excursions: BoundaryExcursions,
    pub all_converged: bool,
    pub max_iterations: usize,
    pub initial_l2_squared: f64,
    pub times: Vec<f64>,
    /// Path mean of `‖u(t)‖²_{L²}` and its standard error.
    pub l2_mean: Vec<f64>,
    pub l2_std_error: Vec<f64>,
    /// `max_x Ê[1/∂ₓX_{0,t}] · ‖u₀ε‖²`, when at least two paths exist.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2_bound: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moment_max: Option<Vec<f64>>,
    /// Output times where the mean exceeds the bound by more than three
    /// standard errors (plus summation rounding).
    pub l2_violations: Vec<f64>,
}

impl BoundsReport {
    pub fn positivity_held(&self) -> bool {
        self.min_value >= 0.0
    }

    pub fn jacobian_positive(&self) -> bool {
        self.min_jacobian > 0.0
    }
}

/// Relative slack for comparing path means that are equal in exact
/// arithmetic.
const ROUNDING: f64 = 1e-12;

/// `Ê[1/∂ₓX_{0,t}]` at every output time of the ensemble.
pub fn output_moments(ensemble: &[PathSummary]) -> Result<Vec<MomentField>> {
    let first = ensemble.first().ok_or(Error::EmptyEnsemble)?;
    (0..first.flows.len())
        .map(|j| {
            let maps: Vec<_> = ensemble.iter().map(|s| &s.flows[j]).collect();
            jacobian_inverse_moment(&maps)
        })
        .collect()
}

pub fn track_bounds(ensemble: &[PathSummary]) -> Result<BoundsReport> {
    let first = ensemble.first().ok_or(Error::EmptyEnsemble)?;
    let initial_l2_squared = first.initial.norms().l2.powi(2);
    let n_out = first.snapshots.len();
    let mut l2_mean = Vec::with_capacity(n_out);
    let mut l2_std_error = Vec::with_capacity(n_out);
    for j in 0..n_out {
        let sq: Vec<f64> = ensemble.iter().map(|s| s.snapshots[j].norms().l2.powi(2)).collect();
        let (m, se) = mean_and_se(&sq);
        l2_mean.push(m);
        l2_std_error.push(se);
    }
    let moments = if ensemble.len() >= 2 && first.flows.len() == n_out {
        Some(output_moments(ensemble)?)
    } else {
        None
    };
    let moment_max: Option<Vec<f64>> = moments.map(|ms| ms.iter().map(|m| m.max().0).collect());
    let l2_bound: Option<Vec<f64>> = moment_max
        .as_ref()
        .map(|mm| mm.iter().map(|m| m * initial_l2_squared).collect());
    let l2_violations = match &l2_bound {
        Some(bound) => (0..n_out)
            .filter(|&j| l2_mean[j] > bound[j] * (1.0 + ROUNDING) + 3.0 * l2_std_error[j])
            .map(|j| first.output_times[j])
            .collect(),
        None => Vec::new(),
    };
    let mut excursions = BoundaryExcursions::default();
    for s in ensemble {
        excursions.merge(s.boundary_excursions);
    }
    Ok(BoundsReport {
        n_paths: ensemble.len(),
        max_mass_drift: ensemble.iter().map(|s| s.max_mass_drift).fold(0.0, f64::max),
        min_value: ensemble.iter().map(|s| s.min_value).fold(f64::INFINITY, f64::min),
        min_jacobian: ensemble.iter().map(|s| s.min_jacobian).fold(f64::INFINITY, f64::min),
        boundary_excursions: excursions,
        all_converged: ensemble.iter().all(|s| s.converged),
        max_iterations: ensemble.iter().map(|s| s.iterations_used).max().unwrap_or(0),
        initial_l2_squared,
        times: first.output_times.clone(),
        l2_mean,
        l2_std_error,
        l2_bound,
        moment_max,
        l2_violations,
    })
}

/// Largest over smallest of a set of positive maxima.
pub fn stability_ratio(maxima: &[f64]) -> f64 {
    let hi = maxima.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = maxima.iter().copied().fold(f64::INFINITY, f64::min);
    hi / lo
}

/// Per-path scalar tracked along a refinement ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LadderQuantity {
    /// Sup-norm error of `u(T)` against `u₀ε(x − cT − B_T)`; spatially
    /// constant, steady, z-independent fluxes only. Orders are in `dx`.
    TranslationError,
    /// `sup_t ‖u_Picard(t) − u_marching(t)‖_{L¹}`. Orders are in `Δt`.
    MarchingGap,
    /// `max_t |weak residual|` against a bump test function; aggregated as
    /// root-mean-square. Orders are in `Δt`.
    WeakResidual { center: f64, radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceLevel {
    pub dx: f64,
    pub dt: f64,
    pub mean: f64,
    pub rms: f64,
    pub std_error: f64,
    pub max_mass_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub quantity: LadderQuantity,
    pub n_paths: usize,
    pub levels: Vec<ConvergenceLevel>,
    /// Orders of the headline aggregate (rms for residuals, mean otherwise).
    pub orders: Vec<f64>,
}

impl ConvergenceStudy {
    pub fn headline(&self) -> Vec<f64> {
        self.levels
            .iter()
            .map(|l| match self.quantity {
                LadderQuantity::WeakResidual { .. } => l.rms,
                _ => l.mean,
            })
            .collect()
    }
}

fn translation_speed(flux: &FluxModel) -> Result<f64> {
    match (&flux.temporal, &flux.spatial, &flux.response) {
        (Temporal::Steady, Spatial::Zero, _) => Ok(0.0),
        (Temporal::Steady, Spatial::Constant { value }, Response::Unit) => Ok(*value),
        _ => Err(Error::Mismatch(format!(
            "translation oracle needs a steady constant flux, got {}",
            flux.name
        ))),
    }
}

/// Exact solution data for a steady constant flux `c`: `u₀ε` sampled on an
/// 8× refined grid, and `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationReference {
    pub datum: Field,
    pub speed: f64,
}

impl TranslationReference {
    pub fn new(cfg: &SolverConfig) -> Result<Self> {
        let speed = translation_speed(&cfg.flux)?;
        let fine = cfg.grid.refine(8);
        let u0 = cfg.initial.sample(&fine)?;
        let datum = crate::fields::convolve(&u0, &Mollifier::resolved(cfg.eps_u, fine.dx())?)?;
        Ok(Self { datum, speed })
    }

    /// Sup-norm distance between `u(T)` and `u₀ε(x − cT − B_T)`.
    pub fn error(&self, sol: &PathSolution) -> f64 {
        let n = sol.path.time_grid().n_steps();
        let shift = self.speed * sol.path.time_grid().horizon() + sol.path.value(n);
        let u = sol.final_snapshot();
        let grid = u.grid();
        (0..grid.n_nodes())
            .map(|i| (u.values()[i] - self.datum.value_or_zero(grid.node(i) - shift)).abs())
            .fold(0.0, f64::max)
    }
}

/// `max_k max|∂ₓu_k| / max|∂ₓu_0|` over a sequence of snapshots.
pub fn gradient_growth(snapshots: &[Field]) -> f64 {
    let steepest = |u: &Field| u.central_slopes().iter().fold(0.0f64, |a, s| a.max(s.abs()));
    let Some(first) = snapshots.first() else {
        return 1.0;
    };
    let s0 = steepest(first);
    snapshots.iter().map(steepest).fold(0.0, f64::max) / s0
}

/// Runs every level of `ladder` (ordered coarse to fine) on the same paths,
/// sampled on the finest time grid and restricted to each level.
pub fn convergence_study(
    ladder: &[SolverConfig],
    quantity: LadderQuantity,
    master_seed: u64,
    n_paths: usize,
) -> Result<ConvergenceStudy> {
    let finest = ladder.last().ok_or(Error::EmptyEnsemble)?;
    for cfg in ladder {
        same_problem(cfg, finest)?;
        if cfg.time_grid.nesting_factor(&finest.time_grid).is_none() {
            return Err(Error::NonNested(format!(
                "{} steps are not nested in the finest {} steps",
                cfg.time_grid.n_steps(),
                finest.time_grid.n_steps()
            )));
        }
        if !nested_space(&cfg.grid, &finest.grid) {
            return Err(Error::NonNested("spatial grids are not nested".into()));
        }
    }
    let mut levels = Vec::with_capacity(ladder.len());
    for cfg in ladder {
        let oracle = match quantity {
            LadderQuantity::TranslationError => Some(TranslationReference::new(cfg)?),
            _ => None,
        };
        let flux = cfg.regularized_flux()?;
        let per_path = map_paths(n_paths, |i| {
            let path = sample_path(master_seed, i, &finest.time_grid);
            let sol = solve_picard(cfg, &path)?;
            let value = match quantity {
                LadderQuantity::TranslationError => oracle.as_ref().expect("oracle built above").error(&sol),
                LadderQuantity::MarchingGap => {
                    let m = solve_marching(cfg, &path)?;
                    sol.snapshots
                        .iter()
                        .zip(&m.snapshots)
                        .map(|(a, b)| a.l1_distance(b))
                        .fold(0.0, f64::max)
                }
                LadderQuantity::WeakResidual { center, radius } => {
                    let phi = crate::fields::BumpKernel::new(center, radius)?;
                    weak_residual(&sol, &phi, &flux, &cfg.kernel)?.max_abs()
                }
            };
            Ok((value, sol.max_mass_drift()))
        })?;
        let values: Vec<f64> = per_path.iter().map(|v| v.0).collect();
        let (mean, std_error) = mean_and_se(&values);
        levels.push(ConvergenceLevel {
            dx: cfg.grid.dx(),
            dt: cfg.time_grid.max_dt(),
            mean,
            rms: rms(&values),
            std_error,
            max_mass_drift: per_path.iter().map(|v| v.1).fold(0.0, f64::max),
        });
    }
    let mut study = ConvergenceStudy {
        quantity,
        n_paths,
        levels,
        orders: Vec::new(),
    };
    let h: Vec<f64> = study
        .levels
        .iter()
        .map(|l| match quantity {
            LadderQuantity::TranslationError => l.dx,
            _ => l.dt,
        })
        .collect();
    study.orders = empirical_orders(&h, &study.headline());
    Ok(study)
}

/// One named outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportEntry {
    pub mirrors: String,
    /// Whether a failure makes the run fail.
    pub gating: bool,
    pub passed: Option<bool>,
    pub value: serde_json::Value,
}

/// Machine-readable collection of diagnostics keyed by name.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct DiagnosticsReport {
    entries: BTreeMap<String, ReportEntry>,
}

impl DiagnosticsReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        name: &str,
        mirrors: &str,
        gating: bool,
        passed: Option<bool>,
        value: &impl Serialize,
    ) -> Result<()> {
        let value = serde_json::to_value(value).map_err(|e| Error::Mismatch(e.to_string()))?;
        if contains_non_finite(&value) {
            return Err(Error::NonFinite {
                location: format!("diagnostic {name}"),
                value: f64::NAN,
            });
        }
        self.entries.insert(
            name.to_string(),
            ReportEntry {
                mirrors: mirrors.to_string(),
                gating,
                passed,
                value,
            },
        );
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ReportEntry> {
        self.entries.get(name)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &ReportEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// False iff some gating entry failed.
    pub fn hard_invariants_held(&self) -> bool {
        self.entries.values().all(|e| !e.gating || e.passed != Some(false))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report values are plain JSON")
    }
}

/// serde_json turns NaN and infinities into `null`, so report values never
/// contain `null` otherwise (absent options are skipped).
fn contains_non_finite(v: &serde_json::Value) -> bool {
    match v {
        serde_json::Value::Null => true,
        serde_json::Value::Array(a) => a.iter().any(contains_non_finite),
        serde_json::Value::Object(o) => o.values().any(contains_non_finite),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::BumpKernel;
    use crate::solver::InitialData;
    use approx::assert_abs_diff_eq;

    fn config(flux: FluxModel, n_cells: usize, n_steps: usize, eps_u_cells: f64) -> SolverConfig {
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
            eps_u: eps_u_cells * grid.dx(),
            eps_f: 8.0 * grid.dx(),
            picard_tol: 1e-10,
            picard_max_iters: 30,
            output_indices: vec![0, n_steps],
        }
    }

    #[test]
    fn orders_of_exact_power_law() {
        let h = [0.4, 0.2, 0.1];
        let v: Vec<f64> = h.iter().map(|x: &f64| 3.0 * x.powi(2)).collect();
        for o in empirical_orders(&h, &v) {
            assert_abs_diff_eq!(o, 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn commutator_of_zero_field_is_zero() {
        let grid = Grid::new(-4.0, 4.0, 256).unwrap();
        let tg = TimeGrid::uniform(1.0, 4).unwrap();
        let snaps = vec![Field::zeros(grid, 0.0); 5];
        let k = BumpKernel::new(0.0, 0.5).unwrap();
        let r = commutator_norm(&snaps, &tg, &FluxModel::linear_irregular(), &k, 8.0 * grid.dx()).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn commutator_rejects_under_resolved_width() {
        let grid = Grid::new(-4.0, 4.0, 256).unwrap();
        let tg = TimeGrid::uniform(1.0, 1).unwrap();
        let snaps = vec![Field::zeros(grid, 0.0); 2];
        let k = BumpKernel::new(0.0, 0.5).unwrap();
        assert!(commutator_norm(&snaps, &tg, &FluxModel::zero(), &k, grid.dx()).is_err());
    }

    #[test]
    fn identical_configs_are_at_distance_zero() {
        let cfg = config(FluxModel::smooth_nonlocal(), 256, 8, 4.0);
        let d = uniqueness_proxy(&cfg, &cfg, 9, 3).unwrap();
        assert_eq!(d.distance, 0.0);
    }

    #[test]
    fn proxy_is_symmetric() {
        let a = config(FluxModel::linear_irregular(), 256, 8, 4.0);
        let b = config(FluxModel::linear_irregular(), 256, 8, 8.0);
        let ab = uniqueness_proxy(&a, &b, 2, 3).unwrap();
        let ba = uniqueness_proxy(&b, &a, 2, 3).unwrap();
        assert_eq!(ab.distance, ba.distance);
        assert!(ab.distance > 0.0);
    }

    #[test]
    fn proxy_rejects_non_nested_time_grids() {
        let a = config(FluxModel::zero(), 256, 8, 4.0);
        let b = config(FluxModel::zero(), 256, 12, 4.0);
        assert!(matches!(uniqueness_proxy(&a, &b, 0, 2), Err(Error::NonNested(_))));
    }

    #[test]
    fn zero_flux_bounds_are_exact() {
        let cfg = config(FluxModel::zero(), 512, 16, 4.0);
        let ens =
            crate::solver::solve_ensemble(&cfg, crate::solver::Scheme::Picard, 5, 4, |s| Ok(s.summarize())).unwrap();
        let r = track_bounds(&ens).unwrap();
        assert!(r.max_mass_drift <= 1e-12);
        assert_eq!(r.moment_max.as_ref().unwrap(), &vec![1.0, 1.0]);
        assert!(r.l2_violations.is_empty());
        assert!(r.positivity_held() && r.jacobian_positive());
    }

    #[test]
    fn report_flags_failed_gating_entries() {
        let mut r = DiagnosticsReport::new();
        r.insert("a", mirrors::MASS, true, Some(true), &1.0).unwrap();
        r.insert("b", mirrors::SHOCKS, false, Some(false), &2.0).unwrap();
        assert!(r.hard_invariants_held());
        r.insert("c", mirrors::POSITIVITY, true, Some(false), &-1.0).unwrap();
        assert!(!r.hard_invariants_held());
        assert!(r.insert("d", mirrors::MASS, false, None, &f64::NAN).is_err());
    }
}
