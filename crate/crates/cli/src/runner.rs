//! Orchestration: ensembles, diagnostics and refinement ladders, written
//! through [`ArtifactWriter`].

use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use sncl_core::diagnostics::{
    commutator_norm, commutator_study, convergence_study, gradient_growth, mirrors, stability_ratio, track_bounds,
    uniqueness_study, DiagnosticsReport, LadderQuantity, TranslationReference,
};
use sncl_core::flux::Resolution;
use sncl_core::{
    jacobian_inverse_moment, run_box, sample_path, solve_ensemble, solve_picard, verify_hypothesis, weak_residual,
    BumpKernel, Field, FluxModel, Grid, PathSummary, SolverConfig, TimeGrid,
};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, LadderSpec};
use crate::output::{ArtifactWriter, OutputManifest, RunStatus};

/// Relative mass drift allowed before a run counts as an invariant
/// violation.
pub const MASS_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Ensemble snapshots and the hard invariants.
    Solve,
    /// `Solve` plus the optional diagnostics of the configuration.
    Diagnose,
    /// The configured refinement ladders, written under `ladder/`.
    Ladder,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::Diagnose => "diagnose",
            Mode::Ladder => "ladder",
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration:\n{0}")]
    Config(#[from] ConfigError),
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
    #[error("numerical failure: {0}")]
    Numerical(#[from] sncl_core::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Io(_) | RunError::Numerical(_) => 3,
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub manifest: OutputManifest,
    pub report: DiagnosticsReport,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        match self.manifest.status {
            RunStatus::Ok => 0,
            RunStatus::InvariantViolation => 1,
            RunStatus::Failed => 3,
        }
    }
}

/// Validates `cfg`, runs `mode` and writes its artifacts. A numerical
/// failure still leaves a manifest (status `failed`) listing what was
/// written before it.
pub fn run_experiment(cfg: &ExperimentConfig, mode: Mode) -> Result<RunOutcome, RunError> {
    let violations = cfg.violations();
    if !violations.is_empty() {
        return Err(ConfigError(violations).into());
    }
    let sc = cfg.solver_config()?;
    let mut dir = PathBuf::from(&cfg.run.output_dir);
    if mode == Mode::Ladder {
        dir.push("ladder");
    }
    let mut writer = ArtifactWriter::new(&dir)?;
    let echo = serde_json::to_value(cfg).expect("configuration is plain JSON");
    let result = match mode {
        Mode::Solve | Mode::Diagnose => ensemble_report(cfg, &sc, mode, &mut writer),
        Mode::Ladder => ladder_report(cfg, &sc),
    };
    match result {
        Ok(report) => {
            let name = if mode == Mode::Ladder {
                "ladders.json"
            } else {
                "diagnostics.json"
            };
            writer.write_json(name, "diagnostics", &(report.to_json() + "\n"))?;
            let status = if report.hard_invariants_held() {
                RunStatus::Ok
            } else {
                RunStatus::InvariantViolation
            };
            let manifest = writer.finish(&cfg.name, mode.as_str(), status, None, echo)?;
            Ok(RunOutcome {
                out_dir: dir,
                manifest,
                report,
            })
        }
        Err(e) => {
            writer.finish(&cfg.name, mode.as_str(), RunStatus::Failed, Some(e.to_string()), echo)?;
            Err(match e {
                Failure::Numerical(e) => RunError::Numerical(e),
                Failure::Io(e) => RunError::Io(e),
            })
        }
    }
}

#[derive(Debug, Error)]
enum Failure {
    #[error("{0}")]
    Numerical(#[from] sncl_core::Error),
    #[error("{0}")]
    Io(#[from] io::Error),
}

struct PathRecord {
    summary: PathSummary,
    residual: Option<sncl_core::WeakResidual>,
    commutator: Option<f64>,
    translation: Option<f64>,
    growth: Option<f64>,
}

fn mean_field(fields: &[&Field]) -> Field {
    let n = fields.len() as f64;
    let first = fields[0];
    let mut acc = vec![0.0; first.values().len()];
    for f in fields {
        for (a, v) in acc.iter_mut().zip(f.values()) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n);
    Field::new(*first.grid(), acc, first.time()).expect("mean of finite fields is finite")
}

fn rms(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    (s / n.max(1) as f64).sqrt()
}

fn ensemble_report(
    cfg: &ExperimentConfig,
    sc: &SolverConfig,
    mode: Mode,
    writer: &mut ArtifactWriter,
) -> Result<DiagnosticsReport, Failure> {
    let extra = mode == Mode::Diagnose;
    let d = cfg.diagnostics;
    let gating = !sc.flux.demo_only;
    let flux = sc.regularized_flux()?;
    let phi = BumpKernel::new(d.phi_center, d.phi_radius)?;
    let translation = if extra && d.translation {
        Some(TranslationReference::new(sc)?)
    } else {
        None
    };
    let records = solve_ensemble(sc, cfg.run.scheme, cfg.run.master_seed, cfg.run.n_paths, |sol| {
        Ok(PathRecord {
            residual: if extra && d.weak_residual {
                Some(weak_residual(&sol, &phi, &flux, &sc.kernel)?)
            } else {
                None
            },
            commutator: if extra && d.commutator {
                Some(commutator_norm(
                    &sol.snapshots,
                    sol.path.time_grid(),
                    &sc.flux,
                    &sc.kernel,
                    sc.eps_f,
                )?)
            } else {
                None
            },
            translation: translation.as_ref().map(|t| t.error(&sol)),
            growth: if extra && d.shock_growth {
                let outs: Vec<Field> = sol.output_indices.iter().map(|&k| sol.snapshots[k].clone()).collect();
                Some(gradient_growth(&outs))
            } else {
                None
            },
            summary: sol.summarize(),
        })
    })?;
    let summaries: Vec<PathSummary> = records.iter().map(|r| r.summary.clone()).collect();

    for (j, t) in summaries[0].output_times.iter().enumerate() {
        let fields: Vec<&Field> = summaries.iter().map(|s| &s.snapshots[j]).collect();
        let mean = mean_field(&fields).with_time(*t);
        writer.write_field(&format!("snapshots/mean_{j:03}.csv"), "ensemble_mean", &mean)?;
        writer.write_field(&format!("snapshots/path0_{j:03}.csv"), "exemplar_path", fields[0])?;
    }

    let bounds = track_bounds(&summaries)?;
    let mut r = DiagnosticsReport::new();
    r.insert(
        "mass_drift",
        mirrors::MASS,
        gating,
        Some(bounds.max_mass_drift <= MASS_TOLERANCE),
        &json!({ "max_relative": bounds.max_mass_drift, "tolerance": MASS_TOLERANCE }),
    )?;
    r.insert(
        "positivity",
        mirrors::POSITIVITY,
        gating,
        Some(bounds.positivity_held()),
        &json!({ "min_value": bounds.min_value }),
    )?;
    r.insert(
        "jacobian_positivity",
        mirrors::JACOBIAN,
        gating,
        Some(bounds.jacobian_positive()),
        &json!({ "min_jacobian": bounds.min_jacobian }),
    )?;
    r.insert(
        "boundary_excursions",
        mirrors::EXCURSIONS,
        false,
        Some(bounds.boundary_excursions.count() == 0),
        &bounds.boundary_excursions.count(),
    )?;
    let first = &summaries[0];
    r.insert(
        "picard",
        mirrors::PICARD,
        false,
        Some(bounds.all_converged),
        &json!({
            "scheme": cfg.run.scheme,
            "all_converged": bounds.all_converged,
            "max_iterations": bounds.max_iterations,
            "path0_distances": first.distances,
        }),
    )?;
    if let (Some(bound), Some(moment)) = (&bounds.l2_bound, &bounds.moment_max) {
        r.insert(
            "l2_bound",
            mirrors::L2_BOUND,
            false,
            Some(bounds.l2_violations.is_empty()),
            &json!({
                "times": bounds.times,
                "mean_l2_squared": bounds.l2_mean,
                "std_error": bounds.l2_std_error,
                "bound": bound,
                "initial_l2_squared": bounds.initial_l2_squared,
                "violations": bounds.l2_violations,
            }),
        )?;
        r.insert(
            "inverse_jacobian_moment",
            mirrors::MOMENT,
            false,
            None,
            &json!({ "times": bounds.times, "max_over_nodes": moment }),
        )?;
    }

    if extra && d.hypothesis {
        let mass = sc.regularized_initial()?.norms().l1;
        let report = verify_hypothesis(
            &sc.flux,
            &run_box(sc.time_grid.horizon(), &sc.grid, &sc.kernel, mass),
            Resolution::default(),
        )?;
        r.insert(
            "hypothesis_norms",
            mirrors::HYPOTHESIS,
            false,
            Some(report.all_finite()),
            &report,
        )?;
    }
    if extra && d.weak_residual {
        let n_out = first.output_times.len();
        let per_time: Vec<f64> = (0..n_out)
            .map(|j| rms(records.iter().map(|r| r.residual.as_ref().expect("computed").values[j])))
            .collect();
        r.insert(
            "weak_residual",
            mirrors::WEAK_FORM,
            false,
            None,
            &json!({
                "phi_center": d.phi_center,
                "phi_radius": d.phi_radius,
                "times": first.output_times,
                "rms_over_paths": per_time,
                "rms_of_max_abs": rms(records.iter().map(|r| r.residual.as_ref().expect("computed").max_abs())),
            }),
        )?;
    }
    if extra && d.commutator {
        r.insert(
            "commutator",
            mirrors::COMMUTATOR,
            false,
            None,
            &json!({
                "epsilon": sc.eps_f,
                "rms_over_paths": rms(records.iter().map(|r| r.commutator.expect("computed"))),
            }),
        )?;
    }
    if translation.is_some() {
        let errs: Vec<f64> = records.iter().map(|r| r.translation.expect("computed")).collect();
        r.insert(
            "translation_error",
            mirrors::TRANSLATION,
            false,
            None,
            &json!({
                "max_over_paths": errs.iter().copied().fold(0.0, f64::max),
                "mean": errs.iter().sum::<f64>() / errs.len() as f64,
            }),
        )?;
    }
    if extra && d.shock_growth {
        let g: Vec<f64> = records.iter().map(|r| r.growth.expect("computed")).collect();
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        r.insert(
            "shock_growth",
            mirrors::SHOCKS,
            false,
            Some(mean >= 5.0),
            &json!({
                "mean_growth": mean,
                "min_growth": g.iter().copied().fold(f64::INFINITY, f64::min),
                "max_growth": g.iter().copied().fold(0.0, f64::max),
                "threshold": 5.0,
            }),
        )?;
    }
    Ok(r)
}

/// The experiment with a different grid, step count and absolute widths.
fn level(
    sc: &SolverConfig,
    n_outputs: usize,
    n_cells: usize,
    n_steps: usize,
    eps_u: f64,
    eps_f: f64,
) -> Result<SolverConfig, sncl_core::Error> {
    let mut c = sc.clone();
    c.grid = Grid::new(sc.grid.x_min(), sc.grid.x_max(), n_cells)?;
    c.time_grid = TimeGrid::uniform(sc.time_grid.horizon(), n_steps)?;
    c.eps_u = eps_u;
    c.eps_f = eps_f;
    c.output_indices = (0..=n_outputs).map(|k| k * n_steps / n_outputs).collect();
    Ok(c)
}

fn within(orders: &[f64], target: f64, tol: f64) -> bool {
    !orders.is_empty() && orders.iter().all(|o| (o - target).abs() <= tol)
}

/// Result of one configured ladder.
#[derive(Debug, Clone, Serialize)]
pub struct LadderOutcome {
    pub kind: &'static str,
    pub passed: bool,
    pub criterion: &'static str,
    pub study: serde_json::Value,
}

pub fn run_ladder(
    cfg: &ExperimentConfig,
    sc: &SolverConfig,
    spec: &LadderSpec,
) -> Result<LadderOutcome, sncl_core::Error> {
    let dx = sc.grid.dx();
    let n_out = cfg.time.n_outputs;
    let seed = cfg.run.master_seed;
    let outcome = match spec {
        LadderSpec::Uniqueness {
            eps_f_cells,
            parabolic_factor,
            n_paths,
        } => {
            let t = sc.time_grid.horizon();
            let make = |cells: f64| {
                let eps = cells * dx;
                let steps = (t / (parabolic_factor * eps * eps)).log2().ceil().exp2().max(1.0) as usize;
                level(sc, n_out.min(steps), sc.grid.n_cells(), steps, sc.eps_u, eps)
            };
            let pairs = eps_f_cells
                .windows(2)
                .map(|w| Ok((format!("{}dx vs {}dx", w[0], w[1]), make(w[0])?, make(w[1])?)))
                .collect::<Result<Vec<_>, sncl_core::Error>>()?;
            let study = uniqueness_study(&pairs, seed, *n_paths)?;
            LadderOutcome {
                kind: "uniqueness",
                passed: study.strictly_decreasing,
                criterion: "inter-sequence L1 distance strictly decreasing",
                study: serde_json::to_value(&study).expect("plain data"),
            }
        }
        LadderSpec::MarchingGap { n_steps, n_paths } => {
            let ladder = n_steps
                .iter()
                .map(|&n| level(sc, n_out.min(n), sc.grid.n_cells(), n, sc.eps_u, sc.eps_f))
                .collect::<Result<Vec<_>, _>>()?;
            let study = convergence_study(&ladder, LadderQuantity::MarchingGap, seed, *n_paths)?;
            LadderOutcome {
                kind: "marching_gap",
                passed: within(&study.orders, 1.0, 0.3),
                criterion: "order in dt of the Picard-marching gap within 1 +- 0.3",
                study: serde_json::to_value(&study).expect("plain data"),
            }
        }
        LadderSpec::WeakResidual {
            n_cells,
            n_steps,
            n_paths,
        } => {
            let coarse_dx = (sc.grid.x_max() - sc.grid.x_min()) / n_cells[0] as f64;
            let (eu, ef) = (
                cfg.regularization.eps_u_cells * coarse_dx,
                cfg.regularization.eps_f_cells * coarse_dx,
            );
            let ladder = n_cells
                .iter()
                .zip(n_steps)
                .map(|(&nc, &ns)| level(sc, n_out.min(ns), nc, ns, eu, ef))
                .collect::<Result<Vec<_>, _>>()?;
            let q = LadderQuantity::WeakResidual {
                center: cfg.diagnostics.phi_center,
                radius: cfg.diagnostics.phi_radius,
            };
            let study = convergence_study(&ladder, q, seed, *n_paths)?;
            let h = study.headline();
            LadderOutcome {
                kind: "weak_residual",
                passed: h.windows(2).all(|w| w[1] < w[0]),
                criterion: "residual rms strictly decreasing under joint (dt, dx) halving",
                study: serde_json::to_value(&study).expect("plain data"),
            }
        }
        LadderSpec::Translation { n_cells, n_paths } => {
            let coarse_dx = (sc.grid.x_max() - sc.grid.x_min()) / n_cells[0] as f64;
            let (eu, ef) = (
                cfg.regularization.eps_u_cells * coarse_dx,
                cfg.regularization.eps_f_cells * coarse_dx,
            );
            let ladder = n_cells
                .iter()
                .map(|&nc| level(sc, n_out, nc, sc.time_grid.n_steps(), eu, ef))
                .collect::<Result<Vec<_>, _>>()?;
            let study = convergence_study(&ladder, LadderQuantity::TranslationError, seed, *n_paths)?;
            LadderOutcome {
                kind: "translation",
                passed: !study.orders.is_empty() && study.orders.iter().all(|&o| o >= 1.7),
                criterion: "order in dx of the translation error at least 1.7",
                study: serde_json::to_value(&study).expect("plain data"),
            }
        }
        LadderSpec::Moment { eps_f_cells, n_paths } => {
            let mut maxima = Vec::with_capacity(eps_f_cells.len());
            let mut std_errors = Vec::with_capacity(eps_f_cells.len());
            for &cells in eps_f_cells {
                let mut c = sc.clone();
                c.eps_f = cells * dx;
                let (m, se) = final_moment_max(&c, seed, *n_paths)?;
                maxima.push(m);
                std_errors.push(se);
            }
            let mut control = sc.clone();
            control.flux = FluxModel::zero();
            let (cm, cse) = final_moment_max(&control, seed, *n_paths)?;
            let ratio = stability_ratio(&maxima);
            LadderOutcome {
                kind: "moment",
                passed: ratio < 2.0 && (cm - 1.0).abs() <= 2.0 * cse,
                criterion: "max-node moment at T varies by a factor < 2; zero-drift control is 1 +- 2 SE",
                study: json!({
                    "eps_f": eps_f_cells.iter().map(|c| c * dx).collect::<Vec<_>>(),
                    "max_over_nodes": maxima,
                    "std_error": std_errors,
                    "ratio": ratio,
                    "zero_drift_control": { "max_over_nodes": cm, "std_error": cse },
                    "n_paths": n_paths,
                }),
            }
        }
        LadderSpec::Commutator {
            eps_cells,
            control,
            n_paths,
        } => {
            let mut transport = sc.clone();
            transport.flux = FluxModel::zero();
            let sols = (0..*n_paths as u64)
                .map(|i| solve_picard(&transport, &sample_path(seed, i, &transport.time_grid)))
                .collect::<Result<Vec<_>, _>>()?;
            let eps: Vec<f64> = eps_cells.iter().map(|c| c * dx).collect();
            let main = commutator_study(&sols, &sc.flux, &sc.kernel, &eps)?;
            let control_flux = crate::config::FluxSpec::named(control)
                .build()
                .map_err(|e| sncl_core::Error::Mismatch(e.join("; ")))?;
            let ctrl = commutator_study(&sols, &control_flux, &sc.kernel, &eps)?;
            LadderOutcome {
                kind: "commutator",
                passed: main.strictly_decreasing && within(&ctrl.orders, 2.0, 0.5),
                criterion: "commutator strictly decreasing; smooth control decays at order 2 +- 0.5",
                study: json!({ "flux": main, "control": ctrl, "n_paths": n_paths }),
            }
        }
    };
    Ok(outcome)
}

/// Largest node value of `Ê[1/∂ₓX_{0,T}]` and its standard error.
pub fn final_moment_max(sc: &SolverConfig, seed: u64, n_paths: usize) -> Result<(f64, f64), sncl_core::Error> {
    let mut c = sc.clone();
    c.output_indices = vec![c.time_grid.n_steps()];
    let maps = solve_ensemble(&c, sncl_core::Scheme::Picard, seed, n_paths, |s| {
        Ok(s.flows.into_iter().next().expect("one output flow"))
    })?;
    let refs: Vec<_> = maps.iter().collect();
    Ok(jacobian_inverse_moment(&refs)?.max())
}

fn ladder_report(cfg: &ExperimentConfig, sc: &SolverConfig) -> Result<DiagnosticsReport, Failure> {
    let mut r = DiagnosticsReport::new();
    for (i, spec) in cfg.ladder.iter().enumerate() {
        let outcome = run_ladder(cfg, sc, spec)?;
        let mirrors = match spec {
            LadderSpec::Uniqueness { .. } => mirrors::UNIQUENESS,
            LadderSpec::MarchingGap { .. } => mirrors::CONSISTENCY,
            LadderSpec::WeakResidual { .. } => mirrors::WEAK_FORM,
            LadderSpec::Translation { .. } => mirrors::TRANSLATION,
            LadderSpec::Moment { .. } => mirrors::MOMENT,
            LadderSpec::Commutator { .. } => mirrors::COMMUTATOR,
        };
        let name = format!("ladder_{:02}_{}", i + 1, outcome.kind);
        r.insert(&name, mirrors, false, Some(outcome.passed), &outcome)?;
    }
    Ok(r)
}

/// Resolves a command-line config argument: a file path, or the name of a
/// preset when no such file exists.
pub fn load_config(arg: &str) -> Result<ExperimentConfig, RunError> {
    let path = Path::new(arg);
    if path.exists() {
        let text = std::fs::read_to_string(path)?;
        Ok(crate::config::parse_config(&text)?)
    } else if let Some(p) = crate::presets::get(arg) {
        Ok(p.config)
    } else {
        Err(ConfigError(vec![format!("{arg}: no such file or preset")]).into())
    }
}
