//! Simulation and verification toolkit for the one-dimensional stochastic
//! nonlocal conservation law
//!
//! ```text
//! ∂ₜu + ∂ₓ((F(t, x, K∗u) + Ḃₜ)·u) = 0,   u(0) = u₀,
//! ```
//!
//! built on a mollified Picard scheme: each sweep freezes the nonlocal field
//! `K∗u` from the previous iterate, integrates stochastic characteristics
//! and pushes the regularized datum forward through the inverse flow.
//!
//! Modules follow the pipeline: [`fields`] (grids, kernels, quadrature),
//! [`flux`] (flux models and their regularization), [`flow`] (Brownian
//! paths and characteristics), [`solver`] (Picard and marching schemes,
//! weak-form residual) and [`diagnostics`] (executable versions of the
//! a priori estimates).

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
mod error;
pub mod fields;
pub mod flow;
pub mod flux;
pub mod solver;

pub use error::{Error, Result};
pub use fields::{convolve, BoundaryExcursions, BumpKernel, Field, Grid, Kernel, Mollifier, Norms};
pub use flow::{
    backward_flow, forward_flow, jacobian_inverse_moment, sample_path, BrownianPath, FlowMap, InverseFlow, MomentField,
    TimeGrid,
};
pub use flux::{
    builtin_models, regularize, run_box, verify_hypothesis, FluxModel, HypothesisBox, HypothesisReport,
    RegularizedFlux, Resolution, Response, Spatial, Temporal,
};
pub use solver::{
    smooth_step, solve_ensemble, solve_marching, solve_path, solve_picard, weak_residual, InitialData, PathSolution,
    PathSummary, Scheme, SolverConfig, WeakResidual,
};
