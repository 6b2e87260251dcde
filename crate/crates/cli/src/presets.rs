//! Built-in experiments at desk scale.

use serde::Serialize;
use sncl_core::{InitialData, Scheme};

use crate::config::{
    DiagnosticsSpec, ExperimentConfig, FluxSpec, GridSpec, KernelSpec, LadderSpec, RegularizationSpec, RunSpec,
    TimeSpec,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Preset {
    pub name: String,
    pub description: String,
    /// Violates the flux hypotheses; results are illustrations, never gates.
    pub demo_only: bool,
    pub config: ExperimentConfig,
}

fn base(name: &str, description: &str, flux: FluxSpec) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        preset: Some(name.to_string()),
        description: description.to_string(),
        flux,
        kernel: KernelSpec {
            center: 0.0,
            radius: 0.5,
        },
        grid: GridSpec {
            x_min: -8.0,
            x_max: 8.0,
            n_cells: 2048,
        },
        time: TimeSpec {
            horizon: 0.5,
            n_steps: 64,
            n_outputs: 4,
        },
        initial: InitialData::Bump {
            center: 0.0,
            radius: 1.5,
            mass: 1.0,
        },
        regularization: RegularizationSpec {
            eps_u_cells: 4.0,
            eps_f_cells: 8.0,
        },
        run: RunSpec {
            n_paths: 64,
            master_seed: 1,
            scheme: Scheme::Picard,
            picard_tol: 1e-10,
            picard_max_iters: 50,
            output_dir: format!("out/{name}"),
        },
        diagnostics: DiagnosticsSpec {
            hypothesis: true,
            weak_residual: true,
            phi_center: 0.5,
            phi_radius: 1.0,
            commutator: false,
            translation: false,
            shock_growth: false,
        },
        ladder: Vec::new(),
    }
}

fn zero_flux() -> ExperimentConfig {
    let mut c = base(
        "zero_flux",
        "F = 0: the solution is the regularized datum translated by the Brownian path",
        FluxSpec::named("zero_flux"),
    );
    c.time.horizon = 1.0;
    c.time.n_steps = 1024;
    c.diagnostics.translation = true;
    c.ladder = vec![
        LadderSpec::Translation {
            n_cells: vec![512, 1024, 2048],
            n_paths: 64,
        },
        LadderSpec::WeakResidual {
            n_cells: vec![512, 1024, 2048],
            n_steps: vec![128, 256, 512],
            n_paths: 64,
        },
    ];
    c
}

fn constant_drift() -> ExperimentConfig {
    let mut c = base(
        "constant_drift",
        "F = 0.5: translation by 0.5 t plus the Brownian path",
        FluxSpec::named("constant_drift").with("value", 0.5),
    );
    c.time.horizon = 1.0;
    c.time.n_steps = 256;
    c.diagnostics.translation = true;
    c.ladder = vec![LadderSpec::Translation {
        n_cells: vec![512, 1024, 2048],
        n_paths: 64,
    }];
    c
}

fn linear_fgp2() -> ExperimentConfig {
    let mut c = base(
        "linear_fgp2",
        "linear transport F = b(x) with b a smoothed step cut off discontinuously at |x| = 1.5",
        FluxSpec::named("linear_irregular"),
    );
    c.time.n_steps = 128;
    c.regularization.eps_f_cells = 16.0;
    c.diagnostics.commutator = true;
    c.ladder = vec![
        LadderSpec::Uniqueness {
            eps_f_cells: vec![64.0, 32.0, 16.0, 8.0],
            parabolic_factor: 0.25,
            n_paths: 64,
        },
        LadderSpec::Commutator {
            eps_cells: vec![32.0, 16.0, 8.0],
            control: "smooth_nonlocal".to_string(),
            n_paths: 8,
        },
    ];
    c
}

fn smooth_nonlocal() -> ExperimentConfig {
    let mut c = base(
        "smooth_nonlocal",
        "F = b(x)/(1 + z^2) with b twice the unit-mass bump of radius 1.5 and z = K*u",
        FluxSpec::named("smooth_nonlocal")
            .with("amplitude", 2.0)
            .with("radius", 1.5),
    );
    c.run.n_paths = 256;
    c.run.master_seed = 7;
    c.ladder = vec![
        LadderSpec::Moment {
            eps_f_cells: vec![8.0, 16.0, 32.0],
            n_paths: 256,
        },
        LadderSpec::MarchingGap {
            n_steps: vec![32, 64, 128],
            n_paths: 16,
        },
        LadderSpec::WeakResidual {
            n_cells: vec![512, 1024, 2048],
            n_steps: vec![64, 128, 256],
            n_paths: 64,
        },
    ];
    c
}

fn discontinuous_flux() -> ExperimentConfig {
    let mut c = base(
        "discontinuous_flux",
        "F = 1_[-1,1](x)/(1 + z^2): nonlocal flux with spatial jumps",
        FluxSpec::named("discontinuous_flux"),
    );
    c.regularization.eps_f_cells = 16.0;
    c.ladder = vec![LadderSpec::Uniqueness {
        eps_f_cells: vec![64.0, 32.0, 16.0],
        parabolic_factor: 0.25,
        n_paths: 32,
    }];
    c
}

fn burgers_shock_demo() -> ExperimentConfig {
    let mut c = base(
        "burgers_shock_demo",
        "F = K*u with a narrow kernel: Burgers-like steepening of a compressive front (demo only)",
        FluxSpec::named("burgers_like"),
    );
    c.kernel.radius = 0.1;
    c.initial = InitialData::Plateau {
        left: -2.0,
        right: 0.0,
        ramp: 0.5,
        height: 1.0,
    };
    c.time.horizon = 1.0;
    c.time.n_steps = 1024;
    c.time.n_outputs = 16;
    c.regularization.eps_f_cells = 4.0;
    c.run.scheme = Scheme::Marching;
    c.run.picard_tol = 1e-8;
    c.diagnostics.weak_residual = false;
    c.diagnostics.shock_growth = true;
    c
}

pub fn presets() -> Vec<Preset> {
    [
        zero_flux(),
        constant_drift(),
        linear_fgp2(),
        smooth_nonlocal(),
        discontinuous_flux(),
        burgers_shock_demo(),
    ]
    .into_iter()
    .map(|config| Preset {
        name: config.name.clone(),
        description: config.description.clone(),
        demo_only: config.demo_only(),
        config,
    })
    .collect()
}

pub fn get(name: &str) -> Option<Preset> {
    presets().into_iter().find(|p| p.name == name)
}
