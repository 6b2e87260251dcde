//! Benchmark fixtures; the benchmarks themselves live in `benches/`.

use sncl_core::{BumpKernel, FluxModel, Grid, InitialData, Response, SolverConfig, Spatial, TimeGrid};

/// Desk-scale nonlocal problem: 2048 cells, 64 steps.
pub fn nonlocal_config() -> SolverConfig {
    let grid = Grid::new(-8.0, 8.0, 2048).expect("valid grid");
    SolverConfig {
        grid,
        time_grid: TimeGrid::uniform(0.5, 64).expect("valid time grid"),
        kernel: BumpKernel::new(0.0, 0.5).expect("valid kernel"),
        flux: FluxModel::new(
            "smooth_nonlocal",
            Spatial::Bump {
                amplitude: 2.0,
                center: 0.0,
                radius: 1.5,
            },
            Response::Lorentzian,
        ),
        initial: InitialData::Bump {
            center: 0.0,
            radius: 1.5,
            mass: 1.0,
        },
        eps_u: 4.0 * grid.dx(),
        eps_f: 8.0 * grid.dx(),
        picard_tol: 1e-10,
        picard_max_iters: 50,
        output_indices: vec![0, 32, 64],
    }
}
