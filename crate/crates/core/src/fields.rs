//! Uniform 1-D grids, node-sampled fields and the smooth compactly supported
//! kernels that act on them.
//!
//! Everything here is immutable after construction. Quadrature is the
//! composite trapezoid rule throughout; fields are treated as zero outside
//! their grid.

use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};

/// Unnormalized bump profile `exp(-1/(1-s^2))` on `(-1, 1)`, zero elsewhere.
pub fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

/// First derivative of [`bump`].
pub fn bump_d1(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - s * s;
    bump(s) * (-2.0 * s / (q * q))
}

/// Second derivative of [`bump`].
pub fn bump_d2(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - s * s;
    let h1 = -2.0 * s / (q * q);
    let h2 = -(2.0 + 6.0 * s * s) / (q * q * q);
    bump(s) * (h1 * h1 + h2)
}

/// `∫ bump(s) ds` over `(-1, 1)`.
///
/// The integrand is C^∞ with all derivatives vanishing at ±1, so a fine
/// trapezoid sum is accurate to rounding.
pub fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| {
        let n = 1 << 14;
        let h = 2.0 / n as f64;
        (1..n).map(|i| bump(-1.0 + i as f64 * h)).sum::<f64>() * h
    })
}

/// `sup |bump'(s)|`.
pub fn bump_max_slope() -> f64 {
    static SLOPE: OnceLock<f64> = OnceLock::new();
    *SLOPE.get_or_init(|| {
        let n = 1 << 14;
        (0..=n)
            .map(|i| bump_d1(-1.0 + 2.0 * i as f64 / n as f64).abs())
            .fold(0.0, f64::max)
    })
}

/// Uniform grid on `[x_min, x_max]` with `n_cells + 1` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n_cells: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(Error::InvalidGrid(format!(
                "bounds [{x_min}, {x_max}] must be finite with x_min < x_max"
            )));
        }
        if n_cells < 2 {
            return Err(Error::InvalidGrid(format!("n_cells = {n_cells}, need at least 2")));
        }
        Ok(Self { x_min, x_max, n_cells })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_cells as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_cells {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes()).map(move |i| self.node(i))
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Cell index `i` and fraction `θ ∈ [0, 1]` with `x = x_i + θ dx`.
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        if !self.contains(x) {
            return None;
        }
        let s = (x - self.x_min) / self.dx();
        let i = (s.floor() as usize).min(self.n_cells - 1);
        Some((i, (s - i as f64).clamp(0.0, 1.0)))
    }

    /// Same bounds, `factor` times as many cells.
    pub fn refine(&self, factor: usize) -> Self {
        Self {
            n_cells: self.n_cells * factor.max(1),
            ..*self
        }
    }

    /// Extends the grid by `cells` cells on each side, keeping node alignment.
    pub fn padded(&self, cells: usize) -> Self {
        let pad = cells as f64 * self.dx();
        Self {
            x_min: self.x_min - pad,
            x_max: self.x_max + pad,
            n_cells: self.n_cells + 2 * cells,
        }
    }
}

/// Counts evaluations that fell outside the grid.
///
/// The whole-line problem is truncated to a finite grid; any nonzero count
/// means compactly supported data reached the truncation boundary.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundaryExcursions(usize);

impl BoundaryExcursions {
    pub fn record(&mut self) {
        self.0 += 1;
    }

    pub fn count(&self) -> usize {
        self.0
    }

    pub fn merge(&mut self, other: BoundaryExcursions) {
        self.0 += other.0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

pub(crate) fn trapezoid(values: &[f64], dx: f64) -> f64 {
    match values {
        [] | [_] => 0.0,
        [first, .., last] => (values.iter().sum::<f64>() - 0.5 * (first + last)) * dx,
    }
}

/// A function of space sampled at the nodes of a [`Grid`] at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
    time: f64,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::LengthMismatch {
                expected: grid.n_nodes(),
                got: values.len(),
            });
        }
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                location: format!("node {i} (x = {})", grid.node(i)),
                value: v,
            });
        }
        Ok(Self { grid, values, time })
    }

    pub fn zeros(grid: Grid, time: f64) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n_nodes()],
            time,
        }
    }

    pub fn from_fn(grid: Grid, time: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect(), time)
    }

    /// Skips the finiteness scan; callers guarantee finite values.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>, time: f64) -> Self {
        debug_assert_eq!(values.len(), grid.n_nodes());
        Self { grid, values, time }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Piecewise-linear interpolation. Points outside the grid read as zero
    /// and are recorded in `excursions`.
    pub fn interpolate(&self, x: f64, excursions: &mut BoundaryExcursions) -> f64 {
        match self.try_interpolate(x) {
            Some(v) => v,
            None => {
                excursions.record();
                0.0
            }
        }
    }

    pub fn try_interpolate(&self, x: f64) -> Option<f64> {
        let (i, theta) = self.grid.locate(x)?;
        Some((1.0 - theta) * self.values[i] + theta * self.values[i + 1])
    }

    /// Interpolation that treats the exterior as zero without bookkeeping.
    pub(crate) fn value_or_zero(&self, x: f64) -> f64 {
        self.try_interpolate(x).unwrap_or(0.0)
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.grid.dx())
    }

    pub fn norms(&self) -> Norms {
        let dx = self.grid.dx();
        let abs: Vec<f64> = self.values.iter().map(|v| v.abs()).collect();
        let sq: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        Norms {
            l1: trapezoid(&abs, dx),
            l2: trapezoid(&sq, dx).sqrt(),
            linf: abs.iter().copied().fold(0.0, f64::max),
        }
    }

    /// `V(x) = ∫_{x_min}^x f` by cumulative trapezoid; `V(x_min) = 0`.
    pub fn primitive(&self) -> Field {
        let half_dx = 0.5 * self.grid.dx();
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.values.len());
        out.push(0.0);
        for w in self.values.windows(2) {
            acc += (w[0] + w[1]) * half_dx;
            out.push(acc);
        }
        Field::from_raw(self.grid, out, self.time)
    }

    /// Central differences at interior nodes, one-sided at the two ends.
    pub fn central_slopes(&self) -> Vec<f64> {
        let n = self.values.len();
        let dx = self.grid.dx();
        let v = &self.values;
        (0..n)
            .map(|i| match i {
                0 => (v[1] - v[0]) / dx,
                i if i == n - 1 => (v[n - 1] - v[n - 2]) / dx,
                i => (v[i + 1] - v[i - 1]) / (2.0 * dx),
            })
            .collect()
    }

    /// First and last node index carrying a nonzero value.
    pub fn support(&self) -> Option<(usize, usize)> {
        let first = self.values.iter().position(|&v| v != 0.0)?;
        let last = self.values.iter().rposition(|&v| v != 0.0)?;
        Some((first, last))
    }

    /// `∫|f - g|`. Fields on different grids are compared on the finer one.
    pub fn l1_distance(&self, other: &Field) -> f64 {
        if self.grid == other.grid {
            let diff: Vec<f64> = self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a - b).abs())
                .collect();
            return trapezoid(&diff, self.grid.dx());
        }
        let fine = if self.grid.n_cells >= other.grid.n_cells {
            self.grid
        } else {
            other.grid
        };
        let diff: Vec<f64> = fine
            .nodes()
            .map(|x| (self.value_or_zero(x) - other.value_or_zero(x)).abs())
            .collect();
        trapezoid(&diff, fine.dx())
    }

    /// Node-wise `a·self + b·other` on a shared grid.
    pub fn combine(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        if self.grid != other.grid {
            return Err(Error::Mismatch("fields live on different grids".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Field::new(self.grid, values, self.time)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// A smooth, nonnegative, compactly supported function of unit mass.
pub trait Kernel {
    fn eval(&self, x: f64) -> f64;
    fn center(&self) -> f64;
    fn radius(&self) -> f64;
    fn label(&self) -> &'static str;
}

/// Normalized bump `K(x) = bump((x - c)/r) / (r · ∫bump)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BumpKernel {
    center: f64,
    radius: f64,
    normalization: f64,
}

impl BumpKernel {
    pub fn new(center: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite() && center.is_finite()) {
            return Err(Error::Mismatch(format!(
                "bump kernel needs finite center and radius > 0, got ({center}, {radius})"
            )));
        }
        Ok(Self {
            center,
            radius,
            normalization: 1.0 / (radius * bump_mass()),
        })
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.normalization * bump_d1((x - self.center) / self.radius) / self.radius
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        self.normalization * bump_d2((x - self.center) / self.radius) / (self.radius * self.radius)
    }

    pub fn max_value(&self) -> f64 {
        self.normalization * bump(0.0)
    }

    pub fn max_slope(&self) -> f64 {
        self.normalization * bump_max_slope() / self.radius
    }
}

impl Kernel for BumpKernel {
    fn eval(&self, x: f64) -> f64 {
        self.normalization * bump((x - self.center) / self.radius)
    }

    fn center(&self) -> f64 {
        self.center
    }

    fn radius(&self) -> f64 {
        self.radius
    }

    fn label(&self) -> &'static str {
        "kernel"
    }
}

/// Symmetric mollifier `ρ_ε(x) = ρ(x/ε)/ε` with the bump profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mollifier {
    epsilon: f64,
}

impl Mollifier {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Mismatch(format!(
                "mollifier width must be finite and positive, got {epsilon}"
            )));
        }
        Ok(Self { epsilon })
    }

    /// Rejects widths below four grid spacings.
    pub fn resolved(epsilon: f64, dx: f64) -> Result<Self> {
        if epsilon < 4.0 * dx * (1.0 - 1e-12) {
            return Err(Error::Resolution {
                what: "mollifier",
                width: epsilon,
                required: 4.0 * dx,
                dx,
            });
        }
        Self::new(epsilon)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl Kernel for Mollifier {
    fn eval(&self, x: f64) -> f64 {
        bump(x / self.epsilon) / (self.epsilon * bump_mass())
    }

    fn center(&self) -> f64 {
        0.0
    }

    fn radius(&self) -> f64 {
        self.epsilon
    }

    fn label(&self) -> &'static str {
        "mollifier"
    }
}

/// Node-aligned discrete kernel: `weights[k]` multiplies offset
/// `(first + k)·dx`, and the weights (which include the `dx` factor) sum to
/// one exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    first: isize,
    weights: Vec<f64>,
}

impl Stencil {
    pub fn sample(kernel: &impl Kernel, dx: f64) -> Result<Self> {
        let r = kernel.radius();
        if r < dx {
            return Err(Error::Resolution {
                what: kernel.label(),
                width: r,
                required: dx,
                dx,
            });
        }
        let c = kernel.center();
        let first = ((c - r) / dx).ceil() as isize;
        let last = ((c + r) / dx).floor() as isize;
        let raw: Vec<f64> = (first..=last).map(|m| kernel.eval(m as f64 * dx)).collect();
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Resolution {
                what: kernel.label(),
                width: r,
                required: dx,
                dx,
            });
        }
        Ok(Self {
            first,
            weights: raw.into_iter().map(|w| w / total).collect(),
        })
    }

    /// Discrete mass `Σ w`, equal to one up to rounding.
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn offsets(&self) -> impl Iterator<Item = (isize, f64)> + '_ {
        self.weights
            .iter()
            .enumerate()
            .map(move |(k, &w)| (self.first + k as isize, w))
    }
}

/// `(k ∗ f)(x_i) = ∫ k(x_i - y) f(y) dy` by trapezoid quadrature on the
/// grid of `f`, with `f` taken as zero outside the grid.
pub fn convolve(f: &Field, kernel: &impl Kernel) -> Result<Field> {
    let stencil = Stencil::sample(kernel, f.grid.dx())?;
    Ok(apply_stencil(f, &stencil))
}

pub(crate) fn apply_stencil(f: &Field, stencil: &Stencil) -> Field {
    let n = f.values.len();
    let mut out = vec![0.0; n];
    for (j, &v) in f.values.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let v = if j == 0 || j == n - 1 { 0.5 * v } else { v };
        for (m, w) in stencil.offsets() {
            let i = j as isize + m;
            if i >= 0 && (i as usize) < n {
                out[i as usize] += w * v;
            }
        }
    }
    Field::from_raw(f.grid, out, f.time)
}
