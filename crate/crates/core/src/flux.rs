//! Flux models `F(t, x, z) = θ(t)·b(x)·g(z)`, their analytic partials, the
//! x-mollified regularization and numerical estimates of the admissibility
//! norms.
//!
//! Variable order is `(t, x, z)`: the time derivative is `∂ₜF`, the nonlocal
//! sensitivities are `∂_zF` and `∂_z²F`. The spatial derivative is only ever
//! taken of the mollified flux.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{bump, bump_d1, trapezoid, BumpKernel, Field, Grid, Kernel, Mollifier};

/// Spatial factor `b(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Spatial {
    Zero,
    Constant {
        value: f64,
    },
    Linear {
        slope: f64,
        intercept: f64,
    },
    /// `amplitude` times the unit-mass bump of the given radius.
    Bump {
        amplitude: f64,
        center: f64,
        radius: f64,
    },
    /// `height` on the closed interval `[lo, hi]`.
    Indicator {
        lo: f64,
        hi: f64,
        height: f64,
    },
    /// `amplitude·tanh(x/width)` cut off outside `|x| < half_width`.
    SmoothedStep {
        amplitude: f64,
        width: f64,
        half_width: f64,
    },
    /// `amplitude·sign(x)` cut off outside `|x| < half_width`.
    SignStep {
        amplitude: f64,
        half_width: f64,
    },
}

impl Spatial {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Spatial::Zero => 0.0,
            Spatial::Constant { value } => value,
            Spatial::Linear { slope, intercept } => slope * x + intercept,
            Spatial::Bump {
                amplitude,
                center,
                radius,
            } => amplitude * bump((x - center) / radius) / (radius * crate::fields::bump_mass()),
            Spatial::Indicator { lo, hi, height } => {
                if (lo..=hi).contains(&x) {
                    height
                } else {
                    0.0
                }
            }
            Spatial::SmoothedStep {
                amplitude,
                width,
                half_width,
            } => {
                if x.abs() < half_width {
                    amplitude * (x / width).tanh()
                } else {
                    0.0
                }
            }
            Spatial::SignStep { amplitude, half_width } => {
                if x.abs() < half_width && x != 0.0 {
                    amplitude * x.signum()
                } else {
                    0.0
                }
            }
        }
    }

    /// Exact derivative where it exists (smooth profiles only).
    pub fn derivative(&self, x: f64) -> Option<f64> {
        match *self {
            Spatial::Zero | Spatial::Constant { .. } => Some(0.0),
            Spatial::Linear { slope, .. } => Some(slope),
            Spatial::Bump {
                amplitude,
                center,
                radius,
            } => Some(amplitude * bump_d1((x - center) / radius) / (radius * radius * crate::fields::bump_mass())),
            _ => None,
        }
    }

    /// Jump locations of discontinuous profiles.
    pub fn jumps(&self) -> Vec<f64> {
        match *self {
            Spatial::Indicator { lo, hi, .. } => vec![lo, hi],
            Spatial::SmoothedStep { half_width, .. } => vec![-half_width, half_width],
            Spatial::SignStep { half_width, .. } => vec![-half_width, 0.0, half_width],
            _ => Vec::new(),
        }
    }

    pub fn is_smooth(&self) -> bool {
        self.jumps().is_empty()
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Spatial::Zero => true,
            Spatial::Constant { value } => value == 0.0,
            Spatial::Linear { slope, intercept } => slope == 0.0 && intercept == 0.0,
            Spatial::Bump { amplitude, .. }
            | Spatial::SmoothedStep { amplitude, .. }
            | Spatial::SignStep { amplitude, .. } => amplitude == 0.0,
            Spatial::Indicator { height, .. } => height == 0.0,
        }
    }
}

/// Nonlocal response `g(z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    /// `g ≡ 1`: the flux ignores the nonlocal argument.
    Unit,
    /// `g(z) = z`.
    Identity,
    /// `g(z) = 1/(1 + z²)`.
    Lorentzian,
}

impl Response {
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            Response::Unit => 1.0,
            Response::Identity => z,
            Response::Lorentzian => 1.0 / (1.0 + z * z),
        }
    }

    pub fn d1(&self, z: f64) -> f64 {
        match self {
            Response::Unit => 0.0,
            Response::Identity => 1.0,
            Response::Lorentzian => {
                let q = 1.0 + z * z;
                -2.0 * z / (q * q)
            }
        }
    }

    pub fn d2(&self, z: f64) -> f64 {
        match self {
            Response::Unit | Response::Identity => 0.0,
            Response::Lorentzian => {
                let q = 1.0 + z * z;
                (6.0 * z * z - 2.0) / (q * q * q)
            }
        }
    }

    /// `(sup |g|, sup |g'|)` over `|z| ≤ bound`.
    pub fn bounds(&self, bound: f64) -> (f64, f64) {
        let bound = bound.abs();
        match self {
            Response::Unit => (1.0, 0.0),
            Response::Identity => (bound, 1.0),
            Response::Lorentzian => {
                let peak = 1.0 / 3f64.sqrt();
                let zs = bound.min(peak);
                (1.0, self.d1(zs).abs())
            }
        }
    }
}

/// Time modulation `θ(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Temporal {
    Steady,
    /// `θ(t) = 1 + depth·sin(2π·frequency·t)`.
    Oscillating {
        depth: f64,
        frequency: f64,
    },
}

impl Temporal {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Temporal::Steady => 1.0,
            Temporal::Oscillating { depth, frequency } => 1.0 + depth * (2.0 * PI * frequency * t).sin(),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            Temporal::Steady => 0.0,
            Temporal::Oscillating { depth, frequency } => {
                depth * 2.0 * PI * frequency * (2.0 * PI * frequency * t).cos()
            }
        }
    }

    pub fn sup(&self) -> f64 {
        match *self {
            Temporal::Steady => 1.0,
            Temporal::Oscillating { depth, .. } => 1.0 + depth.abs(),
        }
    }
}

/// Separable flux `F(t, x, z) = θ(t)·b(x)·g(z)` with analytic partials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluxModel {
    pub name: String,
    pub temporal: Temporal,
    pub spatial: Spatial,
    pub response: Response,
    /// Violates the admissibility hypotheses; for demonstrations only.
    pub demo_only: bool,
    /// Pointwise evaluation is ill-defined at jumps; only use through
    /// [`regularize`].
    pub requires_regularization: bool,
}

impl FluxModel {
    pub fn new(name: impl Into<String>, spatial: Spatial, response: Response) -> Self {
        Self {
            name: name.into(),
            temporal: Temporal::Steady,
            spatial,
            response,
            demo_only: false,
            requires_regularization: false,
        }
    }

    pub fn with_temporal(mut self, temporal: Temporal) -> Self {
        self.temporal = temporal;
        self
    }

    pub fn zero() -> Self {
        Self::new("zero_flux", Spatial::Zero, Response::Unit)
    }

    pub fn constant_drift(c: f64) -> Self {
        Self::new("constant_drift", Spatial::Constant { value: c }, Response::Unit)
    }

    /// `b(x) = tanh(4x)` on `|x| < 1.5`: a smoothed step with a compact
    /// cutoff, discontinuous at `±1.5`.
    pub fn linear_irregular() -> Self {
        Self::new(
            "linear_irregular",
            Spatial::SmoothedStep {
                amplitude: 1.0,
                width: 0.25,
                half_width: 1.5,
            },
            Response::Unit,
        )
    }

    /// `b(x) = sign(x)` on `|x| < 1.5`.
    pub fn linear_discontinuous() -> Self {
        let mut m = Self::new(
            "linear_discontinuous",
            Spatial::SignStep {
                amplitude: 1.0,
                half_width: 1.5,
            },
            Response::Unit,
        );
        m.requires_regularization = true;
        m
    }

    /// Unit-mass bump of radius 1 times `1/(1+z²)`.
    pub fn smooth_nonlocal() -> Self {
        Self::new(
            "smooth_nonlocal",
            Spatial::Bump {
                amplitude: 1.0,
                center: 0.0,
                radius: 1.0,
            },
            Response::Lorentzian,
        )
    }

    /// `1_{[-1,1]}(x)·(1+z²)⁻¹`.
    pub fn indicator_nonlocal() -> Self {
        Self::new(
            "discontinuous_flux",
            Spatial::Indicator {
                lo: -1.0,
                hi: 1.0,
                height: 1.0,
            },
            Response::Lorentzian,
        )
    }

    /// `F = z`. Not integrable in x; used for the shock demonstration.
    pub fn burgers_like() -> Self {
        let mut m = Self::new("burgers_like", Spatial::Constant { value: 1.0 }, Response::Identity);
        m.demo_only = true;
        m
    }

    pub fn value(&self, t: f64, x: f64, z: f64) -> f64 {
        self.temporal.eval(t) * self.spatial.eval(x) * self.response.eval(z)
    }

    /// `∂ₜF`.
    pub fn time_derivative(&self, t: f64, x: f64, z: f64) -> f64 {
        self.temporal.derivative(t) * self.spatial.eval(x) * self.response.eval(z)
    }

    /// `∂_zF`.
    pub fn dz(&self, t: f64, x: f64, z: f64) -> f64 {
        self.temporal.eval(t) * self.spatial.eval(x) * self.response.d1(z)
    }

    /// `∂_z²F`.
    pub fn dzz(&self, t: f64, x: f64, z: f64) -> f64 {
        self.temporal.eval(t) * self.spatial.eval(x) * self.response.d2(z)
    }

    pub fn spatially_smooth(&self) -> bool {
        self.spatial.is_smooth()
    }

    pub fn jumps(&self) -> Vec<f64> {
        self.spatial.jumps()
    }

    /// Whether the flux actually reads the nonlocal argument `K∗u`.
    pub fn depends_on_nonlocal(&self) -> bool {
        self.response != Response::Unit && !self.spatial.is_zero()
    }
}

/// Catalog of built-in flux models.
pub fn builtin_models() -> Vec<FluxModel> {
    vec![
        FluxModel::zero(),
        FluxModel::constant_drift(1.0),
        FluxModel::linear_irregular(),
        FluxModel::linear_discontinuous(),
        FluxModel::smooth_nonlocal(),
        FluxModel::indicator_nonlocal(),
        FluxModel::burgers_like(),
    ]
}

/// Symmetric quadrature for `∫ f(x - y) ρ_ε(y) dy` on half-integer offsets
/// `±(m + ½)h`, so that no node lands on the evaluation point itself.
#[derive(Debug, Clone, PartialEq)]
struct StaggeredRule {
    offsets: Vec<f64>,
    weights: Vec<f64>,
}

impl StaggeredRule {
    fn new(mollifier: &Mollifier, h: f64) -> Self {
        let half = (mollifier.epsilon() / h).ceil() as usize;
        let mut offsets = Vec::with_capacity(2 * half);
        let mut weights = Vec::with_capacity(2 * half);
        for m in 0..half {
            let y = (m as f64 + 0.5) * h;
            let w = mollifier.eval(y);
            offsets.extend([y, -y]);
            weights.extend([w, w]);
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Self { offsets, weights }
    }

    fn apply(&self, f: impl Fn(f64) -> f64, x: f64) -> f64 {
        // Symmetric pairs are summed first so that a jump at `x` is averaged
        // exactly.
        self.offsets
            .chunks(2)
            .zip(self.weights.chunks(2))
            .map(|(y, w)| w[0] * (f(x - y[0]) + f(x - y[1])))
            .sum()
    }
}

/// `Fε(t, x, z) = ∫ F(t, x - y, z) ρ_ε(y) dy`, tabulated at construction on
/// the nodes of a grid.
#[derive(Debug, Clone)]
pub struct RegularizedFlux {
    base: FluxModel,
    epsilon: f64,
    grid: Grid,
    rule: StaggeredRule,
    table: Vec<f64>,
    slopes: Vec<f64>,
}

/// Mollifies `flux` in x with width `epsilon`, tabulating on `grid`.
pub fn regularize(flux: &FluxModel, epsilon: f64, grid: &Grid) -> Result<RegularizedFlux> {
    let dx = grid.dx();
    let mollifier = Mollifier::resolved(epsilon, dx)?;
    let rule = StaggeredRule::new(&mollifier, dx);
    let spatial = flux.spatial;
    // One extra node on each side gives central slopes at every grid node.
    let ext: Vec<f64> = (0..grid.n_nodes() + 2)
        .map(|k| {
            let x = grid.x_min() + (k as f64 - 1.0) * dx;
            rule.apply(|y| spatial.eval(y), x)
        })
        .collect();
    let slopes = ext.windows(3).map(|w| (w[2] - w[0]) / (2.0 * dx)).collect();
    let table = ext[1..ext.len() - 1].to_vec();
    if let Some((i, v)) = table.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite {
            location: format!("regularized flux at x = {}", grid.node(i)),
            value: *v,
        });
    }
    Ok(RegularizedFlux {
        base: flux.clone(),
        epsilon,
        grid: *grid,
        rule,
        table,
        slopes,
    })
}

impl RegularizedFlux {
    pub fn base(&self) -> &FluxModel {
        &self.base
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn direct(&self, x: f64) -> f64 {
        let spatial = self.base.spatial;
        self.rule.apply(|y| spatial.eval(y), x)
    }

    /// Mollified spatial factor `bε(x)`.
    pub fn spatial(&self, x: f64) -> f64 {
        match self.grid.locate(x) {
            Some((i, th)) => (1.0 - th) * self.table[i] + th * self.table[i + 1],
            None => self.direct(x),
        }
    }

    /// Central-difference slope `bε'(x)` with step `dx`.
    pub fn spatial_slope(&self, x: f64) -> f64 {
        match self.grid.locate(x) {
            Some((i, th)) => (1.0 - th) * self.slopes[i] + th * self.slopes[i + 1],
            None => {
                let h = self.grid.dx();
                (self.direct(x + h) - self.direct(x - h)) / (2.0 * h)
            }
        }
    }

    pub fn value(&self, t: f64, x: f64, z: f64) -> f64 {
        self.base.temporal.eval(t) * self.spatial(x) * self.base.response.eval(z)
    }

    /// `∂ₓFε(t, x, z)`.
    pub fn dx(&self, t: f64, x: f64, z: f64) -> f64 {
        self.base.temporal.eval(t) * self.spatial_slope(x) * self.base.response.eval(z)
    }

    /// `∂_zFε(t, x, z)`.
    pub fn dz(&self, t: f64, x: f64, z: f64) -> f64 {
        self.base.temporal.eval(t) * self.spatial(x) * self.base.response.d1(z)
    }

    /// Drift `Fε(t, x, z)` and the chain-rule slope
    /// `∂ₓFε + ∂_zFε·dz_dx` in one pass.
    pub(crate) fn drift_and_slope(&self, t: f64, x: f64, z: f64, dz_dx: f64) -> (f64, f64) {
        let theta = self.base.temporal.eval(t);
        let (b, db) = match self.grid.locate(x) {
            Some((i, th)) => (
                (1.0 - th) * self.table[i] + th * self.table[i + 1],
                (1.0 - th) * self.slopes[i] + th * self.slopes[i + 1],
            ),
            None => (self.direct(x), self.spatial_slope(x)),
        };
        let g = self.base.response.eval(z);
        let dg = self.base.response.d1(z);
        (theta * b * g, theta * (db * g + b * dg * dz_dx))
    }

    /// `∂ₓ[Fε(t, ·, conv(·))](x)`: the total spatial derivative along the
    /// frozen nonlocal field `conv`.
    pub fn total_spatial_derivative(&self, t: f64, x: f64, conv: &Field) -> Result<f64> {
        let g = conv.grid();
        let (lo, hi) = (g.x_min() + g.dx(), g.x_max() - g.dx());
        if !(lo..=hi).contains(&x) {
            return Err(Error::OutOfDomain { x, lo, hi });
        }
        let slopes = conv.central_slopes();
        let (i, th) = g.locate(x).expect("interior point");
        let z = (1.0 - th) * conv.values()[i] + th * conv.values()[i + 1];
        let dz_dx = (1.0 - th) * slopes[i] + th * slopes[i + 1];
        Ok(self.drift_and_slope(t, x, z, dz_dx).1)
    }

    /// A priori bound on `|∂ₓ[Fε(t, ·, K∗u)]|` given `|K∗u| ≤ z_bound` and
    /// `|∂ₓ(K∗u)| ≤ conv_slope_bound`.
    pub fn max_total_slope(&self, z_bound: f64, conv_slope_bound: f64) -> f64 {
        let (g0, g1) = self.base.response.bounds(z_bound);
        let theta = self.base.temporal.sup();
        let b = self.table.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let db = self.slopes.iter().map(|v| v.abs()).fold(0.0, f64::max);
        theta * (db * g0 + b * g1 * conv_slope_bound)
    }

    /// `sup |bε|` over the tabulation grid.
    pub fn sup_spatial(&self) -> f64 {
        self.table.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// Sampling box for [`verify_hypothesis`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisBox {
    pub t: (f64, f64),
    pub x: (f64, f64),
    pub z: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Resolution {
    pub nt: usize,
    pub nx: usize,
    pub nz: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Self {
            nt: 8,
            nx: 2048,
            nz: 64,
        }
    }
}

/// Numerical estimates of the five admissibility norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisReport {
    /// `‖F‖_{L∞ₜ L¹ₓ L∞_z}`
    pub flux_l1: f64,
    /// `‖F‖_{L∞}`
    pub flux_sup: f64,
    /// `‖∂ₜF‖_{L∞ₜ L¹ₓ L∞_z}`
    pub time_derivative_l1: f64,
    /// `‖∂_zF‖_{L∞}`
    pub dz_sup: f64,
    /// `‖∂_z²F‖_{L²ₜ L¹ₓ L∞_z}`
    pub dzz_l2_l1: f64,
    pub resolution: Resolution,
}

impl HypothesisReport {
    pub fn all_finite(&self) -> bool {
        [
            self.flux_l1,
            self.flux_sup,
            self.time_derivative_l1,
            self.dz_sup,
            self.dzz_l2_l1,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

fn samples(range: (f64, f64), n: usize) -> Vec<f64> {
    if n == 0 || range.0 == range.1 {
        return vec![range.0];
    }
    (0..=n)
        .map(|i| range.0 + (range.1 - range.0) * i as f64 / n as f64)
        .collect()
}

/// Estimates the admissibility norms by nested sup/trapezoid sampling over
/// `bounds`.
pub fn verify_hypothesis(flux: &FluxModel, bounds: &HypothesisBox, resolution: Resolution) -> Result<HypothesisReport> {
    let ts = samples(bounds.t, resolution.nt);
    let xs = samples(bounds.x, resolution.nx.max(1));
    let zs = samples(bounds.z, resolution.nz);
    let hx = if xs.len() > 1 { xs[1] - xs[0] } else { 0.0 };

    let mut flux_l1_t = Vec::with_capacity(ts.len());
    let mut dt_l1_t = Vec::with_capacity(ts.len());
    let mut dzz_l1_t = Vec::with_capacity(ts.len());
    let mut flux_sup = 0.0f64;
    let mut dz_sup = 0.0f64;

    for &t in &ts {
        let mut f_x = Vec::with_capacity(xs.len());
        let mut ft_x = Vec::with_capacity(xs.len());
        let mut fzz_x = Vec::with_capacity(xs.len());
        for &x in &xs {
            let (mut f, mut ft, mut fz, mut fzz) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
            for &z in &zs {
                let vals = [
                    flux.value(t, x, z),
                    flux.time_derivative(t, x, z),
                    flux.dz(t, x, z),
                    flux.dzz(t, x, z),
                ];
                if let Some(v) = vals.iter().find(|v| !v.is_finite()) {
                    return Err(Error::NonFinite {
                        location: format!("flux '{}' at (t, x, z) = ({t}, {x}, {z})", flux.name),
                        value: *v,
                    });
                }
                f = f.max(vals[0].abs());
                ft = ft.max(vals[1].abs());
                fz = fz.max(vals[2].abs());
                fzz = fzz.max(vals[3].abs());
            }
            flux_sup = flux_sup.max(f);
            dz_sup = dz_sup.max(fz);
            f_x.push(f);
            ft_x.push(ft);
            fzz_x.push(fzz);
        }
        flux_l1_t.push(trapezoid(&f_x, hx));
        dt_l1_t.push(trapezoid(&ft_x, hx));
        dzz_l1_t.push(trapezoid(&fzz_x, hx));
    }

    let ht = if ts.len() > 1 { ts[1] - ts[0] } else { 0.0 };
    let sq: Vec<f64> = dzz_l1_t.iter().map(|v| v * v).collect();
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    Ok(HypothesisReport {
        flux_l1: max(&flux_l1_t),
        flux_sup,
        time_derivative_l1: max(&dt_l1_t),
        dz_sup,
        dzz_l2_l1: trapezoid(&sq, ht).sqrt(),
        resolution,
    })
}

/// Default sampling box for a run: horizon, grid extent, and the range the
/// nonlocal argument can reach for data of total mass `mass` under `kernel`.
pub fn run_box(horizon: f64, grid: &Grid, kernel: &BumpKernel, mass: f64) -> HypothesisBox {
    let z = mass.abs() * kernel.max_value();
    HypothesisBox {
        t: (0.0, horizon),
        x: (grid.x_min(), grid.x_max()),
        z: (-z, z),
    }
}
