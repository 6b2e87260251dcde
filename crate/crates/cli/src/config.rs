//! Experiment configuration: a TOML document with one value per line,
//! grouped in sections. Every key is optional; missing keys take the
//! values of the named `preset` (or of `zero_flux` when none is named).
//!
//! ```toml
//! preset = "smooth_nonlocal"
//!
//! [run]
//! n_paths = 64
//! master_seed = 3
//! ```

use std::fmt;

use serde::Serialize;
use sncl_core::{BumpKernel, FluxModel, Grid, InitialData, Scheme, SolverConfig, Spatial, Temporal, TimeGrid};
use toml::{Table, Value};

use crate::presets;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluxSpec {
    pub model: String,
    /// Parameter overrides applied on top of the built-in model.
    #[serde(flatten)]
    pub params: std::collections::BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelSpec {
    pub center: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeSpec {
    pub horizon: f64,
    pub n_steps: usize,
    /// Output times are `k·T/n_outputs`, `k = 0..=n_outputs`.
    pub n_outputs: usize,
}

/// Mollification widths in units of `dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularizationSpec {
    pub eps_u_cells: f64,
    pub eps_f_cells: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSpec {
    pub n_paths: usize,
    pub master_seed: u64,
    pub scheme: Scheme,
    pub picard_tol: f64,
    pub picard_max_iters: usize,
    pub output_dir: String,
}

/// Optional diagnostics run by `diagnose`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsSpec {
    pub hypothesis: bool,
    pub weak_residual: bool,
    pub phi_center: f64,
    pub phi_radius: f64,
    pub commutator: bool,
    pub translation: bool,
    pub shock_growth: bool,
}

/// Refinement studies run by `ladder`. Widths given in cells refer to the
/// experiment grid; ladders that change the grid keep the absolute widths
/// of their coarsest level.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LadderSpec {
    /// Pairs `(ε_i, ε_{i+1})` of consecutive flux widths. Each run uses the
    /// smallest power-of-two step count with `Δt ≤ parabolic_factor·ε²`.
    Uniqueness {
        eps_f_cells: Vec<f64>,
        parabolic_factor: f64,
        n_paths: usize,
    },
    MarchingGap {
        n_steps: Vec<usize>,
        n_paths: usize,
    },
    WeakResidual {
        n_cells: Vec<usize>,
        n_steps: Vec<usize>,
        n_paths: usize,
    },
    Translation {
        n_cells: Vec<usize>,
        n_paths: usize,
    },
    /// Inverse-Jacobian moment at `T` across flux widths, with a zero-flux
    /// control on the same grid.
    Moment {
        eps_f_cells: Vec<f64>,
        n_paths: usize,
    },
    /// Commutator of the experiment flux and of `control` against the
    /// zero-flux evolution of the datum.
    Commutator {
        eps_cells: Vec<f64>,
        control: String,
        n_paths: usize,
    },
}

impl LadderSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LadderSpec::Uniqueness { .. } => "uniqueness",
            LadderSpec::MarchingGap { .. } => "marching_gap",
            LadderSpec::WeakResidual { .. } => "weak_residual",
            LadderSpec::Translation { .. } => "translation",
            LadderSpec::Moment { .. } => "moment",
            LadderSpec::Commutator { .. } => "commutator",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub description: String,
    pub flux: FluxSpec,
    pub kernel: KernelSpec,
    pub grid: GridSpec,
    pub time: TimeSpec,
    pub initial: InitialData,
    pub regularization: RegularizationSpec,
    pub run: RunSpec,
    pub diagnostics: DiagnosticsSpec,
    pub ladder: Vec<LadderSpec>,
}

/// Every problem found in a configuration document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub Vec<String>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

pub const FLUX_MODELS: [&str; 7] = [
    "zero_flux",
    "constant_drift",
    "linear_irregular",
    "linear_discontinuous",
    "smooth_nonlocal",
    "discontinuous_flux",
    "burgers_like",
];

fn base_model(name: &str) -> Option<FluxModel> {
    Some(match name {
        "zero_flux" => FluxModel::zero(),
        "constant_drift" => FluxModel::constant_drift(1.0),
        "linear_irregular" => FluxModel::linear_irregular(),
        "linear_discontinuous" => FluxModel::linear_discontinuous(),
        "smooth_nonlocal" => FluxModel::smooth_nonlocal(),
        "discontinuous_flux" => FluxModel::indicator_nonlocal(),
        "burgers_like" => FluxModel::burgers_like(),
        _ => return None,
    })
}

const FLUX_PARAMS: [&str; 11] = [
    "value",
    "amplitude",
    "center",
    "radius",
    "width",
    "half_width",
    "lo",
    "hi",
    "height",
    "depth",
    "frequency",
];

impl FluxSpec {
    pub fn named(model: &str) -> Self {
        Self {
            model: model.to_string(),
            params: Default::default(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    /// The built-in model with overrides applied.
    pub fn build(&self) -> Result<FluxModel, Vec<String>> {
        let mut model = base_model(&self.model).ok_or_else(|| {
            vec![format!(
                "[flux].model = {:?}: unknown model (expected one of {})",
                self.model,
                FLUX_MODELS.join(", ")
            )]
        })?;
        let mut errors = Vec::new();
        let mut depth = None;
        let mut frequency = None;
        for (key, &v) in &self.params {
            let slot: Option<&mut f64> = match (&mut model.spatial, key.as_str()) {
                (_, "depth") => {
                    depth = Some(v);
                    continue;
                }
                (_, "frequency") => {
                    frequency = Some(v);
                    continue;
                }
                (Spatial::Constant { value }, "value") => Some(value),
                (Spatial::Bump { amplitude, .. }, "amplitude") => Some(amplitude),
                (Spatial::Bump { center, .. }, "center") => Some(center),
                (Spatial::Bump { radius, .. }, "radius") => Some(radius),
                (Spatial::Indicator { lo, .. }, "lo") => Some(lo),
                (Spatial::Indicator { hi, .. }, "hi") => Some(hi),
                (Spatial::Indicator { height, .. }, "height") => Some(height),
                (Spatial::SmoothedStep { amplitude, .. }, "amplitude") => Some(amplitude),
                (Spatial::SmoothedStep { width, .. }, "width") => Some(width),
                (Spatial::SmoothedStep { half_width, .. }, "half_width") => Some(half_width),
                (Spatial::SignStep { amplitude, .. }, "amplitude") => Some(amplitude),
                (Spatial::SignStep { half_width, .. }, "half_width") => Some(half_width),
                _ => None,
            };
            match slot {
                Some(s) if v.is_finite() => *s = v,
                Some(_) => errors.push(format!("[flux].{key} = {v}: must be finite")),
                None => errors.push(format!(
                    "[flux].{key}: parameter does not apply to model {:?}",
                    self.model
                )),
            }
        }
        match &model.spatial {
            Spatial::Bump { radius, .. } if !(*radius > 0.0) => {
                errors.push(format!("[flux].radius = {radius}: must be positive"))
            }
            Spatial::SmoothedStep { width, .. } if !(*width > 0.0) => {
                errors.push(format!("[flux].width = {width}: must be positive"))
            }
            Spatial::Indicator { lo, hi, .. } if !(lo < hi) => {
                errors.push(format!("[flux].lo = {lo}, hi = {hi}: need lo < hi"))
            }
            _ => {}
        }
        if depth.is_some() || frequency.is_some() {
            model = model.with_temporal(Temporal::Oscillating {
                depth: depth.unwrap_or(0.0),
                frequency: frequency.unwrap_or(1.0),
            });
        }
        if errors.is_empty() {
            Ok(model)
        } else {
            Err(errors)
        }
    }
}

impl ExperimentConfig {
    pub fn demo_only(&self) -> bool {
        self.flux.build().map(|m| m.demo_only).unwrap_or(false)
    }

    pub fn grid(&self) -> Result<Grid, sncl_core::Error> {
        Grid::new(self.grid.x_min, self.grid.x_max, self.grid.n_cells)
    }

    pub fn output_indices(&self) -> Vec<usize> {
        let n = self.time.n_outputs.max(1);
        (0..=n).map(|k| k * self.time.n_steps / n).collect()
    }

    /// The per-path solver configuration. Only meaningful for a validated
    /// config.
    pub fn solver_config(&self) -> Result<SolverConfig, ConfigError> {
        let grid = self.grid().map_err(|e| ConfigError(vec![format!("[grid]: {e}")]))?;
        let dx = grid.dx();
        Ok(SolverConfig {
            grid,
            time_grid: TimeGrid::uniform(self.time.horizon, self.time.n_steps)
                .map_err(|e| ConfigError(vec![format!("[time]: {e}")]))?,
            kernel: BumpKernel::new(self.kernel.center, self.kernel.radius)
                .map_err(|e| ConfigError(vec![format!("[kernel]: {e}")]))?,
            flux: self.flux.build().map_err(ConfigError)?,
            initial: self.initial.clone(),
            eps_u: self.regularization.eps_u_cells * dx,
            eps_f: self.regularization.eps_f_cells * dx,
            picard_tol: self.run.picard_tol,
            picard_max_iters: self.run.picard_max_iters,
            output_indices: self.output_indices(),
        })
    }

    /// All semantic violations, each naming the offending value.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let g = &self.grid;
        if g.n_cells < 2 {
            v.push(format!("[grid].n_cells = {}: need at least 2 cells", g.n_cells));
        }
        if !(g.x_min < g.x_max) || !g.x_min.is_finite() || !g.x_max.is_finite() {
            v.push(format!(
                "[grid].x_min = {}, x_max = {}: need x_min < x_max",
                g.x_min, g.x_max
            ));
        }
        if !(self.time.horizon > 0.0) || !self.time.horizon.is_finite() {
            v.push(format!("[time].horizon = {}: must be positive", self.time.horizon));
        }
        if self.time.n_steps == 0 {
            v.push("[time].n_steps = 0: need at least one step".into());
        }
        if self.time.n_outputs == 0 || self.time.n_outputs > self.time.n_steps.max(1) {
            v.push(format!(
                "[time].n_outputs = {}: must lie in 1..={}",
                self.time.n_outputs, self.time.n_steps
            ));
        } else if !self.time.n_steps.is_multiple_of(self.time.n_outputs) {
            v.push(format!(
                "[time].n_outputs = {}: must divide n_steps = {}",
                self.time.n_outputs, self.time.n_steps
            ));
        }
        if !(self.kernel.radius > 0.0) {
            v.push(format!("[kernel].radius = {}: must be positive", self.kernel.radius));
        }
        if self.run.n_paths == 0 {
            v.push("[run].n_paths = 0: need at least one path".into());
        }
        if !(self.run.picard_tol > 0.0) {
            v.push(format!("[run].picard_tol = {}: must be positive", self.run.picard_tol));
        }
        if self.run.picard_max_iters == 0 {
            v.push("[run].picard_max_iters = 0: need at least one sweep".into());
        }
        if self.run.output_dir.is_empty() {
            v.push("[run].output_dir: must not be empty".into());
        }
        match &self.initial {
            InitialData::Bump { radius, .. } if !(*radius > 0.0) => {
                v.push(format!("[initial].radius = {radius}: must be positive"))
            }
            InitialData::Plateau { left, right, ramp, .. } if !(left < right) || !(*ramp > 0.0) => v.push(format!(
                "[initial].left = {left}, right = {right}, ramp = {ramp}: need left < right and ramp > 0"
            )),
            _ => {}
        }
        if self.diagnostics.weak_residual && !(self.diagnostics.phi_radius > 0.0) {
            v.push(format!(
                "[diagnostics].phi_radius = {}: must be positive",
                self.diagnostics.phi_radius
            ));
        }
        if let Err(e) = self.flux.build() {
            v.extend(e);
        }
        for (i, l) in self.ladder.iter().enumerate() {
            v.extend(ladder_violations(i, l));
        }
        if !v.is_empty() {
            return v;
        }
        // Numerical rules need a well-formed grid, time grid and flux.
        let sc = match self.solver_config() {
            Ok(sc) => sc,
            Err(e) => return e.0,
        };
        let dx = sc.grid.dx();
        for (key, cells) in [
            ("eps_u_cells", self.regularization.eps_u_cells),
            ("eps_f_cells", self.regularization.eps_f_cells),
        ] {
            if !(cells >= 4.0) {
                v.push(format!(
                    "[regularization].{key} = {cells}: width {} is below the resolution limit 4·dx = {}",
                    cells * dx,
                    4.0 * dx
                ));
            }
        }
        if self.kernel.radius < dx {
            v.push(format!(
                "[kernel].radius = {}: under-resolved, below dx = {dx}",
                self.kernel.radius
            ));
        }
        if self.diagnostics.weak_residual {
            let (c, r) = (self.diagnostics.phi_center, self.diagnostics.phi_radius);
            if c - r <= g.x_min + dx || c + r >= g.x_max - dx {
                v.push(format!(
                    "[diagnostics].phi_center = {c}, phi_radius = {r}: test function must stay inside the grid"
                ));
            }
        }
        if !v.is_empty() {
            return v;
        }
        match sc.stable_time_step() {
            Ok(limit) if sc.time_grid.max_dt() > limit => v.push(format!(
                "[time].n_steps = {}: dt = {} violates the step rule dt <= {limit}; need n_steps >= {}",
                self.time.n_steps,
                sc.time_grid.max_dt(),
                (self.time.horizon / limit).ceil()
            )),
            Ok(_) => {}
            Err(e) => v.push(format!("configuration rejected by solver: {e}")),
        }
        v
    }
}

fn ladder_violations(i: usize, l: &LadderSpec) -> Vec<String> {
    let at = format!("[[ladder]] #{} ({})", i + 1, l.kind());
    let mut v = Vec::new();
    let mut need = |ok: bool, msg: String| {
        if !ok {
            v.push(format!("{at}: {msg}"));
        }
    };
    let (levels, n_paths) = match l {
        LadderSpec::Uniqueness {
            eps_f_cells,
            parabolic_factor,
            n_paths,
        } => {
            need(
                *parabolic_factor > 0.0,
                format!("parabolic_factor = {parabolic_factor} must be positive"),
            );
            need(
                eps_f_cells.iter().all(|&e| e >= 4.0),
                format!("eps_f_cells = {eps_f_cells:?}: every width must be at least 4 cells"),
            );
            (eps_f_cells.len(), *n_paths)
        }
        LadderSpec::MarchingGap { n_steps, n_paths } => {
            need(
                n_steps.iter().all(|&n| n > 0),
                format!("n_steps = {n_steps:?} must be positive"),
            );
            (n_steps.len(), *n_paths)
        }
        LadderSpec::WeakResidual {
            n_cells,
            n_steps,
            n_paths,
        } => {
            need(
                n_cells.len() == n_steps.len(),
                format!("n_cells has {} levels but n_steps has {}", n_cells.len(), n_steps.len()),
            );
            (n_cells.len(), *n_paths)
        }
        LadderSpec::Translation { n_cells, n_paths } => (n_cells.len(), *n_paths),
        LadderSpec::Moment { eps_f_cells, n_paths } => {
            need(
                eps_f_cells.iter().all(|&e| e >= 4.0),
                format!("eps_f_cells = {eps_f_cells:?}: every width must be at least 4 cells"),
            );
            need(
                *n_paths >= 2,
                format!("n_paths = {n_paths}: moments need at least 2 paths"),
            );
            (eps_f_cells.len(), *n_paths)
        }
        LadderSpec::Commutator {
            eps_cells,
            control,
            n_paths,
        } => {
            need(
                eps_cells.iter().all(|&e| e >= 4.0),
                format!("eps_cells = {eps_cells:?}: every width must be at least 4 cells"),
            );
            need(
                base_model(control).is_some(),
                format!("control = {control:?} is not a flux model"),
            );
            (eps_cells.len(), *n_paths)
        }
    };
    need(levels >= 2, format!("needs at least 2 levels, got {levels}"));
    need(n_paths >= 1, "n_paths must be at least 1".into());
    v
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError(vec![format!("syntax: {}", e.message())]))?;
    let mut r = Reader::default();
    let preset_name = match table.get("preset") {
        Some(Value::String(s)) => Some(s.clone()),
        Some(other) => {
            r.type_error("preset", "a string", other);
            None
        }
        None => None,
    };
    let mut cfg = match &preset_name {
        Some(name) => match presets::get(name) {
            Some(p) => p.config,
            None => {
                let names: Vec<_> = presets::presets().into_iter().map(|p| p.name).collect();
                return Err(ConfigError(vec![format!(
                    "preset = {name:?}: unknown preset (expected one of {})",
                    names.join(", ")
                )]));
            }
        },
        None => {
            let mut c = presets::get("zero_flux").expect("built-in preset").config;
            c.preset = None;
            c
        }
    };
    r.apply(&table, &mut cfg);
    if !r.errors.is_empty() {
        return Err(ConfigError(r.errors));
    }
    let v = cfg.violations();
    if v.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError(v))
    }
}

impl ExperimentConfig {
    /// The configuration as a complete document accepted by
    /// [`parse_config`].
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration maps onto TOML")
    }
}

#[derive(Default)]
struct Reader {
    errors: Vec<String>,
}

fn describe(v: &Value) -> String {
    match v {
        Value::String(s) => format!("{s:?}"),
        other => other.to_string(),
    }
}

impl Reader {
    fn type_error(&mut self, key: &str, expected: &str, got: &Value) {
        self.errors
            .push(format!("{key} = {}: expected {expected}", describe(got)));
    }

    fn unknown(&mut self, key: &str) {
        self.errors.push(format!("{key}: unknown key"));
    }

    fn section<'t>(&mut self, table: &'t Table, name: &str) -> Option<&'t Table> {
        match table.get(name) {
            Some(Value::Table(t)) => Some(t),
            Some(other) => {
                self.type_error(&format!("[{name}]"), "a section", other);
                None
            }
            None => None,
        }
    }

    fn f64(&mut self, t: &Table, sec: &str, key: &str, slot: &mut f64) {
        match t.get(key) {
            Some(Value::Float(x)) => *slot = *x,
            Some(Value::Integer(i)) => *slot = *i as f64,
            Some(other) => self.type_error(&format!("[{sec}].{key}"), "a number", other),
            None => {}
        }
    }

    fn int(&mut self, t: &Table, sec: &str, key: &str) -> Option<i64> {
        match t.get(key) {
            Some(Value::Integer(i)) => Some(*i),
            Some(other) => {
                self.type_error(&format!("[{sec}].{key}"), "an integer", other);
                None
            }
            None => None,
        }
    }

    fn usize(&mut self, t: &Table, sec: &str, key: &str, slot: &mut usize) {
        if let Some(i) = self.int(t, sec, key) {
            match usize::try_from(i) {
                Ok(n) => *slot = n,
                Err(_) => self.errors.push(format!("[{sec}].{key} = {i}: must be nonnegative")),
            }
        }
    }

    fn u64(&mut self, t: &Table, sec: &str, key: &str, slot: &mut u64) {
        if let Some(i) = self.int(t, sec, key) {
            match u64::try_from(i) {
                Ok(n) => *slot = n,
                Err(_) => self.errors.push(format!("[{sec}].{key} = {i}: must be nonnegative")),
            }
        }
    }

    fn bool(&mut self, t: &Table, sec: &str, key: &str, slot: &mut bool) {
        match t.get(key) {
            Some(Value::Boolean(b)) => *slot = *b,
            Some(other) => self.type_error(&format!("[{sec}].{key}"), "true or false", other),
            None => {}
        }
    }

    fn string(&mut self, t: &Table, sec: &str, key: &str) -> Option<String> {
        match t.get(key) {
            Some(Value::String(s)) => Some(s.clone()),
            Some(other) => {
                self.type_error(&format!("[{sec}].{key}"), "a string", other);
                None
            }
            None => None,
        }
    }

    fn f64_list(&mut self, t: &Table, sec: &str, key: &str) -> Option<Vec<f64>> {
        let arr = match t.get(key)? {
            Value::Array(a) => a,
            other => {
                self.type_error(&format!("{sec}.{key}"), "a list of numbers", other);
                return None;
            }
        };
        let mut out = Vec::with_capacity(arr.len());
        for v in arr {
            match v {
                Value::Float(x) => out.push(*x),
                Value::Integer(i) => out.push(*i as f64),
                other => {
                    self.type_error(&format!("{sec}.{key}"), "a list of numbers", other);
                    return None;
                }
            }
        }
        Some(out)
    }

    fn usize_list(&mut self, t: &Table, sec: &str, key: &str) -> Option<Vec<usize>> {
        let arr = match t.get(key)? {
            Value::Array(a) => a,
            other => {
                self.type_error(&format!("{sec}.{key}"), "a list of integers", other);
                return None;
            }
        };
        let mut out = Vec::with_capacity(arr.len());
        for v in arr {
            match v {
                Value::Integer(i) if *i >= 0 => out.push(*i as usize),
                other => {
                    self.type_error(&format!("{sec}.{key}"), "a list of nonnegative integers", other);
                    return None;
                }
            }
        }
        Some(out)
    }

    fn check_keys(&mut self, t: &Table, sec: &str, allowed: &[&str]) {
        for k in t.keys() {
            if !allowed.contains(&k.as_str()) {
                self.unknown(&format!("[{sec}].{k}"));
            }
        }
    }

    fn apply(&mut self, table: &Table, cfg: &mut ExperimentConfig) {
        const TOP: [&str; 12] = [
            "preset",
            "name",
            "description",
            "flux",
            "kernel",
            "grid",
            "time",
            "initial",
            "regularization",
            "run",
            "diagnostics",
            "ladder",
        ];
        for k in table.keys() {
            if !TOP.contains(&k.as_str()) {
                self.unknown(k);
            }
        }
        if let Some(name) = table.get("preset").and_then(Value::as_str) {
            cfg.preset = Some(name.to_string());
        }
        if let Some(Value::String(s)) = table.get("name") {
            cfg.name = s.clone();
        } else if let Some(other) = table.get("name") {
            self.type_error("name", "a string", other);
        }
        if let Some(Value::String(s)) = table.get("description") {
            cfg.description = s.clone();
        } else if let Some(other) = table.get("description") {
            self.type_error("description", "a string", other);
        }

        if let Some(t) = self.section(table, "flux") {
            let mut allowed = vec!["model"];
            allowed.extend(FLUX_PARAMS);
            self.check_keys(t, "flux", &allowed);
            if let Some(m) = self.string(t, "flux", "model") {
                if m != cfg.flux.model {
                    cfg.flux = FluxSpec::named(&m);
                }
            }
            for key in FLUX_PARAMS {
                if t.contains_key(key) {
                    let mut v = 0.0;
                    self.f64(t, "flux", key, &mut v);
                    cfg.flux.params.insert(key.to_string(), v);
                }
            }
        }
        if let Some(t) = self.section(table, "kernel") {
            self.check_keys(t, "kernel", &["center", "radius"]);
            self.f64(t, "kernel", "center", &mut cfg.kernel.center);
            self.f64(t, "kernel", "radius", &mut cfg.kernel.radius);
        }
        if let Some(t) = self.section(table, "grid") {
            self.check_keys(t, "grid", &["x_min", "x_max", "n_cells"]);
            self.f64(t, "grid", "x_min", &mut cfg.grid.x_min);
            self.f64(t, "grid", "x_max", &mut cfg.grid.x_max);
            self.usize(t, "grid", "n_cells", &mut cfg.grid.n_cells);
        }
        if let Some(t) = self.section(table, "time") {
            self.check_keys(t, "time", &["horizon", "n_steps", "n_outputs"]);
            self.f64(t, "time", "horizon", &mut cfg.time.horizon);
            self.usize(t, "time", "n_steps", &mut cfg.time.n_steps);
            self.usize(t, "time", "n_outputs", &mut cfg.time.n_outputs);
        }
        if let Some(t) = self.section(table, "initial") {
            self.apply_initial(t, &mut cfg.initial);
        }
        if let Some(t) = self.section(table, "regularization") {
            self.check_keys(t, "regularization", &["eps_u_cells", "eps_f_cells"]);
            self.f64(t, "regularization", "eps_u_cells", &mut cfg.regularization.eps_u_cells);
            self.f64(t, "regularization", "eps_f_cells", &mut cfg.regularization.eps_f_cells);
        }
        if let Some(t) = self.section(table, "run") {
            self.check_keys(
                t,
                "run",
                &[
                    "n_paths",
                    "master_seed",
                    "scheme",
                    "picard_tol",
                    "picard_max_iters",
                    "output_dir",
                ],
            );
            self.usize(t, "run", "n_paths", &mut cfg.run.n_paths);
            self.u64(t, "run", "master_seed", &mut cfg.run.master_seed);
            if let Some(s) = self.string(t, "run", "scheme") {
                match s.as_str() {
                    "picard" => cfg.run.scheme = Scheme::Picard,
                    "marching" => cfg.run.scheme = Scheme::Marching,
                    _ => self
                        .errors
                        .push(format!("[run].scheme = {s:?}: expected \"picard\" or \"marching\"")),
                }
            }
            self.f64(t, "run", "picard_tol", &mut cfg.run.picard_tol);
            self.usize(t, "run", "picard_max_iters", &mut cfg.run.picard_max_iters);
            if let Some(s) = self.string(t, "run", "output_dir") {
                cfg.run.output_dir = s;
            }
        }
        if let Some(t) = self.section(table, "diagnostics") {
            let d = &mut cfg.diagnostics;
            self.check_keys(
                t,
                "diagnostics",
                &[
                    "hypothesis",
                    "weak_residual",
                    "phi_center",
                    "phi_radius",
                    "commutator",
                    "translation",
                    "shock_growth",
                ],
            );
            self.bool(t, "diagnostics", "hypothesis", &mut d.hypothesis);
            self.bool(t, "diagnostics", "weak_residual", &mut d.weak_residual);
            self.f64(t, "diagnostics", "phi_center", &mut d.phi_center);
            self.f64(t, "diagnostics", "phi_radius", &mut d.phi_radius);
            self.bool(t, "diagnostics", "commutator", &mut d.commutator);
            self.bool(t, "diagnostics", "translation", &mut d.translation);
            self.bool(t, "diagnostics", "shock_growth", &mut d.shock_growth);
        }
        match table.get("ladder") {
            Some(Value::Array(items)) => {
                let mut ladders = Vec::with_capacity(items.len());
                for (i, item) in items.iter().enumerate() {
                    match item {
                        Value::Table(t) => {
                            if let Some(l) = self.ladder(i, t) {
                                ladders.push(l);
                            }
                        }
                        other => self.type_error("[[ladder]]", "a table", other),
                    }
                }
                cfg.ladder = ladders;
            }
            Some(other) => self.type_error("ladder", "an array of [[ladder]] tables", other),
            None => {}
        }
    }

    fn apply_initial(&mut self, t: &Table, init: &mut InitialData) {
        if let Some(kind) = self.string(t, "initial", "kind") {
            match (kind.as_str(), &*init) {
                ("bump", InitialData::Bump { .. }) | ("plateau", InitialData::Plateau { .. }) => {}
                ("bump", _) => {
                    *init = InitialData::Bump {
                        center: 0.0,
                        radius: 1.5,
                        mass: 1.0,
                    }
                }
                ("plateau", _) => {
                    *init = InitialData::Plateau {
                        left: -2.0,
                        right: 0.0,
                        ramp: 0.5,
                        height: 1.0,
                    }
                }
                _ => {
                    self.errors
                        .push(format!("[initial].kind = {kind:?}: expected \"bump\" or \"plateau\""));
                    return;
                }
            }
        }
        match init {
            InitialData::Bump { center, radius, mass } => {
                self.check_keys(t, "initial", &["kind", "center", "radius", "mass"]);
                self.f64(t, "initial", "center", center);
                self.f64(t, "initial", "radius", radius);
                self.f64(t, "initial", "mass", mass);
            }
            InitialData::Plateau {
                left,
                right,
                ramp,
                height,
            } => {
                self.check_keys(t, "initial", &["kind", "left", "right", "ramp", "height"]);
                self.f64(t, "initial", "left", left);
                self.f64(t, "initial", "right", right);
                self.f64(t, "initial", "ramp", ramp);
                self.f64(t, "initial", "height", height);
            }
            InitialData::Sampled(_) => {}
        }
    }

    fn ladder(&mut self, i: usize, t: &Table) -> Option<LadderSpec> {
        let sec = format!("[[ladder]] #{}", i + 1);
        let kind = match t.get("kind") {
            Some(Value::String(s)) => s.clone(),
            Some(other) => {
                self.type_error(&format!("{sec}.kind"), "a string", other);
                return None;
            }
            None => {
                self.errors.push(format!("{sec}: missing kind"));
                return None;
            }
        };
        let n_paths = match t.get("n_paths") {
            Some(Value::Integer(n)) if *n >= 0 => *n as usize,
            Some(other) => {
                self.type_error(&format!("{sec}.n_paths"), "a nonnegative integer", other);
                return None;
            }
            None => 16,
        };
        let missing = |r: &mut Self, key: &str| r.errors.push(format!("{sec}: missing {key}"));
        let spec = match kind.as_str() {
            "uniqueness" => {
                self.check_keys_ladder(t, &sec, &["eps_f_cells", "parabolic_factor"]);
                let eps = self.f64_list(t, &sec, "eps_f_cells");
                let mut factor = 0.25;
                if let Some(v) = t.get("parabolic_factor") {
                    match v {
                        Value::Float(x) => factor = *x,
                        Value::Integer(x) => factor = *x as f64,
                        other => self.type_error(&format!("{sec}.parabolic_factor"), "a number", other),
                    }
                }
                match eps {
                    Some(eps_f_cells) => LadderSpec::Uniqueness {
                        eps_f_cells,
                        parabolic_factor: factor,
                        n_paths,
                    },
                    None => {
                        missing(self, "eps_f_cells");
                        return None;
                    }
                }
            }
            "marching_gap" => {
                self.check_keys_ladder(t, &sec, &["n_steps"]);
                match self.usize_list(t, &sec, "n_steps") {
                    Some(n_steps) => LadderSpec::MarchingGap { n_steps, n_paths },
                    None => {
                        missing(self, "n_steps");
                        return None;
                    }
                }
            }
            "weak_residual" => {
                self.check_keys_ladder(t, &sec, &["n_cells", "n_steps"]);
                match (self.usize_list(t, &sec, "n_cells"), self.usize_list(t, &sec, "n_steps")) {
                    (Some(n_cells), Some(n_steps)) => LadderSpec::WeakResidual {
                        n_cells,
                        n_steps,
                        n_paths,
                    },
                    _ => {
                        missing(self, "n_cells and n_steps");
                        return None;
                    }
                }
            }
            "translation" => {
                self.check_keys_ladder(t, &sec, &["n_cells"]);
                match self.usize_list(t, &sec, "n_cells") {
                    Some(n_cells) => LadderSpec::Translation { n_cells, n_paths },
                    None => {
                        missing(self, "n_cells");
                        return None;
                    }
                }
            }
            "moment" => {
                self.check_keys_ladder(t, &sec, &["eps_f_cells"]);
                match self.f64_list(t, &sec, "eps_f_cells") {
                    Some(eps_f_cells) => LadderSpec::Moment { eps_f_cells, n_paths },
                    None => {
                        missing(self, "eps_f_cells");
                        return None;
                    }
                }
            }
            "commutator" => {
                self.check_keys_ladder(t, &sec, &["eps_cells", "control"]);
                let control = match t.get("control") {
                    Some(Value::String(s)) => s.clone(),
                    Some(other) => {
                        self.type_error(&format!("{sec}.control"), "a string", other);
                        return None;
                    }
                    None => "smooth_nonlocal".to_string(),
                };
                match self.f64_list(t, &sec, "eps_cells") {
                    Some(eps_cells) => LadderSpec::Commutator {
                        eps_cells,
                        control,
                        n_paths,
                    },
                    None => {
                        missing(self, "eps_cells");
                        return None;
                    }
                }
            }
            other => {
                self.errors.push(format!(
                    "{sec}.kind = {other:?}: expected uniqueness, marching_gap, weak_residual, translation, moment or commutator"
                ));
                return None;
            }
        };
        Some(spec)
    }

    fn check_keys_ladder(&mut self, t: &Table, sec: &str, extra: &[&str]) {
        for k in t.keys() {
            if !(k == "kind" || k == "n_paths" || extra.contains(&k.as_str())) {
                self.unknown(&format!("{sec}.{k}"));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_reference_is_fully_populated() {
        let cfg = parse_config("preset = \"smooth_nonlocal\"\n").unwrap();
        assert_eq!(cfg, presets::get("smooth_nonlocal").unwrap().config);
    }

    #[test]
    fn empty_document_is_the_zero_flux_base() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg.flux.model, "zero_flux");
        assert_eq!(cfg.preset, None);
    }

    #[test]
    fn flux_width_of_one_cell_is_rejected() {
        let err = parse_config("preset = \"zero_flux\"\n[regularization]\neps_f_cells = 1\n").unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert!(err.0[0].contains("eps_f_cells = 1"), "{err}");
    }

    #[test]
    fn zero_cells_is_rejected() {
        let err = parse_config("[grid]\nn_cells = 0\n").unwrap_err();
        assert!(err.0.iter().any(|e| e.contains("n_cells = 0")), "{err}");
    }

    #[test]
    fn every_violation_is_reported() {
        let text = "bogus = 1\n[grid]\nn_cells = \"many\"\nwidth = 3\n[run]\nscheme = \"rk4\"\n";
        let err = parse_config(text).unwrap_err();
        assert_eq!(err.0.len(), 4, "{err}");
    }

    #[test]
    fn step_rule_violation_names_the_step_count() {
        let text = "preset = \"linear_fgp2\"\n[regularization]\neps_f_cells = 4\n[time]\nn_steps = 8\nn_outputs = 4\n";
        let err = parse_config(text).unwrap_err();
        assert!(
            err.0
                .iter()
                .any(|e| e.contains("n_steps = 8") && e.contains("step rule")),
            "{err}"
        );
    }

    #[test]
    fn flux_overrides_apply_and_are_checked() {
        let cfg = parse_config("[flux]\nmodel = \"constant_drift\"\nvalue = 2.5\n").unwrap();
        let m = cfg.flux.build().unwrap();
        assert_eq!(m.value(0.3, 1.0, 4.0), 2.5);
        let err = parse_config("[flux]\nmodel = \"zero_flux\"\nradius = 2\n").unwrap_err();
        assert!(err.0[0].contains("does not apply"), "{err}");
    }

    #[test]
    fn documents_round_trip() {
        for p in presets::presets() {
            let text = p.config.to_toml();
            assert_eq!(parse_config(&text).unwrap(), p.config, "{}", p.name);
        }
    }
}
