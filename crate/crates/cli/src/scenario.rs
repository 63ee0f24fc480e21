//! Scenario documents: JSON with the keys `name`, `hbar`, `profile`, `shape`,
//! `window`, `grid`, `slicing` and `experiment`. Parsing collects every
//! violation before giving up.

use std::collections::BTreeSet;

use noether_paths::profiles::{CubicSpline, Profile, ScaleProfile, ShapeFunction};
use noether_paths::slicing::{Engine, SpatialGrid, WindowKind, MAX_REFINEMENT_Q};
use noether_paths::symmetry::SymmetrySystem;
use serde_json::{Map, Value};

use crate::error::CliError;

pub const PROFILES: [(&str, &str); 5] = [
    ("free", "rho = 1, a = 0 (V = 0)"),
    ("tdho_sqrt", "rho = sqrt(c0 + c1 t + c2 t^2), a = shift * rho; params c0 = 1, c1 = 0, c2 = 1, shift = 0"),
    ("static_oscillator", "rho = cos(omega t), a = 0 (V = omega^2 x^2 / 2); params omega = 1"),
    ("uniform_force", "rho = 1, a = -force t^2 / 2 (V = force x); params force = 1"),
    ("general", "rho and a given as function objects, a may be {\"kind\": \"proportional\", \"factor\": C}"),
];

pub const FUNCTIONS: [(&str, &str); 6] = [
    ("constant", "value"),
    ("polynomial", "coefficients [c0, c1, ...]"),
    ("cos", "amplitude * cos(omega t + phase)"),
    ("sqrt_quadratic", "sqrt(c0 + c1 t + c2 t^2)"),
    ("exp", "amplitude * exp(rate t)"),
    ("tabulated", "cubic spline through knots / values"),
];

pub const SHAPES: [(&str, &str); 6] = [
    ("zero", "F = 0"),
    ("constant", "F = value"),
    ("linear", "F = slope u"),
    ("quadratic", "F = k u^2 / 2"),
    ("quartic", "F = c u^4"),
    ("abs", "F = slope |u|"),
];

pub const EXPERIMENTS: [(&str, &str); 6] = [
    ("potential", "V and dV/dx on an x grid at several times; params x_min, x_max, points, times"),
    ("invariant", "classical flow and invariant drift; params x0, v0, tol"),
    ("henstock", "gauge-integral checks; params eps, tol"),
    ("slice-converge", "sliced standard amplitude for q = 1..q_max; params q_start, q_end, duration"),
    ("reduce-check", "reduced vs directly sliced propagator; params starts, ends, direct_q, field_points"),
    ("semigroup", "evolution-family laws and growth bound; params dtheta, slices, center, width, horizon, separation_min, growth_nodes"),
];

#[derive(Debug, Clone)]
pub struct SlicingConfig {
    pub q_max: u32,
    pub tol: f64,
    pub engine: Engine,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    Potential {
        x_min: f64,
        x_max: f64,
        points: usize,
        times: Vec<f64>,
    },
    Invariant {
        x0: f64,
        v0: f64,
        tol: f64,
    },
    Henstock {
        eps: f64,
        tol: f64,
    },
    SliceConverge {
        q_start: f64,
        q_end: f64,
        duration: f64,
    },
    ReduceCheck {
        starts: Vec<f64>,
        ends: Vec<f64>,
        direct_q: u32,
        field_points: usize,
    },
    Semigroup {
        dtheta: f64,
        slices: usize,
        center: f64,
        width: f64,
        horizon: f64,
        separation_min: f64,
        growth_nodes: usize,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Potential { .. } => "potential",
            Experiment::Invariant { .. } => "invariant",
            Experiment::Henstock { .. } => "henstock",
            Experiment::SliceConverge { .. } => "slice-converge",
            Experiment::ReduceCheck { .. } => "reduce-check",
            Experiment::Semigroup { .. } => "semigroup",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub hbar: f64,
    pub profile_name: String,
    pub shape_name: String,
    pub window: (f64, f64),
    pub grid: SpatialGrid,
    pub slicing: SlicingConfig,
    pub experiment: Experiment,
    pub system: SymmetrySystem,
}

/// Reads typed fields out of a JSON object, recording violations under a
/// dotted context path.
struct Fields<'a> {
    context: String,
    map: Option<&'a Map<String, Value>>,
    seen: BTreeSet<String>,
}

impl<'a> Fields<'a> {
    fn new(context: &str, value: Option<&'a Value>, errors: &mut Vec<String>) -> Self {
        let map = match value {
            None | Some(Value::Null) => None,
            Some(Value::Object(m)) => Some(m),
            Some(_) => {
                errors.push(format!("{context} must be an object"));
                None
            }
        };
        Self { context: context.to_string(), map, seen: BTreeSet::new() }
    }

    fn path(&self, key: &str) -> String {
        if self.context.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.context)
        }
    }

    fn get(&mut self, key: &str) -> Option<&'a Value> {
        self.seen.insert(key.to_string());
        self.map.and_then(|m| m.get(key)).filter(|v| !v.is_null())
    }

    fn number(&mut self, key: &str, default: f64, errors: &mut Vec<String>) -> f64 {
        match self.get(key) {
            None => default,
            Some(v) => match v.as_f64() {
                Some(x) if x.is_finite() => x,
                _ => {
                    errors.push(format!("{} must be a finite number", self.path(key)));
                    default
                }
            },
        }
    }

    fn positive(&mut self, key: &str, default: f64, errors: &mut Vec<String>) -> f64 {
        let v = self.number(key, default, errors);
        if v <= 0.0 {
            errors.push(format!("{} must be positive, got {v}", self.path(key)));
        }
        v
    }

    fn count(&mut self, key: &str, default: usize, min: usize, errors: &mut Vec<String>) -> usize {
        match self.get(key) {
            None => default,
            Some(v) => match v.as_u64() {
                Some(n) if n as usize >= min => n as usize,
                _ => {
                    errors.push(format!("{} must be an integer of at least {min}", self.path(key)));
                    default
                }
            },
        }
    }

    fn numbers(&mut self, key: &str, default: &[f64], errors: &mut Vec<String>) -> Vec<f64> {
        match self.get(key) {
            None => default.to_vec(),
            Some(Value::Array(items)) => {
                let out: Vec<f64> = items.iter().filter_map(|v| v.as_f64().filter(|x| x.is_finite())).collect();
                if out.len() != items.len() {
                    errors.push(format!("{} must contain only finite numbers", self.path(key)));
                }
                out
            }
            Some(_) => {
                errors.push(format!("{} must be an array of numbers", self.path(key)));
                default.to_vec()
            }
        }
    }

    fn text(&mut self, key: &str, default: &str, errors: &mut Vec<String>) -> String {
        match self.get(key) {
            None => default.to_string(),
            Some(Value::String(s)) => s.clone(),
            Some(_) => {
                errors.push(format!("{} must be a string", self.path(key)));
                default.to_string()
            }
        }
    }

    fn finish(self, errors: &mut Vec<String>) {
        if let Some(m) = self.map {
            for key in m.keys().filter(|k| !self.seen.contains(*k)) {
                errors.push(format!("unknown key {}", self.path(key)));
            }
        }
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| CliError::config(format!("syntax error: {e}")))?;
    let mut errors = Vec::new();
    let mut top = Fields::new("", Some(&doc), &mut errors);
    if top.map.is_none() {
        return Err(CliError::config("the scenario document must be a JSON object"));
    }
    let name = top.text("name", "", &mut errors);
    if name.is_empty() {
        errors.push("name must be a non-empty string".into());
    } else if !name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
        errors.push(format!("name {name:?} may only contain letters, digits, '-', '_' and '.'"));
    }
    let hbar = top.positive("hbar", 1.0, &mut errors);
    let window = parse_window(top.get("window"), &mut errors);
    let (profile_name, profile) = parse_profile(top.get("profile"), &mut errors);
    let (shape_name, shape) = parse_shape(top.get("shape"), &mut errors);
    let grid = parse_grid(top.get("grid"), &mut errors);
    let slicing = parse_slicing(top.get("slicing"), &mut errors);
    let experiment = parse_experiment(top.get("experiment"), window, &mut errors);
    top.finish(&mut errors);
    if !errors.is_empty() {
        return Err(CliError::Config(errors));
    }
    let (profile, experiment) = (profile.expect("checked above"), experiment.expect("checked above"));
    let system = SymmetrySystem::new(profile, shape.expect("checked above"), hbar, window)?;
    Ok(Scenario { name, hbar, profile_name, shape_name, window, grid, slicing, experiment, system })
}

fn parse_window(value: Option<&Value>, errors: &mut Vec<String>) -> (f64, f64) {
    match value {
        None => (0.0, 1.0),
        Some(Value::Array(v)) if v.len() == 2 => match (v[0].as_f64(), v[1].as_f64()) {
            (Some(a), Some(b)) if a.is_finite() && b.is_finite() && a < b => (a, b),
            _ => {
                errors.push("window must be two finite increasing numbers".into());
                (0.0, 1.0)
            }
        },
        Some(_) => {
            errors.push("window must be an array [t0, t1]".into());
            (0.0, 1.0)
        }
    }
}

fn parse_function(
    context: &str,
    value: Option<&Value>,
    rho: Option<&Profile>,
    errors: &mut Vec<String>,
) -> Option<Profile> {
    if value.is_none() {
        errors.push(format!("{context} is required for the general profile"));
        return None;
    }
    let mut f = Fields::new(context, value, errors);
    let kind = f.text("kind", "", errors);
    let profile = match kind.as_str() {
        "constant" => Some(Profile::Constant(f.number("value", 0.0, errors))),
        "polynomial" => {
            let c = f.numbers("coefficients", &[0.0], errors);
            if c.is_empty() {
                errors.push(format!("{context}.coefficients must not be empty"));
            }
            Some(Profile::Polynomial(c))
        }
        "cos" => Some(Profile::Cos {
            amplitude: f.number("amplitude", 1.0, errors),
            omega: f.number("omega", 1.0, errors),
            phase: f.number("phase", 0.0, errors),
        }),
        "sqrt_quadratic" => Some(Profile::SqrtQuadratic {
            c0: f.number("c0", 1.0, errors),
            c1: f.number("c1", 0.0, errors),
            c2: f.number("c2", 1.0, errors),
        }),
        "exp" => {
            Some(Profile::Exp { amplitude: f.number("amplitude", 1.0, errors), rate: f.number("rate", 0.0, errors) })
        }
        "tabulated" => {
            let knots = f.numbers("knots", &[], errors);
            let values = f.numbers("values", &[], errors);
            match CubicSpline::new(knots, values) {
                Ok(s) => Some(Profile::Tabulated(s)),
                Err(e) => {
                    errors.push(format!("{context}: {e}"));
                    None
                }
            }
        }
        "proportional" => match rho {
            Some(rho) => Some(rho.clone().scaled(f.number("factor", 0.0, errors))),
            None => {
                errors.push(format!("{context}: a proportional function needs a valid rho"));
                None
            }
        },
        other => {
            let known: Vec<&str> = FUNCTIONS.iter().map(|f| f.0).collect();
            errors.push(format!("{context}.kind {other:?} is not one of {}", known.join(", ")));
            None
        }
    };
    f.finish(errors);
    profile
}

fn parse_profile(value: Option<&Value>, errors: &mut Vec<String>) -> (String, Option<ScaleProfile>) {
    let mut f = Fields::new("profile", value, errors);
    let name = f.text("name", "free", errors);
    let (rho_doc, a_doc) = (f.get("rho"), f.get("a"));
    let mut p = Fields::new("profile.params", f.get("params"), errors);
    if name != "general" && (rho_doc.is_some() || a_doc.is_some()) {
        errors.push(format!("profile.rho and profile.a are only used by the general profile, not {name:?}"));
    }
    let scale = match name.as_str() {
        "free" => Some(ScaleProfile::identity()),
        "tdho_sqrt" => {
            let rho = Profile::SqrtQuadratic {
                c0: p.number("c0", 1.0, errors),
                c1: p.number("c1", 0.0, errors),
                c2: p.number("c2", 1.0, errors),
            };
            let shift = p.number("shift", 0.0, errors);
            Some(ScaleProfile::new(rho.clone(), rho.scaled(shift)))
        }
        "static_oscillator" => {
            let omega = p.positive("omega", 1.0, errors);
            Some(ScaleProfile::new(Profile::Cos { amplitude: 1.0, omega, phase: 0.0 }, Profile::Constant(0.0)))
        }
        "uniform_force" => {
            let force = p.number("force", 1.0, errors);
            Some(ScaleProfile::new(Profile::Constant(1.0), Profile::Polynomial(vec![0.0, 0.0, -0.5 * force])))
        }
        "general" => {
            let rho = parse_function("profile.rho", rho_doc, None, errors);
            let a = match a_doc {
                None => Some(Profile::Constant(0.0)),
                Some(_) => parse_function("profile.a", a_doc, rho.as_ref(), errors),
            };
            rho.zip(a).map(|(rho, a)| ScaleProfile::new(rho, a))
        }
        other => {
            let known: Vec<&str> = PROFILES.iter().map(|p| p.0).collect();
            errors.push(format!("profile.name {other:?} is not one of {}", known.join(", ")));
            None
        }
    };
    p.finish(errors);
    f.finish(errors);
    (name, scale)
}

fn parse_shape(value: Option<&Value>, errors: &mut Vec<String>) -> (String, Option<ShapeFunction>) {
    let mut f = Fields::new("shape", value, errors);
    let name = f.text("name", "zero", errors);
    let mut p = Fields::new("shape.params", f.get("params"), errors);
    let shape = match name.as_str() {
        "zero" => Some(ShapeFunction::Zero),
        "constant" => Some(ShapeFunction::Constant(p.number("value", 0.0, errors))),
        "linear" => Some(ShapeFunction::Linear(p.number("slope", 1.0, errors))),
        "quadratic" => Some(ShapeFunction::Quadratic(p.number("k", 1.0, errors))),
        "quartic" => Some(ShapeFunction::Quartic(p.number("c", 1.0, errors))),
        "abs" => Some(ShapeFunction::Abs(p.number("slope", 1.0, errors))),
        other => {
            let known: Vec<&str> = SHAPES.iter().map(|s| s.0).collect();
            errors.push(format!("shape.name {other:?} is not one of {}", known.join(", ")));
            None
        }
    };
    p.finish(errors);
    f.finish(errors);
    (name, shape)
}

fn parse_grid(value: Option<&Value>, errors: &mut Vec<String>) -> SpatialGrid {
    let default = SpatialGrid::default();
    let mut f = Fields::new("grid", value, errors);
    let x_min = f.number("x_min", default.x_min(), errors);
    let x_max = f.number("x_max", default.x_max(), errors);
    let n = f.count("n", default.len(), 64, errors);
    let window = match f.text("window", "cosine", errors).as_str() {
        "cosine" => WindowKind::Cosine,
        "none" => WindowKind::None,
        other => {
            errors.push(format!("grid.window {other:?} is not one of cosine, none"));
            WindowKind::Cosine
        }
    };
    f.finish(errors);
    match SpatialGrid::new(x_min, x_max, n, window) {
        Ok(g) => g,
        Err(e) => {
            errors.push(format!("grid: {e}"));
            default
        }
    }
}

fn parse_slicing(value: Option<&Value>, errors: &mut Vec<String>) -> SlicingConfig {
    let mut f = Fields::new("slicing", value, errors);
    let q_max = f.count("q_max", 8, 1, errors);
    if q_max > MAX_REFINEMENT_Q as usize {
        errors.push(format!("slicing.q_max must be at most {MAX_REFINEMENT_Q}, got {q_max}"));
    }
    let tol = f.positive("tol", 1e-6, errors);
    let engine = match f.text("engine", "auto", errors).as_str() {
        "auto" => Engine::Auto,
        "grid" => Engine::Grid,
        "analytic" => Engine::Analytic,
        other => {
            errors.push(format!("slicing.engine {other:?} is not one of auto, grid, analytic"));
            Engine::Auto
        }
    };
    f.finish(errors);
    SlicingConfig { q_max: q_max.min(MAX_REFINEMENT_Q as usize) as u32, tol, engine }
}

fn parse_experiment(value: Option<&Value>, window: (f64, f64), errors: &mut Vec<String>) -> Option<Experiment> {
    let (kind, params) = match value {
        None => {
            errors.push("experiment is required".into());
            return None;
        }
        Some(Value::String(s)) => (s.clone(), None),
        Some(v @ Value::Object(m)) => match m.get("kind").and_then(Value::as_str) {
            Some(k) => (k.to_string(), Some(v)),
            None => {
                errors.push("experiment.kind must name the experiment".into());
                return None;
            }
        },
        Some(_) => {
            errors.push("experiment must be a name or an object with a kind".into());
            return None;
        }
    };
    let mut p = Fields::new("experiment", params, errors);
    p.get("kind");
    let (t0, t1) = window;
    let experiment = match kind.as_str() {
        "potential" => {
            let x_min = p.number("x_min", -5.0, errors);
            let x_max = p.number("x_max", 5.0, errors);
            if x_min >= x_max {
                errors.push("experiment.x_min must be below experiment.x_max".into());
            }
            let points = p.count("points", 101, 2, errors);
            let default_times: Vec<f64> = (0..5).map(|i| t0 + (t1 - t0) * i as f64 / 4.0).collect();
            let times = p.numbers("times", &default_times, errors);
            if times.iter().any(|t| *t < t0 || *t > t1) {
                errors.push("experiment.times must lie inside the window".into());
            }
            Some(Experiment::Potential { x_min, x_max, points, times })
        }
        "invariant" => {
            let x0 = p.number("x0", 1.0, errors);
            let v0 = p.number("v0", 0.0, errors);
            let tol = p.positive("tol", 1e-10, errors);
            Some(Experiment::Invariant { x0, v0, tol })
        }
        "henstock" => {
            let eps = p.positive("eps", 1e-3, errors);
            let tol = p.positive("tol", 1e-10, errors);
            Some(Experiment::Henstock { eps, tol })
        }
        "slice-converge" => {
            let q_start = p.number("q_start", 0.0, errors);
            let q_end = p.number("q_end", 0.0, errors);
            let duration = p.positive("duration", t1 - t0, errors);
            Some(Experiment::SliceConverge { q_start, q_end, duration })
        }
        "reduce-check" => {
            let starts = p.numbers("starts", &[-1.0, 0.0, 0.5], errors);
            let ends = p.numbers("ends", &[-0.5, 0.3, 1.0], errors);
            if starts.is_empty() || ends.is_empty() {
                errors.push("experiment.starts and experiment.ends must not be empty".into());
            }
            let direct_q = p.count("direct_q", 12, 1, errors);
            if direct_q > MAX_REFINEMENT_Q as usize {
                errors.push(format!("experiment.direct_q must be at most {MAX_REFINEMENT_Q}"));
            }
            let field_points = p.count("field_points", 0, 0, errors);
            Some(Experiment::ReduceCheck { starts, ends, direct_q: direct_q as u32, field_points })
        }
        "semigroup" => {
            let dtheta = p.positive("dtheta", 0.5, errors);
            let slices = p.count("slices", 3, 2, errors);
            let center = p.number("center", 0.5, errors);
            let width = p.positive("width", 1.0, errors);
            let horizon = p.positive("horizon", (t1 - t0).min(2.0), errors);
            let separation_min = p.positive("separation_min", 0.5f64.min(horizon), errors);
            let growth_nodes = p.count("growth_nodes", 3, 2, errors);
            if t0 + ((slices - 1) as f64).max(2.0) * dtheta > t1 + 1e-12 {
                errors.push("experiment: the theta grid must fit inside the window".into());
            }
            if horizon > t1 - t0 + 1e-12 {
                errors.push("experiment.horizon must fit inside the window".into());
            }
            Some(Experiment::Semigroup { dtheta, slices, center, width, horizon, separation_min, growth_nodes })
        }
        other => {
            let known: Vec<&str> = EXPERIMENTS.iter().map(|e| e.0).collect();
            errors.push(format!("experiment {other:?} is not one of {}", known.join(", ")));
            None
        }
    };
    p.finish(errors);
    experiment
}
