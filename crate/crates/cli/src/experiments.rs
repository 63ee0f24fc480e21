//! Dispatch from a parsed scenario to the library, producing result tables.

use std::f64::consts::PI;

use noether_paths::gauge::{
    build_division, division_with_forced_tags, integrate_1d, riemann_sum, DirichletExample, ExtInterval, Gauge1D,
    IntegrationOptions,
};
use noether_paths::reduction::{build_reduction, direct_propagator, FreeStandard, SlicedStandard, StandardPropagator};
use noether_paths::semigroup::{
    evolution_weight, grid_norm, growth_bound_estimate, howland_apply, right_translate_state, u_apply, GridFunction,
    HalfLineState, Kernel, KernelFamily, ReducedKernel,
};
use noether_paths::slicing::{free_kernel, refine_with, Engine, SliceIntegrand};
use noether_paths::symmetry::{el_flow, invariant_drift};
use noether_paths::{Error, Result as CoreResult};
use num_complex::Complex64;
use serde_json::{json, Map, Value};

use crate::error::CliError;
use crate::scenario::{Experiment, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// `None` for the primary table, otherwise appended to the file stem.
    pub suffix: Option<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(suffix: Option<&str>, columns: &[&str]) -> Self {
        Self {
            suffix: suffix.map(str::to_string),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub scenario: String,
    pub experiment: &'static str,
    pub tables: Vec<Table>,
    /// Headline numbers, written to the sidecar metadata.
    pub summary: Map<String, Value>,
    pub tolerances: Map<String, Value>,
}

use Cell::{Int, Num, Text};

pub fn run_scenario(s: &Scenario) -> Result<ResultRecord, CliError> {
    let mut record = ResultRecord {
        scenario: s.name.clone(),
        experiment: s.experiment.name(),
        tables: Vec::new(),
        summary: Map::new(),
        tolerances: Map::new(),
    };
    match &s.experiment {
        Experiment::Potential { x_min, x_max, points, times } => {
            potential(s, &mut record, *x_min, *x_max, *points, times)?
        }
        Experiment::Invariant { x0, v0, tol } => invariant(s, &mut record, *x0, *v0, *tol)?,
        Experiment::Henstock { eps, tol } => henstock(&mut record, *eps, *tol)?,
        Experiment::SliceConverge { q_start, q_end, duration } => {
            slice_converge(s, &mut record, *q_start, *q_end, *duration)?
        }
        Experiment::ReduceCheck { starts, ends, direct_q, field_points } => {
            reduce_check(s, &mut record, starts, ends, *direct_q, *field_points)?
        }
        Experiment::Semigroup { .. } => semigroup(s, &mut record)?,
    }
    Ok(record)
}

fn potential(
    s: &Scenario,
    r: &mut ResultRecord,
    x_min: f64,
    x_max: f64,
    points: usize,
    times: &[f64],
) -> CoreResult<()> {
    let mut t = Table::new(None, &["t", "x", "V", "dV_dx"]);
    for &time in times {
        let slice = s.system.potential_slice(time)?;
        for i in 0..points {
            let x = x_min + (x_max - x_min) * i as f64 / (points - 1) as f64;
            t.push(vec![Num(time), Num(x), Num(slice.value(x)), Num(slice.gradient(x))]);
        }
    }
    r.tables.push(t);
    Ok(())
}

fn invariant(s: &Scenario, r: &mut ResultRecord, x0: f64, v0: f64, tol: f64) -> CoreResult<()> {
    let (t0, t1) = s.window;
    let path = el_flow(&s.system, x0, v0, t0, t1, tol)?;
    let (i0, drift) = invariant_drift(&s.system, &path)?;
    let mut t = Table::new(None, &["t", "x", "v", "invariant", "drift"]);
    for k in 0..path.len() {
        let i = s.system.invariant_at(path.positions[k], path.velocities[k], path.times[k])?;
        t.push(vec![Num(path.times[k]), Num(path.positions[k]), Num(path.velocities[k]), Num(i), Num((i - i0).abs())]);
    }
    r.tables.push(t);
    r.summary.insert("initial_invariant".into(), json!(i0));
    r.summary.insert("max_drift".into(), json!(drift));
    r.summary.insert("relative_drift".into(), json!(drift / i0.abs().max(1.0)));
    r.tolerances.insert("integrator".into(), json!(tol));
    Ok(())
}

fn henstock(r: &mut ResultRecord, eps: f64, tol: f64) -> CoreResult<()> {
    let unit = ExtInterval::bounded(0.0, 1.0)?;
    let ex = DirichletExample::new(eps)?;
    let opts = IntegrationOptions::default();
    let mut t = Table::new(None, &["case", "value", "expected", "abs_error", "division_checks"]);
    let mut row = |case: &str, value: f64, expected: f64, checks: Option<bool>| {
        let checks = checks.map_or(Cell::Empty, |c| Int(c as i64));
        t.push(vec![Text(case.into()), Num(value), Num(expected), Num((value - expected).abs()), checks]);
    };
    let irrational = build_division(&unit, &ex.gauge)?;
    let ok =
        irrational.tiles(&unit) && irrational.is_fine(&ex.gauge)? && irrational.all_tags_avoid(ex.gauge.exceptional());
    row("dirichlet_irrational_tags", riemann_sum(|x, i| ex.h(x, i), &irrational), 1.0, Some(ok));
    let forced = division_with_forced_tags(&unit, &ex.gauge, &ex.rationals())?;
    let ok = forced.tiles(&unit) && forced.is_fine(&ex.gauge)?;
    row("dirichlet_rational_tags", riemann_sum(|x, i| ex.h(x, i), &forced), 1.0, Some(ok));
    let square = integrate_1d(|x, i| x * x * i.length(), &unit, tol, &opts)?;
    row("x_squared_on_unit", square.value, 1.0 / 3.0, None);
    let tail_domain = ExtInterval::right_unbounded(1.0)?;
    let tail = integrate_1d(|x, i| i.length() / (x * x), &tail_domain, tol, &opts)?;
    let tail_gauge = Gauge1D::constant(0.01)?;
    let d = build_division(&tail_domain, &tail_gauge)?;
    let ok = d.tiles(&tail_domain) && d.is_fine(&tail_gauge)?;
    row("inverse_square_on_tail", tail.value, 1.0, Some(ok));
    r.tables.push(t);
    r.tolerances.insert("eps".into(), json!(eps));
    r.tolerances.insert("integral".into(), json!(tol));
    Ok(())
}

fn slice_converge(s: &Scenario, r: &mut ResultRecord, q_start: f64, q_end: f64, duration: f64) -> CoreResult<()> {
    let f = SliceIntegrand::new(s.system.shape().clone(), s.hbar, q_start, q_end)?;
    let est = refine_with(s.slicing.engine, &f, (0.0, duration), &s.grid, s.slicing.q_max, s.slicing.tol)?;
    let mut t = Table::new(None, &["q", "m", "re_gamma", "im_gamma", "cauchy_gap"]);
    for (i, &(q, v)) in est.values.iter().enumerate() {
        let gap = if i == 0 { Cell::Empty } else { Num(est.cauchy_gaps[i - 1]) };
        t.push(vec![Int(q as i64), Int(1i64 << q), Num(v.re), Num(v.im), gap]);
    }
    r.tables.push(t);
    r.summary.insert("converged".into(), json!(est.converged));
    r.summary.insert("converged_at".into(), json!(est.converged_at));
    r.summary.insert("gaps_decreasing".into(), json!(est.gaps_decreasing));
    r.summary.insert("gap_ratios".into(), json!(est.gap_ratios()));
    if s.system.shape().is_zero() {
        let exact = free_kernel(q_end, q_start, duration, s.hbar);
        r.summary
            .insert("relative_error_vs_free_kernel".into(), json!((est.final_value - exact).norm() / exact.norm()));
    }
    r.tolerances.insert("cauchy".into(), json!(s.slicing.tol));
    Ok(())
}

fn standard(s: &Scenario, q: u32) -> Box<dyn StandardPropagator + Send + Sync> {
    if s.system.shape().is_zero() {
        Box::new(FreeStandard { hbar: s.hbar })
    } else {
        Box::new(SlicedStandard::for_system(&s.system, s.slicing.engine, s.grid, q))
    }
}

fn reduce_check(
    s: &Scenario,
    r: &mut ResultRecord,
    starts: &[f64],
    ends: &[f64],
    direct_q: u32,
    field_points: usize,
) -> CoreResult<()> {
    let (t0, t1) = s.window;
    let rd = build_reduction(s.system.clone())?;
    let kbar = standard(s, s.slicing.q_max);
    let mut t = Table::new(None, &["x0", "x1", "re_reduced", "im_reduced", "re_direct", "im_direct", "rel_diff"]);
    let mut worst = 0.0f64;
    for &x0 in starts {
        for &x1 in ends {
            let reduced = rd.assemble(kbar.as_ref(), x1, t1, x0, t0)?;
            let direct = direct_propagator(&s.system, Engine::Grid, &s.grid, direct_q, x1, t1, x0, t0)?;
            let diff = (direct - reduced).norm() / reduced.norm();
            worst = worst.max(diff);
            t.push(vec![Num(x0), Num(x1), Num(reduced.re), Num(reduced.im), Num(direct.re), Num(direct.im), Num(diff)]);
        }
    }
    r.tables.push(t);
    if field_points >= 2 {
        let (lo, hi) = s.grid.interior();
        let mut field = Table::new(Some("field"), &["x", "re_K", "im_K", "abs_K"]);
        let k = rd.kernel_between(kbar.as_ref(), t1, t0)?;
        for i in 0..field_points {
            let x = lo + (hi - lo) * i as f64 / (field_points - 1) as f64;
            let v = k(x, starts[0])?;
            field.push(vec![Num(x), Num(v.re), Num(v.im), Num(v.norm())]);
        }
        r.tables.push(field);
    }
    r.summary.insert("max_rel_diff".into(), json!(worst));
    r.tolerances.insert("direct_slices".into(), json!(1u64 << direct_q));
    Ok(())
}

/// Kernel whose time arguments are measured from `origin`.
struct Offset<K> {
    inner: K,
    origin: f64,
}

impl<K: Kernel> Kernel for Offset<K> {
    fn between(&self, theta: f64, tau: f64) -> CoreResult<Box<dyn Fn(f64, f64) -> Complex64 + Sync + '_>> {
        self.inner.between(self.origin + theta, self.origin + tau)
    }
}

fn semigroup(s: &Scenario, r: &mut ResultRecord) -> CoreResult<()> {
    let Experiment::Semigroup { dtheta, slices, center, width, horizon, separation_min, growth_nodes } = s.experiment
    else {
        unreachable!("dispatched on the experiment kind");
    };
    if !s.system.shape().is_zero() {
        return Err(Error::Invalid(
            "the semigroup experiment needs shape zero, so that the kernel is closed form".into(),
        ));
    }
    let grid = s.grid;
    let reduction = build_reduction(s.system.clone())?;
    let kernel =
        Offset { inner: ReducedKernel { reduction, standard: FreeStandard { hbar: s.hbar } }, origin: s.window.0 };
    let fam = KernelFamily::new(kernel, grid);
    let norm = (2.0 * PI * width * width).powf(-0.25);
    let packet = |x: f64| Complex64::new(norm * (-(x - center).powi(2) / (4.0 * width * width)).exp(), 0.0);
    let psi: GridFunction = (0..grid.len()).map(|j| packet(grid.x(j))).collect();
    let h = HalfLineState::from_fn(&grid, dtheta, slices, |theta, x| {
        packet(x - theta) * Complex64::from_polar(1.0, 0.2 * x)
    })?;
    let diff =
        |a: &[Complex64], b: &[Complex64]| grid_norm(&grid, &a.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>());
    let state_diff = |a: &HalfLineState, b: &HalfLineState| {
        (a.slices().iter().zip(b.slices()).map(|(x, y)| diff(x, y).powi(2)).sum::<f64>() * dtheta).sqrt()
    };

    let identity = diff(&u_apply(&fam, &psi, dtheta, dtheta)?, &psi) / grid_norm(&grid, &psi);
    let cocycle = {
        let direct = u_apply(&fam, &psi, 2.0 * dtheta, 0.0)?;
        let composed = u_apply(&fam, &u_apply(&fam, &psi, dtheta, 0.0)?, 2.0 * dtheta, dtheta)?;
        diff(&composed, &direct) / grid_norm(&grid, &psi)
    };
    let howland_zero = howland_apply(&fam, &h, 0.0)? == h;
    let two = howland_apply(&fam, &howland_apply(&fam, &h, dtheta)?, dtheta)?;
    let one = howland_apply(&fam, &h, 2.0 * dtheta)?;
    let composition = state_diff(&two, &one) / h.norm(&grid);
    let factored = evolution_weight(&fam, &right_translate_state(&h, 2.0 * dtheta)?, 2.0 * dtheta)? == one;
    let growth = growth_bound_estimate(&fam, horizon, separation_min, growth_nodes)?;

    let mut t = Table::new(None, &["law", "value", "tolerance", "passed"]);
    let mut row = |law: &str, value: f64, tol: Option<f64>, passed: bool| {
        t.push(vec![Text(law.into()), Num(value), tol.map_or(Cell::Empty, Num), Int(passed as i64)]);
    };
    row("identity", identity, Some(1e-10), identity <= 1e-10);
    row("cocycle", cocycle, Some(1e-6), cocycle <= 1e-6);
    row("howland_identity", if howland_zero { 0.0 } else { 1.0 }, Some(0.0), howland_zero);
    row("howland_composition", composition, Some(1e-6), composition <= 1e-6);
    row("weighted_translation", if factored { 0.0 } else { 1.0 }, Some(0.0), factored);
    row("growth_bound", growth.omega_hat, None, true);
    r.tables.push(t);
    let mut samples = Table::new(Some("growth"), &["theta", "tau", "log_norm"]);
    for &(theta, tau, l) in &growth.samples {
        samples.push(vec![Num(theta), Num(tau), Num(l)]);
    }
    r.tables.push(samples);
    r.summary.insert("omega_hat".into(), json!(growth.omega_hat));
    r.summary.insert("exponentially_stable".into(), json!(growth.exponentially_stable()));
    r.tolerances.insert("separation_min".into(), json!(separation_min));
    Ok(())
}
