//! Noether-reducible systems: the potential induced by a scale/shift pair,
//! its quadratic invariant, the symmetry transform of paths, and the
//! classical flow and action used to check them.

use crate::error::{Error, Result};
use crate::ode::dopri5;
use crate::profiles::{ProfileSample, ScaleProfile, ShapeFunction};
use crate::quad::{hermite, GL4_NODES, GL4_WEIGHTS};

/// Number of sample points used to validate `rho > 0` over the window.
const POSITIVITY_SAMPLES: usize = 1025;
const DERIVATIVE_SAMPLES: usize = 33;
const DERIVATIVE_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct SymmetrySystem {
    profile: ScaleProfile,
    shape: ShapeFunction,
    hbar: f64,
    window: (f64, f64),
}

impl SymmetrySystem {
    pub fn new(profile: ScaleProfile, shape: ShapeFunction, hbar: f64, window: (f64, f64)) -> Result<Self> {
        let (t0, t1) = window;
        if !(t0.is_finite() && t1.is_finite() && t0 < t1) {
            return Err(Error::Invalid(format!("window [{t0}, {t1}] must be finite and increasing")));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::Invalid(format!("hbar must be positive, got {hbar}")));
        }
        for i in 0..POSITIVITY_SAMPLES {
            let t = t0 + (t1 - t0) * i as f64 / (POSITIVITY_SAMPLES - 1) as f64;
            let rho = profile.rho.value(t);
            if !(rho > 0.0) {
                return Err(Error::Domain(format!("rho({t}) = {rho} is not positive on the window")));
            }
        }
        profile.rho.check_derivatives(window, DERIVATIVE_SAMPLES, DERIVATIVE_REL_TOL)?;
        profile.a.check_derivatives(window, DERIVATIVE_SAMPLES, DERIVATIVE_REL_TOL)?;
        Ok(Self { profile, shape, hbar, window })
    }

    /// Free particle on `window` with `hbar = 1`.
    pub fn free(window: (f64, f64)) -> Result<Self> {
        Self::new(ScaleProfile::identity(), ShapeFunction::Zero, 1.0, window)
    }

    pub fn profile(&self) -> &ScaleProfile {
        &self.profile
    }

    pub fn shape(&self) -> &ShapeFunction {
        &self.shape
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    /// Profile values at `t`, failing outside the window or where `rho <= 0`.
    pub fn sample(&self, t: f64) -> Result<ProfileSample> {
        let (t0, t1) = self.window;
        let slack = 1e-12 * (t1 - t0).max(1.0);
        if !(t >= t0 - slack && t <= t1 + slack) {
            return Err(Error::Domain(format!("t = {t} lies outside the window [{t0}, {t1}]")));
        }
        let s = self.profile.sample(t);
        if !(s.rho > 0.0) {
            return Err(Error::Domain(format!("rho({t}) = {} is not positive", s.rho)));
        }
        Ok(s)
    }

    /// Time-frozen coefficients of the potential.
    pub fn potential_slice(&self, t: f64) -> Result<PotentialSlice<'_>> {
        let s = self.sample(t)?;
        Ok(PotentialSlice {
            linear: (s.rho_d2 * s.a - s.rho * s.a_d2) / s.rho,
            quadratic: -0.5 * s.rho_d2 / s.rho,
            rho: s.rho,
            a: s.a,
            shape: &self.shape,
        })
    }

    pub fn potential_at(&self, x: f64, t: f64) -> Result<f64> {
        Ok(self.potential_slice(t)?.value(x))
    }

    /// Analytic `dV/dx`.
    pub fn potential_gradient(&self, x: f64, t: f64) -> Result<f64> {
        Ok(self.potential_slice(t)?.gradient(x))
    }

    pub fn invariant_at(&self, x: f64, v: f64, t: f64) -> Result<f64> {
        let s = self.sample(t)?;
        let momentum_like = s.rho * (v - s.a_d1) - s.rho_d1 * (x - s.a);
        Ok(0.5 * momentum_like * momentum_like + self.shape.value((x - s.a) / s.rho))
    }
}

/// `V(x)` at a fixed time: `linear * x + quadratic * x^2 + F((x - a)/rho) / rho^2`.
#[derive(Debug, Clone, Copy)]
pub struct PotentialSlice<'a> {
    pub linear: f64,
    pub quadratic: f64,
    pub rho: f64,
    pub a: f64,
    shape: &'a ShapeFunction,
}

impl PotentialSlice<'_> {
    pub fn value(&self, x: f64) -> f64 {
        let u = (x - self.a) / self.rho;
        self.linear * x + self.quadratic * x * x + self.shape.value(u) / (self.rho * self.rho)
    }

    pub fn gradient(&self, x: f64) -> f64 {
        let u = (x - self.a) / self.rho;
        self.linear + 2.0 * self.quadratic * x + self.shape.d1(u) / (self.rho * self.rho * self.rho)
    }
}

/// Sampled path `(t, x(t), v(t))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub integrator_tol: f64,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, positions: Vec<f64>, velocities: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || positions.len() != times.len() || velocities.len() != times.len() {
            return Err(Error::Invalid("trajectory needs at least two samples of equal length".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invalid("trajectory times must be strictly increasing".into()));
        }
        Ok(Self { times, positions, velocities, integrator_tol: 0.0 })
    }

    /// Samples an analytic path `x(t)` with velocity `v(t)` on a uniform grid.
    pub fn from_fn(t0: f64, t1: f64, n: usize, x: impl Fn(f64) -> f64, v: impl Fn(f64) -> f64) -> Result<Self> {
        let times = uniform(t0, t1, n.max(2));
        let positions = times.iter().map(|&t| x(t)).collect();
        let velocities = times.iter().map(|&t| v(t)).collect();
        Self::new(times, positions, velocities)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn first_state(&self) -> (f64, f64, f64) {
        (self.times[0], self.positions[0], self.velocities[0])
    }

    pub fn last_state(&self) -> (f64, f64, f64) {
        let i = self.len() - 1;
        (self.times[i], self.positions[i], self.velocities[i])
    }
}

fn uniform(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if i == n - 1 { t1 } else { t0 + (t1 - t0) * i as f64 / (n - 1) as f64 }).collect()
}

fn check_span(sys: &SymmetrySystem, t0: f64, t1: f64) -> Result<()> {
    sys.sample(t0)?;
    sys.sample(t1)?;
    Ok(())
}

/// Integrates `x'' = -dV/dx` from `(x0, v0)` at `t0` to `t1`. Backward flows
/// (`t1 < t0`) are returned in increasing time order, so the final state is
/// then the first sample.
pub fn el_flow(sys: &SymmetrySystem, x0: f64, v0: f64, t0: f64, t1: f64, tol: f64) -> Result<Trajectory> {
    check_span(sys, t0, t1)?;
    if t0 == t1 {
        return Err(Error::Invalid("flow interval is empty".into()));
    }
    let rhs = |t: f64, y: &[f64; 2]| -> Result<[f64; 2]> { Ok([y[1], -sys.potential_gradient(y[0], t)?]) };
    let sol = dopri5(rhs, t0, [x0, v0], t1, tol, tol)?;
    let mut samples: Vec<(f64, [f64; 2])> = sol.times.into_iter().zip(sol.states).collect();
    if t1 < t0 {
        samples.reverse();
    }
    Ok(Trajectory {
        times: samples.iter().map(|s| s.0).collect(),
        positions: samples.iter().map(|s| s.1[0]).collect(),
        velocities: samples.iter().map(|s| s.1[1]).collect(),
        integrator_tol: tol,
    })
}

/// Flow reported on a caller supplied, strictly increasing time grid.
pub fn el_flow_on_grid(sys: &SymmetrySystem, x0: f64, v0: f64, times: &[f64], tol: f64) -> Result<Trajectory> {
    if times.len() < 2 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invalid("output grid must be strictly increasing".into()));
    }
    check_span(sys, times[0], times[times.len() - 1])?;
    let rhs = |t: f64, y: &[f64; 2]| -> Result<[f64; 2]> { Ok([y[1], -sys.potential_gradient(y[0], t)?]) };
    let mut positions = Vec::with_capacity(times.len());
    let mut velocities = Vec::with_capacity(times.len());
    let mut state = [x0, v0];
    positions.push(x0);
    velocities.push(v0);
    for w in times.windows(2) {
        let sol = dopri5(rhs, w[0], state, w[1], tol, tol)?;
        state = *sol.states.last().expect("solution contains the initial point");
        positions.push(state[0]);
        velocities.push(state[1]);
    }
    Ok(Trajectory { times: times.to_vec(), positions, velocities, integrator_tol: tol })
}

/// Largest `|I(t) - I(t0)|` along a trajectory.
pub fn invariant_drift(sys: &SymmetrySystem, path: &Trajectory) -> Result<(f64, f64)> {
    let i0 = sys.invariant_at(path.positions[0], path.velocities[0], path.times[0])?;
    let mut worst = 0.0f64;
    for k in 0..path.len() {
        let i = sys.invariant_at(path.positions[k], path.velocities[k], path.times[k])?;
        worst = worst.max((i - i0).abs());
    }
    Ok((i0, worst))
}

/// Applies `x -> x + eps rho [rho a' + rho' (x - a)]`, `t -> t + eps rho^2`
/// and resamples the image onto a uniform grid of the transformed window
/// with the same number of points.
pub fn symmetry_transform(sys: &SymmetrySystem, path: &Trajectory, eps: f64) -> Result<Trajectory> {
    if !eps.is_finite() {
        return Err(Error::Invalid("transform parameter must be finite".into()));
    }
    if eps == 0.0 {
        return Ok(path.clone());
    }
    let n = path.len();
    let mut t_hat = Vec::with_capacity(n);
    let mut x_hat = Vec::with_capacity(n);
    let mut v_hat = Vec::with_capacity(n);
    for k in 0..n {
        let (t, x, v) = (path.times[k], path.positions[k], path.velocities[k]);
        let s = sys.sample(t)?;
        let stretch = 1.0 + eps * 2.0 * s.rho * s.rho_d1;
        if !(stretch > 0.0) {
            return Err(Error::Invalid(format!("transformed time is not monotone at t = {t} (eps = {eps})")));
        }
        let inner = s.rho * s.a_d1 + s.rho_d1 * (x - s.a);
        let chi = s.rho * inner;
        let inner_dt = s.rho_d1 * s.a_d1 + s.rho * s.a_d2 + s.rho_d2 * (x - s.a) + s.rho_d1 * (v - s.a_d1);
        let chi_dt = s.rho_d1 * inner + s.rho * inner_dt;
        t_hat.push(t + eps * s.rho * s.rho);
        x_hat.push(x + eps * chi);
        v_hat.push((v + eps * chi_dt) / stretch);
    }
    if t_hat.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invalid(format!("transformed times are not increasing (eps = {eps})")));
    }
    let grid = uniform(t_hat[0], t_hat[n - 1], n);
    let mut positions = Vec::with_capacity(n);
    let mut velocities = Vec::with_capacity(n);
    let mut seg = 0;
    for &t in &grid {
        while seg + 2 < n && t > t_hat[seg + 1] {
            seg += 1;
        }
        let (x, v) = hermite(t_hat[seg], t_hat[seg + 1], x_hat[seg], x_hat[seg + 1], v_hat[seg], v_hat[seg + 1], t);
        positions.push(x);
        velocities.push(v);
    }
    Ok(Trajectory { times: grid, positions, velocities, integrator_tol: path.integrator_tol })
}

/// `S = integral of (v^2/2 - V)` along the path, using four-point Gauss
/// panels on the cubic Hermite interpolant of the samples.
pub fn action_of_path(sys: &SymmetrySystem, path: &Trajectory) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..path.len() - 1 {
        let (t0, t1) = (path.times[k], path.times[k + 1]);
        let half = 0.5 * (t1 - t0);
        let mid = 0.5 * (t0 + t1);
        let mut panel = 0.0;
        for (node, w) in GL4_NODES.iter().zip(GL4_WEIGHTS.iter()) {
            let t = mid + half * node;
            let (x, v) = hermite(
                t0,
                t1,
                path.positions[k],
                path.positions[k + 1],
                path.velocities[k],
                path.velocities[k + 1],
                t,
            );
            panel += w * (0.5 * v * v - sys.potential_at(x, t)?);
        }
        total += half * panel;
    }
    Ok(total)
}
