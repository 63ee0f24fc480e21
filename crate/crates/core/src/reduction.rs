//! Reduction of a Noether-reducible system to a standard one in the
//! coordinates `Q = (x - a)/rho`, `s = int rho^-2 dt`, and assembly of the
//! full propagator from the standard propagator.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::profiles::{Profile, ShapeFunction};
use crate::quad::integrate_gk;
use crate::slicing::{
    free_kernel, gamma_m, sliced_amplitude_grid, sliced_gaussian, DyadicSlicing, Engine, SliceIntegrand, SpatialGrid,
};
use crate::symmetry::SymmetrySystem;

/// Absolute tolerance of the reduced-time and phase integrals.
pub const INTEGRAL_TOL: f64 = 1e-10;
/// Tolerance of the reduced-time inversion.
pub const INVERSE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ReductionData {
    sys: SymmetrySystem,
}

/// Build the reduction maps for `sys`, anchored at the start of its window.
pub fn build_reduction(sys: SymmetrySystem) -> Result<ReductionData> {
    ReductionData::new(sys)
}

impl ReductionData {
    pub fn new(sys: SymmetrySystem) -> Result<Self> {
        // SymmetrySystem already rejects rho <= 0 on a dense sample; probe the
        // quadrature nodes too so that every later integral is well defined.
        let rd = Self { sys };
        rd.reduced_time(rd.sys.window().1)?;
        Ok(rd)
    }

    pub fn system(&self) -> &SymmetrySystem {
        &self.sys
    }

    /// Anchor time `t'` at which the reduced time and `G` vanish.
    pub fn anchor(&self) -> f64 {
        self.sys.window().0
    }

    fn integrate(&self, t: f64, integrand: impl Fn(f64) -> Result<f64>) -> Result<f64> {
        let t0 = self.anchor();
        self.sys.sample(t)?;
        if t == t0 {
            return Ok(0.0);
        }
        let value = integrate_gk(|s| integrand(s).unwrap_or(f64::NAN), t0, t, INTEGRAL_TOL)?.value;
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Domain(format!("rho vanishes between {t0} and {t}")))
        }
    }

    /// `s(t) = int_{t'}^{t} rho^-2`.
    pub fn reduced_time(&self, t: f64) -> Result<f64> {
        if let Profile::Constant(rho) = self.sys.profile().rho {
            self.sys.sample(t)?;
            return Ok((t - self.anchor()) / (rho * rho));
        }
        self.integrate(t, |s| {
            let rho = self.sys.sample(s)?.rho;
            Ok(1.0 / (rho * rho))
        })
    }

    /// Inverse of [`Self::reduced_time`] by bisection followed by Newton steps.
    pub fn original_time(&self, s: f64) -> Result<f64> {
        let (t0, t1) = self.sys.window();
        let s_max = self.reduced_time(t1)?;
        let slack = 1e-12 * s_max.max(1.0);
        if !(s >= -slack && s <= s_max + slack) {
            return Err(Error::Domain(format!("reduced time {s} lies outside [0, {s_max}]")));
        }
        let (mut lo, mut hi) = (t0, t1);
        for _ in 0..20 {
            let mid = 0.5 * (lo + hi);
            if self.reduced_time(mid)? < s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..50 {
            let rho = self.sys.sample(t)?.rho;
            let step = (self.reduced_time(t)? - s) * rho * rho;
            t = (t - step).clamp(t0, t1);
            if step.abs() <= INVERSE_TOL {
                return Ok(t);
            }
        }
        Err(Error::NonConvergence(format!("reduced time {s} could not be inverted")))
    }

    pub fn reduced_position(&self, x: f64, t: f64) -> Result<f64> {
        let p = self.sys.sample(t)?;
        Ok((x - p.a) / p.rho)
    }

    /// `W(t) = a' rho - a rho'`.
    pub fn shift_wronskian(&self, t: f64) -> Result<f64> {
        let p = self.sys.sample(t)?;
        Ok(p.a_d1 * p.rho - p.a * p.rho_d1)
    }

    /// `G(t) = int_{t'}^{t} W^2 / (2 rho^2)`.
    pub fn accumulated_phase(&self, t: f64) -> Result<f64> {
        self.integrate(t, |s| {
            let p = self.sys.sample(s)?;
            let w = p.a_d1 * p.rho - p.a * p.rho_d1;
            Ok(w * w / (2.0 * p.rho * p.rho))
        })
    }

    /// `X(x, t) = (rho'/2rho) x^2 + (W/rho) x - G`.
    pub fn gauge_phase(&self, x: f64, t: f64) -> Result<f64> {
        Ok(self.endpoint(t)?.gauge_phase(x))
    }

    /// Time-dependent data at `t`, reusable across positions.
    pub fn endpoint(&self, t: f64) -> Result<Endpoint> {
        let p = self.sys.sample(t)?;
        Ok(Endpoint {
            time: t,
            reduced_time: self.reduced_time(t)?,
            rho: p.rho,
            rho_d1: p.rho_d1,
            a: p.a,
            wronskian: p.a_d1 * p.rho - p.a * p.rho_d1,
            accumulated: self.accumulated_phase(t)?,
        })
    }

    /// `[rho(t1) rho(t0)]^(-1/2) exp[(i/hbar)(X(x1, t1) - X(x0, t0))]`.
    pub fn phase_factor(&self, x1: f64, t1: f64, x0: f64, t0: f64) -> Result<Complex64> {
        check_order(t0, t1)?;
        let (end, start) = (self.endpoint(t1)?, self.endpoint(t0)?);
        Ok(phase_between(&end, &start, x1, x0, self.sys.hbar()))
    }

    /// Kernel `K(x1, t1; x0, t0)` assembled from the standard propagator.
    pub fn assemble(
        &self,
        kbar: &(impl StandardPropagator + ?Sized),
        x1: f64,
        t1: f64,
        x0: f64,
        t0: f64,
    ) -> Result<Complex64> {
        check_order(t0, t1)?;
        let (end, start) = (self.endpoint(t1)?, self.endpoint(t0)?);
        let standard =
            kbar.evaluate(end.reduced_position(x1), end.reduced_time, start.reduced_position(x0), start.reduced_time)?;
        Ok(phase_between(&end, &start, x1, x0, self.sys.hbar()) * standard)
    }

    /// `x1 -> K(x1, t1; x0, t0)` and friends with the time data fixed.
    pub fn kernel_between<'a, P: StandardPropagator + Sync + ?Sized>(
        &'a self,
        kbar: &'a P,
        t1: f64,
        t0: f64,
    ) -> Result<impl Fn(f64, f64) -> Result<Complex64> + Sync + 'a> {
        check_order(t0, t1)?;
        let (end, start) = (self.endpoint(t1)?, self.endpoint(t0)?);
        let hbar = self.sys.hbar();
        Ok(move |x1: f64, x0: f64| {
            let standard = kbar.evaluate(
                end.reduced_position(x1),
                end.reduced_time,
                start.reduced_position(x0),
                start.reduced_time,
            )?;
            Ok(phase_between(&end, &start, x1, x0, hbar) * standard)
        })
    }
}

pub fn phase_factor(rd: &ReductionData, x1: f64, t1: f64, x0: f64, t0: f64) -> Result<Complex64> {
    rd.phase_factor(x1, t1, x0, t0)
}

pub fn assemble_propagator(
    rd: &ReductionData,
    kbar: &(impl StandardPropagator + ?Sized),
    x1: f64,
    t1: f64,
    x0: f64,
    t0: f64,
) -> Result<Complex64> {
    rd.assemble(kbar, x1, t1, x0, t0)
}

fn check_order(t0: f64, t1: f64) -> Result<()> {
    if t0 < t1 {
        Ok(())
    } else {
        Err(Error::Invalid(format!("propagation needs t0 < t1, got {t0} and {t1}")))
    }
}

fn phase_between(end: &Endpoint, start: &Endpoint, x1: f64, x0: f64, hbar: f64) -> Complex64 {
    let measure = (end.rho * start.rho).sqrt().recip();
    Complex64::from_polar(measure, (end.gauge_phase(x1) - start.gauge_phase(x0)) / hbar)
}

/// Reduction data frozen at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Endpoint {
    pub time: f64,
    pub reduced_time: f64,
    pub rho: f64,
    pub rho_d1: f64,
    pub a: f64,
    pub wronskian: f64,
    pub accumulated: f64,
}

impl Endpoint {
    pub fn reduced_position(&self, x: f64) -> f64 {
        (x - self.a) / self.rho
    }

    pub fn gauge_phase(&self, x: f64) -> f64 {
        self.rho_d1 / (2.0 * self.rho) * x * x + self.wronskian / self.rho * x - self.accumulated
    }
}

/// Evaluator of the standard propagator `Kbar(Q1, s1; Q0, s0)`.
pub trait StandardPropagator {
    fn evaluate(&self, q_end: f64, s_end: f64, q_start: f64, s_start: f64) -> Result<Complex64>;
}

impl<F> StandardPropagator for F
where
    F: Fn(f64, f64, f64, f64) -> Result<Complex64>,
{
    fn evaluate(&self, q_end: f64, s_end: f64, q_start: f64, s_start: f64) -> Result<Complex64> {
        self(q_end, s_end, q_start, s_start)
    }
}

/// Closed-form standard propagator for `F = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeStandard {
    pub hbar: f64,
}

impl StandardPropagator for FreeStandard {
    fn evaluate(&self, q_end: f64, s_end: f64, q_start: f64, s_start: f64) -> Result<Complex64> {
        check_order(s_start, s_end)?;
        Ok(free_kernel(q_end, q_start, s_end - s_start, self.hbar))
    }
}

/// Standard propagator from `2^q` slices of the reduced problem.
#[derive(Debug, Clone)]
pub struct SlicedStandard {
    pub shape: ShapeFunction,
    pub hbar: f64,
    pub engine: Engine,
    pub grid: SpatialGrid,
    pub q: u32,
}

impl SlicedStandard {
    pub fn for_system(sys: &SymmetrySystem, engine: Engine, grid: SpatialGrid, q: u32) -> Self {
        Self { shape: sys.shape().clone(), hbar: sys.hbar(), engine, grid, q }
    }
}

impl StandardPropagator for SlicedStandard {
    fn evaluate(&self, q_end: f64, s_end: f64, q_start: f64, s_start: f64) -> Result<Complex64> {
        check_order(s_start, s_end)?;
        let slicing = DyadicSlicing::new(s_start, s_end, self.q)?;
        let integrand = SliceIntegrand::new(self.shape.clone(), self.hbar, q_start, q_end)?;
        gamma_m(self.engine, &slicing, &integrand, &self.grid)
    }
}

/// Sliced propagator of the original, time-dependent potential `V(x, t)`
/// with `2^q` slices of `[t0, t1]`, without passing through the reduction.
#[allow(clippy::too_many_arguments)]
pub fn direct_propagator(
    sys: &SymmetrySystem,
    engine: Engine,
    grid: &SpatialGrid,
    q: u32,
    x1: f64,
    t1: f64,
    x0: f64,
    t0: f64,
) -> Result<Complex64> {
    check_order(t0, t1)?;
    let slicing = DyadicSlicing::new(t0, t1, q)?;
    let slices = slicing.nodes().into_iter().map(|t| sys.potential_slice(t)).collect::<Result<Vec<_>>>()?;
    let hbar = sys.hbar();
    match (engine.resolve(sys.shape()), sys.shape().quadratic_coefficients()) {
        (Engine::Analytic, Some((kappa, beta, gamma))) => {
            sliced_gaussian(x0, x1, slicing.dt(), slicing.m(), hbar, |j| {
                // Expand F((y - a)/rho)/rho^2 around y = 0 and add the profile terms.
                let p = &slices[j];
                let (r2, r3, r4) = (p.rho.powi(2), p.rho.powi(3), p.rho.powi(4));
                let k = 2.0 * p.quadratic + kappa / r4;
                let b = p.linear + beta / r3 - kappa * p.a / r4;
                let g = gamma / r2 - beta * p.a / r3 + 0.5 * kappa * p.a * p.a / r4;
                (k, b, g)
            })
        }
        (Engine::Analytic, None) => Err(Error::Invalid("the exact engine needs a shape of degree at most two".into())),
        _ => {
            let potential = |y: f64, t: f64| sys.potential_slice(t).map_or(f64::NAN, |p| p.value(y));
            let k = sliced_amplitude_grid(grid, hbar, x0, x1, t0, t1, slicing.m(), &potential)?;
            if k.is_finite() {
                Ok(k)
            } else {
                Err(Error::Domain("potential could not be sampled on the slicing".into()))
            }
        }
    }
}
