//! Evolution families built from propagator kernels, the Howland semigroup
//! they generate on the half line, the right translation semigroup and an
//! upper estimate of the growth bound.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::reduction::{ReductionData, StandardPropagator};
use crate::slicing::{free_kernel, SpatialGrid, LEAKAGE_LIMIT};

pub type GridFunction = Vec<Complex64>;

/// Step-count tolerance when checking that a time is a multiple of the step.
const MULTIPLE_TOL: f64 = 1e-9;
/// Relative change of the norm estimate between power iterations at which
/// the iteration stops. Clustered singular values make this approach slow.
pub const POWER_ITERATION_TOL: f64 = 1e-8;
pub const POWER_ITERATION_MAX: usize = 500;
const ADJOINT_BLOCK: usize = 64;

/// Kernel `K(x1, theta; x0, tau)` with the two times fixed.
pub trait Kernel: Send + Sync {
    fn between(&self, theta: f64, tau: f64) -> Result<Box<dyn Fn(f64, f64) -> Complex64 + Sync + '_>>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeKernel {
    pub hbar: f64,
}

impl Kernel for FreeKernel {
    fn between(&self, theta: f64, tau: f64) -> Result<Box<dyn Fn(f64, f64) -> Complex64 + Sync + '_>> {
        let span = theta - tau;
        check_span(span)?;
        let hbar = self.hbar;
        Ok(Box::new(move |x1, x0| free_kernel(x1, x0, span, hbar)))
    }
}

/// Closed-form oscillator kernel for `V = omega^2 x^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorKernel {
    pub hbar: f64,
    pub omega: f64,
}

impl Kernel for OscillatorKernel {
    fn between(&self, theta: f64, tau: f64) -> Result<Box<dyn Fn(f64, f64) -> Complex64 + Sync + '_>> {
        let span = theta - tau;
        check_span(span)?;
        let (s, c) = (self.omega * span).sin_cos();
        if !(s > 0.0) {
            return Err(Error::Domain(format!("oscillator kernel has a caustic at separation {span}")));
        }
        let pref = Complex64::new(0.0, 2.0 * std::f64::consts::PI * self.hbar * s / self.omega).sqrt().inv();
        let scale = self.omega / (2.0 * self.hbar * s);
        Ok(Box::new(move |x1, x0| pref * Complex64::from_polar(1.0, scale * ((x0 * x0 + x1 * x1) * c - 2.0 * x0 * x1))))
    }
}

/// Kernel assembled from a reduction and a standard propagator.
pub struct ReducedKernel<P> {
    pub reduction: ReductionData,
    pub standard: P,
}

impl<P: StandardPropagator + Send + Sync> Kernel for ReducedKernel<P> {
    fn between(&self, theta: f64, tau: f64) -> Result<Box<dyn Fn(f64, f64) -> Complex64 + Sync + '_>> {
        check_span(theta - tau)?;
        let k = self.reduction.kernel_between(&self.standard, theta, tau)?;
        Ok(Box::new(move |x1, x0| k(x1, x0).unwrap_or(Complex64::new(f64::NAN, f64::NAN))))
    }
}

fn check_span(span: f64) -> Result<()> {
    if span > 0.0 {
        Ok(())
    } else {
        Err(Error::Invalid(format!("kernel needs theta > tau, got separation {span}")))
    }
}

/// Discretization of `U(theta, tau)` on the grid.
pub enum GridOperator {
    /// Multiple of the identity.
    Scalar(Complex64),
    /// Row-major matrix with the quadrature weights folded in.
    Dense { n: usize, entries: Vec<Complex64> },
    /// Diagonal in the discrete Fourier basis.
    Spectral { symbol: Vec<Complex64>, forward: Arc<dyn Fft<f64>>, inverse: Arc<dyn Fft<f64>> },
}

impl GridOperator {
    pub fn apply(&self, psi: &[Complex64]) -> GridFunction {
        match self {
            GridOperator::Scalar(c) => psi.iter().map(|v| c * v).collect(),
            GridOperator::Dense { n, entries } => {
                entries.par_chunks(*n).map(|row| row.iter().zip(psi).map(|(a, b)| a * b).sum()).collect()
            }
            GridOperator::Spectral { symbol, forward, inverse } => spectral_apply(psi, symbol, forward, inverse, false),
        }
    }

    /// Adjoint with respect to the uniform-weight inner product of the grid.
    pub fn apply_adjoint(&self, psi: &[Complex64]) -> GridFunction {
        match self {
            GridOperator::Scalar(c) => psi.iter().map(|v| c.conj() * v).collect(),
            GridOperator::Dense { n, entries } => {
                // Fixed row blocks summed in order keep the result reproducible.
                let block = ADJOINT_BLOCK.min(*n);
                let partials: Vec<GridFunction> = entries
                    .par_chunks(block * n)
                    .zip(psi.par_chunks(block))
                    .map(|(rows, p)| {
                        let mut acc = vec![Complex64::new(0.0, 0.0); *n];
                        for (row, pi) in rows.chunks(*n).zip(p) {
                            for (a, e) in acc.iter_mut().zip(row) {
                                *a += e.conj() * pi;
                            }
                        }
                        acc
                    })
                    .collect();
                let mut out = vec![Complex64::new(0.0, 0.0); *n];
                for part in partials {
                    out.iter_mut().zip(part).for_each(|(x, y)| *x += y);
                }
                out
            }
            GridOperator::Spectral { symbol, forward, inverse } => spectral_apply(psi, symbol, forward, inverse, true),
        }
    }
}

fn spectral_apply(
    psi: &[Complex64],
    symbol: &[Complex64],
    forward: &Arc<dyn Fft<f64>>,
    inverse: &Arc<dyn Fft<f64>>,
    adjoint: bool,
) -> GridFunction {
    let mut buf = psi.to_vec();
    forward.process(&mut buf);
    let n = buf.len() as f64;
    for (b, s) in buf.iter_mut().zip(symbol) {
        *b *= if adjoint { s.conj() } else { *s } / n;
    }
    inverse.process(&mut buf);
    buf
}

/// Strongly continuous family `U(theta, tau)`, `theta >= tau >= 0`, acting on
/// functions sampled on a spatial grid.
pub trait EvolutionFamily: Sync {
    fn grid(&self) -> &SpatialGrid;
    /// Discretized `U(theta, tau)` for `theta > tau`.
    fn operator(&self, theta: f64, tau: f64) -> Result<GridOperator>;
}

/// `psi -> int K(x1, theta; x0, tau) psi(x0) dx0` by quadrature on the grid.
/// The grid window tapers the input before integration.
pub struct KernelFamily<K> {
    kernel: K,
    grid: SpatialGrid,
    quad_weights: Vec<f64>,
}

impl<K: Kernel> KernelFamily<K> {
    pub fn new(kernel: K, grid: SpatialGrid) -> Self {
        let quad_weights = grid.weights().iter().zip(grid.window_values()).map(|(w, win)| w * win).collect();
        Self { kernel, grid, quad_weights }
    }

    pub fn kernel(&self) -> &K {
        &self.kernel
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }
}

impl<K: Kernel> EvolutionFamily for KernelFamily<K> {
    fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    fn operator(&self, theta: f64, tau: f64) -> Result<GridOperator> {
        let k = self.kernel.between(theta, tau)?;
        let n = self.grid.len();
        let xs = self.grid.points();
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        entries.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for (j, e) in row.iter_mut().enumerate() {
                *e = k(xs[i], xs[j]) * self.quad_weights[j];
            }
        });
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(Error::Domain(format!("kernel is not finite between {tau} and {theta}")));
        }
        Ok(GridOperator::Dense { n, entries })
    }
}

/// `U(theta, tau) = exp[rate (theta - tau)] I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarFamily {
    pub grid: SpatialGrid,
    pub rate: f64,
}

impl ScalarFamily {
    pub fn identity(grid: SpatialGrid) -> Self {
        Self { grid, rate: 0.0 }
    }
}

impl EvolutionFamily for ScalarFamily {
    fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    fn operator(&self, theta: f64, tau: f64) -> Result<GridOperator> {
        check_span(theta - tau)?;
        Ok(GridOperator::Scalar(Complex64::new((self.rate * (theta - tau)).exp(), 0.0)))
    }
}

/// Exact free transport on the periodic grid, diagonal in Fourier space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralFreeFamily {
    pub grid: SpatialGrid,
    pub hbar: f64,
}

impl EvolutionFamily for SpectralFreeFamily {
    fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    fn operator(&self, theta: f64, tau: f64) -> Result<GridOperator> {
        let span = theta - tau;
        check_span(span)?;
        let g = &self.grid;
        let symbol = (0..g.len())
            .map(|j| {
                let k = g.wavenumber(j);
                Complex64::from_polar(1.0, -self.hbar * k * k * span / 2.0)
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(GridOperator::Spectral {
            symbol,
            forward: planner.plan_fft_forward(g.len()),
            inverse: planner.plan_fft_inverse(g.len()),
        })
    }
}

/// Grid 2-norm `sqrt(sum |v|^2 dx)`.
pub fn grid_norm(grid: &SpatialGrid, v: &[Complex64]) -> f64 {
    (v.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dx()).sqrt()
}

fn outside_fraction(grid: &SpatialGrid, v: &[Complex64]) -> f64 {
    let total: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let outside: f64 =
        v.iter().enumerate().filter(|(j, _)| !grid.is_interior(grid.x(*j))).map(|(_, z)| z.norm_sqr()).sum();
    (outside / total).sqrt()
}

/// `U(theta, tau) psi`. Equal times return `psi` unchanged.
pub fn u_apply(fam: &(impl EvolutionFamily + ?Sized), psi: &[Complex64], theta: f64, tau: f64) -> Result<GridFunction> {
    let grid = fam.grid();
    if psi.len() != grid.len() {
        return Err(Error::Invalid(format!("state has {} samples, grid has {}", psi.len(), grid.len())));
    }
    if !(tau >= 0.0 && theta >= tau) {
        return Err(Error::Invalid(format!("evolution needs theta >= tau >= 0, got theta = {theta}, tau = {tau}")));
    }
    if theta == tau {
        return Ok(psi.to_vec());
    }
    let leak = outside_fraction(grid, psi);
    if leak > LEAKAGE_LIMIT {
        log::warn!("input state carries {leak:.2e} of its norm outside the grid interior");
    }
    let out = fam.operator(theta, tau)?.apply(psi);
    let leak = outside_fraction(grid, &out);
    if leak > LEAKAGE_LIMIT {
        log::warn!("evolved state carries {leak:.2e} of its norm outside the grid interior");
    }
    Ok(out)
}

/// A state on the half line: one grid function per node `theta_j = j dtheta`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfLineState {
    dtheta: f64,
    slices: Vec<GridFunction>,
}

impl HalfLineState {
    pub fn new(dtheta: f64, slices: Vec<GridFunction>) -> Result<Self> {
        if !(dtheta.is_finite() && dtheta > 0.0) {
            return Err(Error::Invalid(format!("theta step must be positive, got {dtheta}")));
        }
        if slices.is_empty() {
            return Err(Error::Invalid("a half-line state needs at least one slice".into()));
        }
        let n = slices[0].len();
        if slices.iter().any(|s| s.len() != n) {
            return Err(Error::Invalid("all slices must share the spatial grid".into()));
        }
        Ok(Self { dtheta, slices })
    }

    /// Samples `h(theta_j, x_i)` for `j < count`.
    pub fn from_fn(grid: &SpatialGrid, dtheta: f64, count: usize, h: impl Fn(f64, f64) -> Complex64) -> Result<Self> {
        let slices = (0..count)
            .map(|j| {
                let theta = j as f64 * dtheta;
                (0..grid.len()).map(|i| h(theta, grid.x(i))).collect()
            })
            .collect();
        Self::new(dtheta, slices)
    }

    pub fn dtheta(&self) -> f64 {
        self.dtheta
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.dtheta
    }

    pub fn slices(&self) -> &[GridFunction] {
        &self.slices
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    /// `sqrt(sum_j ||h(theta_j)||^2 dtheta)`.
    pub fn norm(&self, grid: &SpatialGrid) -> f64 {
        (self.slices.iter().map(|s| grid_norm(grid, s).powi(2)).sum::<f64>() * self.dtheta).sqrt()
    }
}

/// Number of steps in `t`, rejecting times that are not a nonnegative
/// multiple of `step`.
pub fn steps_in(t: f64, step: f64) -> Result<usize> {
    let k = (t / step).round();
    if !(t >= 0.0 && k >= 0.0 && (t / step - k).abs() <= MULTIPLE_TOL) {
        return Err(Error::NotGridMultiple { step: t, spacing: step });
    }
    Ok(k as usize)
}

/// `(T(t) f)(theta) = f(theta - t)`, zero for `theta < t`.
pub fn right_translate<T: Clone + Default>(f: &[T], dtheta: f64, t: f64) -> Result<Vec<T>> {
    let k = steps_in(t, dtheta)?;
    Ok((0..f.len()).map(|j| if j >= k { f[j - k].clone() } else { T::default() }).collect())
}

/// Right translation of every slice of a half-line state.
pub fn right_translate_state(h: &HalfLineState, t: f64) -> Result<HalfLineState> {
    let k = steps_in(t, h.dtheta)?;
    let n = h.slices[0].len();
    let slices = (0..h.len())
        .map(|j| if j >= k { h.slices[j - k].clone() } else { vec![Complex64::new(0.0, 0.0); n] })
        .collect();
    Ok(HalfLineState { dtheta: h.dtheta, slices })
}

/// Multiplies slice `theta_j >= t` of an already translated state by
/// `U(theta_j, theta_j - t)`.
pub fn evolution_weight(
    fam: &(impl EvolutionFamily + ?Sized),
    shifted: &HalfLineState,
    t: f64,
) -> Result<HalfLineState> {
    let k = steps_in(t, shifted.dtheta)?;
    let slices = shifted
        .slices
        .par_iter()
        .enumerate()
        .map(|(j, s)| if j >= k { u_apply(fam, s, shifted.theta(j), shifted.theta(j - k)) } else { Ok(s.clone()) })
        .collect::<Result<_>>()?;
    Ok(HalfLineState { dtheta: shifted.dtheta, slices })
}

/// `(E^t h)(theta) = U(theta, theta - t) h(theta - t)` for `theta >= t`, zero below.
pub fn howland_apply(fam: &(impl EvolutionFamily + ?Sized), h: &HalfLineState, t: f64) -> Result<HalfLineState> {
    if h.slices[0].len() != fam.grid().len() {
        return Err(Error::Invalid("state and family use different grids".into()));
    }
    evolution_weight(fam, &right_translate_state(h, t)?, t)
}

/// `||(T(h) f - f)/h + f'||` in the `theta` grid 2-norm.
pub fn generator_residual(f: &[f64], f_d1: &[f64], dtheta: f64, h: f64) -> Result<f64> {
    if f.len() != f_d1.len() {
        return Err(Error::Invalid("function and derivative need the same samples".into()));
    }
    if !(h > 0.0) {
        return Err(Error::Invalid(format!("difference step must be positive, got {h}")));
    }
    let shifted = right_translate(f, dtheta, h)?;
    let sum: f64 = shifted
        .iter()
        .zip(f)
        .zip(f_d1)
        .map(|((s, v), d)| {
            let r = (s - v) / h + d;
            r * r
        })
        .sum();
    Ok((sum * dtheta).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthBoundEstimate {
    pub omega_hat: f64,
    /// `(theta, tau, log ||U(theta, tau)||)`.
    pub samples: Vec<(f64, f64, f64)>,
    pub separation_min: f64,
}

impl GrowthBoundEstimate {
    pub fn exponentially_stable(&self) -> bool {
        self.omega_hat < 0.0
    }
}

/// Operator norm of `U(theta, tau)` by power iteration on `U* U`.
pub fn operator_norm(fam: &(impl EvolutionFamily + ?Sized), theta: f64, tau: f64) -> Result<f64> {
    let n = fam.grid().len();
    if theta == tau {
        return Ok(1.0);
    }
    let op = fam.operator(theta, tau)?;
    // Deterministic start with components along every Fourier mode.
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let mut v: GridFunction = (0..n)
        .map(|j| {
            let u = (j as f64 * golden).fract();
            Complex64::new(u - 0.5, (j as f64 * golden * golden).fract() - 0.5)
        })
        .collect();
    let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut estimate = 0.0;
    for _ in 0..POWER_ITERATION_MAX {
        let scale = norm(&v);
        v.iter_mut().for_each(|z| *z /= scale);
        let image = op.apply(&v);
        let next = norm(&image);
        if !next.is_finite() {
            return Err(Error::NonConvergence("power iteration produced a non-finite norm".into()));
        }
        if (next - estimate).abs() <= POWER_ITERATION_TOL * next {
            return Ok(next);
        }
        estimate = next;
        v = op.apply_adjoint(&image);
        if norm(&v) == 0.0 {
            return Ok(0.0);
        }
    }
    Err(Error::NonConvergence(format!(
        "power iteration for U({theta}, {tau}) did not settle in {POWER_ITERATION_MAX} steps"
    )))
}

/// `max log ||U(theta, tau)|| / (theta - tau)` over the node pairs of
/// `nodes` equally spaced times in `[0, horizon]` separated by at least
/// `separation_min`. An upper estimate of the growth bound on the window.
pub fn growth_bound_estimate(
    fam: &(impl EvolutionFamily + ?Sized),
    horizon: f64,
    separation_min: f64,
    nodes: usize,
) -> Result<GrowthBoundEstimate> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::Invalid(format!("horizon must be positive and finite, got {horizon}")));
    }
    if !(separation_min > 0.0 && separation_min <= horizon) {
        return Err(Error::Invalid(format!("separation must lie in (0, {horizon}], got {separation_min}")));
    }
    if nodes < 2 {
        return Err(Error::Invalid("growth bound needs at least two time nodes".into()));
    }
    let times: Vec<f64> = (0..nodes).map(|i| horizon * i as f64 / (nodes - 1) as f64).collect();
    let pairs: Vec<(f64, f64)> = times
        .iter()
        .flat_map(|&theta| times.iter().map(move |&tau| (theta, tau)))
        .filter(|(theta, tau)| theta - tau >= separation_min * (1.0 - 1e-12))
        .collect();
    let samples = pairs
        .into_iter()
        .map(|(theta, tau)| Ok((theta, tau, operator_norm(fam, theta, tau)?.ln())))
        .collect::<Result<Vec<_>>>()?;
    let omega_hat = samples.iter().map(|(theta, tau, l)| l / (theta - tau)).fold(f64::NEG_INFINITY, f64::max);
    Ok(GrowthBoundEstimate { omega_hat, samples, separation_min })
}
