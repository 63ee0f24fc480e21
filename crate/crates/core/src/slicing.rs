//! Time-sliced evaluation of the standard propagator on dyadic slicings.
//!
//! Three engines compute the same sliced amplitude `Gamma_m`:
//! a split-step grid engine (free transport in Fourier space alternating with
//! potential phases), an exact discrete Gaussian engine for shapes of degree
//! at most two, and a regularized direct quadrature for `m <= 4`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::profiles::ShapeFunction;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Fraction of the spectral norm allowed beyond `LEAKAGE_BAND * k_nyquist`.
pub const LEAKAGE_LIMIT: f64 = 1e-3;
const LEAKAGE_BAND: f64 = 0.9;
pub const MAX_REFINEMENT_Q: u32 = 12;

/// Uniform slicing of `[t_start, t_end]` into `m = 2^q` slices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicSlicing {
    t_start: f64,
    t_end: f64,
    q: u32,
}

impl DyadicSlicing {
    pub fn new(t_start: f64, t_end: f64, q: u32) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite() && t_end > t_start) {
            return Err(Error::Invalid(format!("slicing span [{t_start}, {t_end}] must be finite and increasing")));
        }
        if q > 30 {
            return Err(Error::Invalid(format!("q = {q} is too large")));
        }
        Ok(Self { t_start, t_end, q })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn m(&self) -> usize {
        1usize << self.q
    }

    pub fn span(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn dt(&self) -> f64 {
        self.span() / self.m() as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        if j == self.m() {
            self.t_end
        } else {
            self.t_start + j as f64 * self.span() / self.m() as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.m()).map(|j| self.node(j)).collect()
    }
}

/// The sliced integrand: shape, action unit and fixed endpoints.
#[derive(Debug, Clone)]
pub struct SliceIntegrand {
    pub shape: ShapeFunction,
    pub hbar: f64,
    pub q_start: f64,
    pub q_end: f64,
}

impl SliceIntegrand {
    pub fn new(shape: ShapeFunction, hbar: f64, q_start: f64, q_end: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::Invalid(format!("hbar must be positive, got {hbar}")));
        }
        if !(q_start.is_finite() && q_end.is_finite()) {
            return Err(Error::Invalid("endpoints must be finite".into()));
        }
        Ok(Self { shape, hbar, q_start, q_end })
    }

    pub fn free(hbar: f64, q_start: f64, q_end: f64) -> Result<Self> {
        Self::new(ShapeFunction::Zero, hbar, q_start, q_end)
    }
}

/// `[2 pi i hbar dt]^(-1/2)` on the principal branch.
fn slice_prefactor(hbar: Complex64, dt: f64) -> Complex64 {
    (2.0 * PI * I * hbar * dt).sqrt().inv()
}

/// One-slice free kernel `[2 pi i hbar t]^(-1/2) exp[i (q1 - q0)^2 / (2 hbar t)]`.
pub fn free_kernel(q1: f64, q0: f64, t: f64, hbar: f64) -> Complex64 {
    let d = q1 - q0;
    slice_prefactor(Complex64::new(hbar, 0.0), t) * Complex64::from_polar(1.0, d * d / (2.0 * hbar * t))
}

fn check_points(points: &[f64], s: &DyadicSlicing, f: &SliceIntegrand) -> Result<()> {
    if points.len() != s.m() + 1 {
        return Err(Error::Invalid(format!("expected {} points, got {}", s.m() + 1, points.len())));
    }
    if points[0] != f.q_start || points[s.m()] != f.q_end {
        return Err(Error::Invalid("first and last points must equal the fixed endpoints".into()));
    }
    Ok(())
}

/// The sliced integrand at a point of `R^(m-1)` (with the fixed ends
/// included in `points`).
pub fn eval_g(points: &[f64], s: &DyadicSlicing, f: &SliceIntegrand) -> Result<Complex64> {
    check_points(points, s, f)?;
    Ok(eval_g_with_hbar(points, s.dt(), |u| f.shape.value(u), Complex64::new(f.hbar, 0.0)))
}

pub(crate) fn eval_g_with_hbar(points: &[f64], dt: f64, shape: impl Fn(f64) -> f64, hbar: Complex64) -> Complex64 {
    let action: f64 = points
        .windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            d * d / (2.0 * dt) - shape(w[0]) * dt
        })
        .sum();
    let m = (points.len() - 1) as u32;
    (I * action / hbar).exp() * slice_prefactor(hbar, dt).powu(m)
}

/// The potential part `exp[-(i/hbar) sum F(y_{j-1}) dt]` of the integrand.
pub fn potential_phase(points: &[f64], s: &DyadicSlicing, f: &SliceIntegrand) -> Result<Complex64> {
    check_points(points, s, f)?;
    let total: f64 = points[..s.m()].iter().map(|&y| f.shape.value(y)).sum::<f64>() * s.dt();
    Ok(Complex64::from_polar(1.0, -total / f.hbar))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    /// Raised-cosine taper over the outer 10% on each side.
    Cosine,
    None,
}

/// Periodic grid `x_j = x_min + j dx`, `dx = (x_max - x_min) / n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    x_min: f64,
    x_max: f64,
    n: usize,
    window: WindowKind,
}

impl Default for SpatialGrid {
    fn default() -> Self {
        Self { x_min: -20.0, x_max: 20.0, n: 2048, window: WindowKind::Cosine }
    }
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, n: usize, window: WindowKind) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::Invalid(format!("grid range [{x_min}, {x_max}] must be finite and increasing")));
        }
        if n < 64 || !n.is_power_of_two() {
            return Err(Error::Invalid(format!("grid size {n} must be a power of two of at least 64")));
        }
        Ok(Self { x_min, x_max, n, window })
    }

    pub fn with_window(mut self, window: WindowKind) -> Self {
        self.window = window;
        self
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn window(&self) -> WindowKind {
        self.window
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Signed wavenumber of FFT bin `j`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        let idx = if j < self.n / 2 { j as f64 } else { j as f64 - self.n as f64 };
        2.0 * PI * idx / self.length()
    }

    pub fn k_nyquist(&self) -> f64 {
        PI / self.dx()
    }

    /// Region where the window equals one.
    pub fn interior(&self) -> (f64, f64) {
        let margin = 0.1 * self.length();
        (self.x_min + margin, self.x_max - margin)
    }

    pub fn is_interior(&self, x: f64) -> bool {
        let (lo, hi) = self.interior();
        x >= lo && x <= hi
    }

    pub fn window_value(&self, x: f64) -> f64 {
        match self.window {
            WindowKind::None => 1.0,
            WindowKind::Cosine => {
                let margin = 0.1 * self.length();
                let depth = (x - self.x_min).min(self.x_max - x);
                if depth >= margin {
                    1.0
                } else if depth <= 0.0 {
                    0.0
                } else {
                    0.5 * (1.0 - (PI * depth / margin).cos())
                }
            }
        }
    }

    pub fn window_values(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.window_value(self.x(j))).collect()
    }

    /// Trapezoid weights of the periodic grid.
    pub fn weights(&self) -> Vec<f64> {
        vec![self.dx(); self.n]
    }
}

/// Complex samples on a spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: SpatialGrid,
    pub values: Vec<Complex64>,
}

impl GridField {
    pub fn norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx()).sqrt()
    }

    /// Trigonometric interpolation of the samples at `x`.
    pub fn value_at(&self, x: f64) -> Complex64 {
        let mut spectrum = self.values.clone();
        FftPlanner::new().plan_fft_forward(self.grid.n).process(&mut spectrum);
        spectral_interpolate(&self.grid, &spectrum, x)
    }
}

fn spectral_interpolate(grid: &SpatialGrid, spectrum: &[Complex64], x: f64) -> Complex64 {
    let n = grid.n;
    let s = x - grid.x_min;
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, c) in spectrum.iter().enumerate() {
        if j == n / 2 {
            acc += c * (grid.wavenumber(j) * s).cos();
        } else {
            acc += c * Complex64::from_polar(1.0, grid.wavenumber(j) * s);
        }
    }
    acc / n as f64
}

/// Potential kick and exact free transport for one slice on a grid.
pub struct SplitStep {
    grid: SpatialGrid,
    hbar: f64,
    dt: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    drift_phase: Vec<Complex64>,
    window: Vec<f64>,
    scratch: Vec<Complex64>,
    high_band: Vec<bool>,
}

impl SplitStep {
    pub fn new(grid: &SpatialGrid, hbar: f64, dt: f64) -> Result<Self> {
        if !(hbar > 0.0 && dt > 0.0) {
            return Err(Error::Invalid("split step needs positive hbar and dt".into()));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.n);
        let inverse = planner.plan_fft_inverse(grid.n);
        let scratch =
            vec![Complex64::new(0.0, 0.0); forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len())];
        let drift_phase = (0..grid.n)
            .map(|j| {
                let k = grid.wavenumber(j);
                Complex64::from_polar(1.0 / grid.n as f64, -hbar * k * k * dt / 2.0)
            })
            .collect();
        let cutoff = LEAKAGE_BAND * grid.k_nyquist();
        let high_band = (0..grid.n).map(|j| grid.wavenumber(j).abs() > cutoff).collect();
        Ok(Self {
            grid: *grid,
            hbar,
            dt,
            forward,
            inverse,
            drift_phase,
            window: grid.window_values(),
            scratch,
            high_band,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    /// Multiplies by `exp[-(i/hbar) V(x) dt]`.
    pub fn kick(&self, field: &mut [Complex64], potential: impl Fn(f64) -> f64) {
        for (j, v) in field.iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, -potential(self.grid.x(j)) * self.dt / self.hbar);
        }
    }

    /// Free transport over `dt` in Fourier space. Returns the fraction of the
    /// spectral norm found beyond the leakage band.
    pub fn drift(&mut self, field: &mut [Complex64]) -> f64 {
        self.forward.process_with_scratch(field, &mut self.scratch);
        let mut high = 0.0;
        let mut total = 0.0;
        for (j, v) in field.iter_mut().enumerate() {
            let e = v.norm_sqr();
            total += e;
            if self.high_band[j] {
                high += e;
            }
            *v *= self.drift_phase[j];
        }
        self.inverse.process_with_scratch(field, &mut self.scratch);
        if total > 0.0 {
            (high / total).sqrt()
        } else {
            0.0
        }
    }

    pub fn apply_window(&self, field: &mut [Complex64]) {
        if self.grid.window == WindowKind::None {
            return;
        }
        for (v, w) in field.iter_mut().zip(&self.window) {
            *v *= *w;
        }
    }
}

/// Smooth step: 1 below `k1`, 0 above `k2`, C-infinity in between.
fn band_filter(k: f64, k1: f64, k2: f64) -> f64 {
    let a = k.abs();
    if a <= k1 {
        return 1.0;
    }
    if a >= k2 {
        return 0.0;
    }
    let s = (a - k1) / (k2 - k1);
    let bump = |x: f64| if x <= 0.0 { 0.0 } else { (-1.0 / x).exp() };
    let up = bump(1.0 - s);
    up / (up + bump(s))
}

/// Split-step propagation of a point source at `q_start` through `m` slices
/// of `[t0, t1]` under the potential `potential(y, t)`, sampled at the left
/// end of each slice. `q_target` widens the source bandwidth so that the
/// classical momentum towards it is resolved.
#[allow(clippy::too_many_arguments)]
pub(crate) fn split_step_kernel(
    grid: &SpatialGrid,
    hbar: f64,
    q_start: f64,
    t0: f64,
    t1: f64,
    m: usize,
    potential: &(dyn Fn(f64, f64) -> f64 + Sync),
    q_target: Option<f64>,
) -> Result<GridField> {
    if !grid.is_interior(q_start) {
        return Err(Error::Invalid(format!("start point {q_start} is outside the grid interior")));
    }
    if let Some(q) = q_target {
        if !grid.is_interior(q) {
            return Err(Error::Invalid(format!("end point {q} is outside the grid interior")));
        }
    }
    let span = t1 - t0;
    let dt = span / m as f64;
    let mut step = SplitStep::new(grid, hbar, dt)?;
    let (lo, hi) = grid.interior();
    let reach = 0.9 * (q_start - lo).min(hi - q_start) / (hbar * span);
    let needed = q_target.map_or(0.0, |q| 3.0 * (q - q_start).abs() / (hbar * span));
    let k2 = reach.max(needed).min(2.0 / 3.0 * grid.k_nyquist());
    let k1 = 0.5 * k2;

    // The first slice: free kernel from the source, band limited, times the
    // potential phase at the source.
    let source_phase = Complex64::from_polar(1.0 / grid.length(), -potential(q_start, t0) * dt / hbar);
    let mut field: Vec<Complex64> = (0..grid.n)
        .map(|j| {
            let k = grid.wavenumber(j);
            let phase = -k * (q_start - grid.x_min) - hbar * k * k * dt / 2.0;
            source_phase * Complex64::from_polar(band_filter(k, k1, k2), phase)
        })
        .collect();
    step.inverse.process(&mut field);
    step.apply_window(&mut field);

    for j in 1..m {
        let t = if j == m { t1 } else { t0 + j as f64 * span / m as f64 };
        step.kick(&mut field, |y| potential(y, t));
        let leak = step.drift(&mut field);
        if leak >= LEAKAGE_LIMIT {
            return Err(Error::GridLeakage { fraction: leak });
        }
        step.apply_window(&mut field);
    }
    Ok(GridField { grid: *grid, values: field })
}

/// One-sided field after the last slice together with the sliced amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct SlicedField {
    /// `y -> Gamma_m(y; q_start)`, from a single forward run.
    pub field: GridField,
    /// `Gamma_m(q_end; q_start)`, from the two-sided evaluation.
    pub amplitude: Complex64,
}

/// Forward field from `q_start` plus the amplitude at `q_end`.
pub fn gamma_m_grid(s: &DyadicSlicing, f: &SliceIntegrand, grid: &SpatialGrid) -> Result<SlicedField> {
    let shape = &f.shape;
    let potential = |y: f64, _: f64| shape.value(y);
    let field = split_step_kernel(grid, f.hbar, f.q_start, s.t_start, s.t_end, s.m(), &potential, Some(f.q_end))?;
    let amplitude = sliced_amplitude_grid(grid, f.hbar, f.q_start, f.q_end, s.t_start, s.t_end, s.m(), &potential)?;
    Ok(SlicedField { field, amplitude })
}

pub fn gamma_m_grid_value(s: &DyadicSlicing, f: &SliceIntegrand, grid: &SpatialGrid) -> Result<Complex64> {
    let shape = &f.shape;
    sliced_amplitude_grid(grid, f.hbar, f.q_start, f.q_end, s.t_start, s.t_end, s.m(), &|y, _| shape.value(y))
}

/// Sliced amplitude from `q_start` at `t0` to `q_end` at `t1`, computed by
/// running the first half of the slices forward from `q_start`, the second
/// half transposed from `q_end`, and overlapping the two fields at the middle
/// node. Each run then only needs to resolve half the travel time, which keeps
/// the band-limited source accurate on a modest grid.
#[allow(clippy::too_many_arguments)]
pub(crate) fn sliced_amplitude_grid(
    grid: &SpatialGrid,
    hbar: f64,
    q_start: f64,
    q_end: f64,
    t0: f64,
    t1: f64,
    m: usize,
    potential: &(dyn Fn(f64, f64) -> f64 + Sync),
) -> Result<Complex64> {
    let dt = (t1 - t0) / m as f64;
    let kick = |y: f64, t: f64| Complex64::from_polar(1.0, -potential(y, t) * dt / hbar);
    if m == 1 {
        if !(grid.is_interior(q_start) && grid.is_interior(q_end)) {
            return Err(Error::Invalid("endpoints must lie in the grid interior".into()));
        }
        return Ok(free_kernel(q_end, q_start, dt, hbar) * kick(q_start, t0));
    }
    let half = m / 2;
    let t_mid = t0 + half as f64 * dt;
    let reversed = |y: f64, s: f64| potential(y, t1 - s);
    let (forward, backward) = rayon::join(
        || split_step_kernel(grid, hbar, q_start, t0, t_mid, half, potential, None),
        || split_step_kernel(grid, hbar, q_end, 0.0, t1 - t_mid, m - half, &reversed, None),
    );
    let (forward, backward) = (forward?, backward?);
    let overlap: Complex64 = (0..grid.n).map(|j| forward.values[j] * kick(grid.x(j), t_mid) * backward.values[j]).sum();
    Ok(overlap * grid.dx() / kick(q_end, t1))
}

/// Sliced kernel as a function of its start point, `y -> Gamma_m(q_end; y)`.
/// The left-point rule pairs the potential with the start of each slice, so
/// the reversed field picks up `P(y) / P(q_end)` with `P = exp[-(i/hbar) F dt]`.
pub fn gamma_m_grid_to_end(s: &DyadicSlicing, f: &SliceIntegrand, grid: &SpatialGrid) -> Result<GridField> {
    let shape = &f.shape;
    let mut field =
        split_step_kernel(grid, f.hbar, f.q_end, s.t_start, s.t_end, s.m(), &|y, _| shape.value(y), Some(f.q_start))?;
    let phase = |y: f64| Complex64::from_polar(1.0, -f.shape.value(y) * s.dt() / f.hbar);
    let end = phase(f.q_end);
    for (j, v) in field.values.iter_mut().enumerate() {
        *v *= phase(grid.x(j)) / end;
    }
    Ok(field)
}

/// Exact sliced amplitude for `F(u) = kappa u^2 / 2 + beta u + gamma`.
pub fn gamma_m_analytic(s: &DyadicSlicing, f: &SliceIntegrand) -> Result<Complex64> {
    let coeffs = f
        .shape
        .quadratic_coefficients()
        .ok_or_else(|| Error::Invalid("the exact engine needs a shape of degree at most two".into()))?;
    sliced_gaussian(f.q_start, f.q_end, s.dt(), s.m(), f.hbar, |_| coeffs)
}

/// Discrete Gaussian integral over the interior points, with slice `j`
/// (starting at node `j`, `0 <= j < m`) using the quadratic `coeffs(j)`.
pub(crate) fn sliced_gaussian(
    q_start: f64,
    q_end: f64,
    dt: f64,
    m: usize,
    hbar: f64,
    coeffs: impl Fn(usize) -> (f64, f64, f64),
) -> Result<Complex64> {
    let span = dt * m as f64;
    let line = |j: usize| q_start + (q_end - q_start) * j as f64 / m as f64;
    let quad = |j: usize, u: f64| {
        let (k, b, g) = coeffs(j);
        0.5 * k * u * u + b * u + g
    };
    // Shifting by the straight line removes the kinetic cross terms.
    let d = q_end - q_start;
    let mut action = d * d / (2.0 * span) - dt * (0..m).map(|j| quad(j, line(j))).sum::<f64>();
    let n = m - 1;
    let mut log_det = 0.0;
    let mut negative = 0usize;
    if n > 0 {
        let off = -1.0 / dt;
        let mut pivots = Vec::with_capacity(n);
        let mut g = Vec::with_capacity(n);
        for i in 1..=n {
            let (k, b, _) = coeffs(i);
            let diag = 2.0 / dt - dt * k;
            let rhs = dt * (k * line(i) + b); // -b_i
            let (p, gi) = match pivots.last() {
                None => (diag, rhs),
                Some(&prev) => (diag - off * off / prev, rhs - off / prev * g[g.len() - 1]),
            };
            if p == 0.0 || !p.is_finite() {
                return Err(Error::Domain("sliced quadratic form is singular (caustic)".into()));
            }
            pivots.push(p);
            g.push(gi);
        }
        // Back substitution for the stationary point z = M^{-1}(-b).
        let mut z = vec![0.0; n];
        z[n - 1] = g[n - 1] / pivots[n - 1];
        for i in (0..n - 1).rev() {
            z[i] = (g[i] - off * z[i + 1]) / pivots[i];
        }
        // S* = c + b.z / 2 with b = -rhs.
        let bz: f64 = (1..=n)
            .map(|i| {
                let (k, b, _) = coeffs(i);
                -dt * (k * line(i) + b) * z[i - 1]
            })
            .sum();
        action += 0.5 * bz;
        for &p in &pivots {
            log_det += p.abs().ln();
            if p < 0.0 {
                negative += 1;
            }
        }
    }
    let log_mag =
        0.5 * n as f64 * (2.0 * PI * hbar).ln() - 0.5 * log_det - 0.5 * m as f64 * (2.0 * PI * hbar * dt).ln();
    let morse = n as f64 - 2.0 * negative as f64;
    let phase = action / hbar + PI / 4.0 * morse - PI / 4.0 * m as f64;
    Ok(Complex64::from_polar(log_mag.exp(), phase))
}

/// Result of the regularized direct quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectEstimate {
    pub value: Complex64,
    pub error: f64,
    /// `|G(eps/4) - G(eps/2)| / |G(eps/2) - G(eps)|`.
    pub gap_ratio: f64,
    pub raw: [Complex64; 3],
}

pub const DEFAULT_EPS_ROT: f64 = 1e-3;

/// Tensor-grid quadrature of the integrand over `R^(m-1)`, `m <= 4`, with
/// `hbar -> hbar (1 - i eps)` in the kinetic factors, extrapolated to
/// `eps -> 0` from the values at `eps`, `eps/2` and `eps/4`.
///
/// The potential phases keep the real `hbar`: rotating them as well turns
/// `exp[-(i/hbar) F dt]` into a growing exponential for confining shapes and
/// the regularized integral stops existing beyond quadratic growth.
pub fn gamma_m_direct(s: &DyadicSlicing, f: &SliceIntegrand, eps_rot: f64) -> Result<DirectEstimate> {
    if s.m() > 4 {
        return Err(Error::Invalid(format!("direct quadrature supports m <= 4, got {}", s.m())));
    }
    if !(eps_rot > 0.0 && eps_rot < 0.1) {
        return Err(Error::Invalid(format!("eps_rot must lie in (0, 0.1), got {eps_rot}")));
    }
    let eps = [eps_rot, eps_rot / 2.0, eps_rot / 4.0];
    let raw: Vec<Complex64> = eps.par_iter().map(|&e| direct_regularized(s, f, e)).collect::<Result<_>>()?;
    let (a, b, c) = (raw[0], raw[1], raw[2]);
    let first = (b - a).norm();
    let gap_ratio = if first == 0.0 { 0.0 } else { (c - b).norm() / first };
    if gap_ratio > 0.75 {
        return Err(Error::NonConvergence(format!("eps extrapolation gap ratio {gap_ratio:.3} exceeds 0.75")));
    }
    let r1a = 2.0 * b - a;
    let r1b = 2.0 * c - b;
    let value = (4.0 * r1b - r1a) / 3.0;
    Ok(DirectEstimate { value, error: (value - r1b).norm(), gap_ratio, raw: [a, b, c] })
}

fn direct_regularized(s: &DyadicSlicing, f: &SliceIntegrand, eps: f64) -> Result<Complex64> {
    let m = s.m();
    let dt = s.dt();
    let hbar = Complex64::new(f.hbar, -f.hbar * eps);
    let pref = slice_prefactor(hbar, dt);
    let kernel = |d: f64| pref * (I * d * d / (2.0 * hbar * dt)).exp();
    let phase = |y: f64| Complex64::from_polar(1.0, -f.shape.value(y) * dt / f.hbar);
    if m == 1 {
        return Ok(kernel(f.q_end - f.q_start) * phase(f.q_start));
    }
    // Lags beyond d_max carry less than e^-40 of the kernel.
    let d_max = (80.0 * f.hbar * dt / eps).sqrt();
    let h = PI * f.hbar * dt / (1.2 * d_max);
    let lag = (d_max / h).ceil() as usize;
    let taps: Vec<Complex64> = (0..=2 * lag).map(|i| kernel((i as f64 - lag as f64) * h)).collect();
    let center = 0.5 * (f.q_start + f.q_end);
    let mut half_width = 0.5 * (f.q_end - f.q_start).abs() + 1.2 * d_max * ((m - 1) as f64).sqrt();
    let mut planner = FftPlanner::new();
    for _ in 0..4 {
        let count = 2 * (half_width / h).ceil() as usize + 1;
        let ys: Vec<f64> = (0..count).map(|i| center + (i as f64 - (count / 2) as f64) * h).collect();
        let steepest =
            ys.windows(2).map(|w| (f.shape.value(w[1]) - f.shape.value(w[0])).abs() * dt / f.hbar).fold(0.0, f64::max);
        if !(steepest <= 0.5 * PI) {
            return Err(Error::Invalid(format!(
                "potential phase steps {steepest:.3e} rad per lattice cell; shape grows too fast for direct quadrature"
            )));
        }
        let mut field: Vec<Complex64> = ys.iter().map(|&y| kernel(y - f.q_start) * phase(f.q_start)).collect();
        let len = (count + 2 * lag + 1).next_power_of_two();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let mut tap_spec = vec![Complex64::new(0.0, 0.0); len];
        tap_spec[..taps.len()].copy_from_slice(&taps);
        fwd.process(&mut tap_spec);
        for _ in 2..m {
            let mut buf = vec![Complex64::new(0.0, 0.0); len];
            for (i, (&y, v)) in ys.iter().zip(&field).enumerate() {
                buf[i] = v * phase(y) * h;
            }
            fwd.process(&mut buf);
            for (b, t) in buf.iter_mut().zip(&tap_spec) {
                *b *= t / len as f64;
            }
            inv.process(&mut buf);
            field = buf[lag..lag + count].to_vec();
        }
        let peak = field.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let edge = count / 20;
        let rim = field[..edge].iter().chain(&field[count - edge..]).map(|v| v.norm()).fold(0.0, f64::max);
        if !peak.is_finite() {
            return Err(Error::NonConvergence("direct quadrature overflowed".into()));
        }
        if rim <= 1e-10 * peak {
            let total: Complex64 = ys.iter().zip(&field).map(|(&y, v)| kernel(f.q_end - y) * phase(y) * v).sum();
            return Ok(total * h);
        }
        half_width *= 2.0;
    }
    Err(Error::NonConvergence("direct quadrature domain did not contain the integrand".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Engine {
    /// Exact Gaussian engine when the shape allows it, grid otherwise.
    #[default]
    Auto,
    Grid,
    Analytic,
}

impl Engine {
    pub fn resolve(self, shape: &ShapeFunction) -> Engine {
        match self {
            Engine::Auto if shape.quadratic_coefficients().is_some() => Engine::Analytic,
            Engine::Auto => Engine::Grid,
            other => other,
        }
    }
}

pub fn gamma_m(engine: Engine, s: &DyadicSlicing, f: &SliceIntegrand, grid: &SpatialGrid) -> Result<Complex64> {
    match engine.resolve(&f.shape) {
        Engine::Analytic => gamma_m_analytic(s, f),
        _ => gamma_m_grid_value(s, f, grid),
    }
}

/// Sequence of sliced amplitudes with Cauchy-gap diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeEstimate {
    pub values: Vec<(u32, Complex64)>,
    /// `|Gamma_{2m} - Gamma_m|` for consecutive entries of `values`.
    pub cauchy_gaps: Vec<f64>,
    /// The last gap is within tolerance.
    pub converged: bool,
    /// Smallest `q` from which every later gap is within tolerance.
    pub converged_at: Option<u32>,
    pub final_value: Complex64,
    pub gaps_decreasing: bool,
}

impl AmplitudeEstimate {
    pub fn gap_ratios(&self) -> Vec<f64> {
        self.cauchy_gaps.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

pub fn refine_to_convergence(
    f: &SliceIntegrand,
    t_span: (f64, f64),
    grid: &SpatialGrid,
    q_max: u32,
    tol: f64,
) -> Result<AmplitudeEstimate> {
    refine_with(Engine::Grid, f, t_span, grid, q_max, tol)
}

/// Computes `Gamma_{2^q}` for `q = 1..=q_max` with the given engine.
pub fn refine_with(
    engine: Engine,
    f: &SliceIntegrand,
    t_span: (f64, f64),
    grid: &SpatialGrid,
    q_max: u32,
    tol: f64,
) -> Result<AmplitudeEstimate> {
    if !(1..=MAX_REFINEMENT_Q).contains(&q_max) {
        return Err(Error::Invalid(format!("q_max must lie in 1..={MAX_REFINEMENT_Q}, got {q_max}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Invalid(format!("tolerance must be positive, got {tol}")));
    }
    let values: Vec<(u32, Complex64)> = (1..=q_max)
        .into_par_iter()
        .map(|q| {
            let s = DyadicSlicing::new(t_span.0, t_span.1, q)?;
            Ok((q, gamma_m(engine, &s, f, grid)?))
        })
        .collect::<Result<_>>()?;
    let cauchy_gaps: Vec<f64> = values.windows(2).map(|w| (w[1].1 - w[0].1).norm()).collect();
    let within = |i: usize| cauchy_gaps[i] <= tol * values[i].1.norm();
    let converged = !cauchy_gaps.is_empty() && within(cauchy_gaps.len() - 1);
    let converged_at = (0..cauchy_gaps.len()).rev().take_while(|&i| within(i)).last().map(|i| values[i].0);
    let scale = values.last().map_or(0.0, |v| v.1.norm());
    let tail = cauchy_gaps.len().saturating_sub(3);
    let gaps_decreasing = cauchy_gaps[tail..].windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-13 * scale);
    let final_value = values.last().expect("q_max >= 1").1;
    Ok(AmplitudeEstimate { values, cauchy_gaps, converged, converged_at, final_value, gaps_decreasing })
}
