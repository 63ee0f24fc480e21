//! Built-in time profiles for the scale `rho(t)` and shift `a(t)`, and the
//! shape functions `F(u)` of the reducible potentials.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User supplied function with optional analytic derivatives. Missing
/// derivatives fall back to central differences.
#[derive(Clone)]
pub struct CustomFn {
    pub value: RealFn,
    pub d1: Option<RealFn>,
    pub d2: Option<RealFn>,
}

impl CustomFn {
    pub fn new(value: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { value: Arc::new(value), d1: None, d2: None }
    }

    pub fn with_d1(mut self, d1: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.d1 = Some(Arc::new(d1));
        self
    }

    pub fn with_d2(mut self, d2: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.d2 = Some(Arc::new(d2));
        self
    }
}

impl fmt::Debug for CustomFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomFn").field("d1", &self.d1.is_some()).field("d2", &self.d2.is_some()).finish()
    }
}

fn first_step(t: f64) -> f64 {
    f64::EPSILON.cbrt() * t.abs().max(1.0)
}

fn second_step(t: f64) -> f64 {
    f64::EPSILON.powf(0.25) * t.abs().max(1.0)
}

/// Central first difference with step `eps^(1/3) * max(1, |t|)`.
pub fn central_d1(f: impl Fn(f64) -> f64, t: f64) -> f64 {
    let h = first_step(t);
    (f(t + h) - f(t - h)) / (2.0 * h)
}

/// Central second difference with step `eps^(1/4) * max(1, |t|)`.
pub fn central_d2(f: impl Fn(f64) -> f64, t: f64) -> f64 {
    let h = second_step(t);
    (f(t + h) - 2.0 * f(t) + f(t - h)) / (h * h)
}

/// Natural cubic spline through tabulated samples, extended linearly past
/// the end knots.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl CubicSpline {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = knots.len();
        if n < 3 || values.len() != n {
            return Err(Error::Invalid("tabulated profile needs at least three knots and matching values".into()));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invalid("spline knots must be strictly increasing".into()));
        }
        if values.iter().chain(knots.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("spline samples must be finite".into()));
        }
        // Tridiagonal system for the interior second derivatives.
        let m = n - 2;
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        for i in 0..m {
            let h0 = knots[i + 1] - knots[i];
            let h1 = knots[i + 2] - knots[i + 1];
            diag[i] = 2.0 * (h0 + h1);
            upper[i] = h1;
            rhs[i] = 6.0 * ((values[i + 2] - values[i + 1]) / h1 - (values[i + 1] - values[i]) / h0);
        }
        for i in 1..m {
            let lower = knots[i + 1] - knots[i];
            let w = lower / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut second = vec![0.0; n];
        for i in (0..m).rev() {
            let next = if i + 1 < m { second[i + 2] } else { 0.0 };
            second[i + 1] = (rhs[i] - upper[i] * next) / diag[i];
        }
        Ok(Self { knots, values, second })
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.knots.len();
        match self.knots.partition_point(|&k| k <= t) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        }
    }

    /// Value, first and second derivative at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let n = self.knots.len();
        let (t_lo, t_hi) = (self.knots[0], self.knots[n - 1]);
        if t < t_lo || t > t_hi {
            let (edge, i) = if t < t_lo { (t_lo, 0) } else { (t_hi, n - 2) };
            let (v, d, _) = self.eval_segment(i, edge);
            return (v + d * (t - edge), d, 0.0);
        }
        self.eval_segment(self.segment(t), t)
    }

    fn eval_segment(&self, i: usize, t: f64) -> (f64, f64, f64) {
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        let h = x1 - x0;
        let a = (x1 - t) / h;
        let b = (t - x0) / h;
        let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d = (y1 - y0) / h + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        let dd = a * m0 + b * m1;
        (v, d, dd)
    }
}

/// A twice differentiable function of time.
#[derive(Debug, Clone)]
pub enum Profile {
    Constant(f64),
    /// `c0 + c1 t + c2 t^2 + ...`
    Polynomial(Vec<f64>),
    /// `amplitude * cos(omega t + phase)`
    Cos {
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
    /// `sqrt(c0 + c1 t + c2 t^2)`
    SqrtQuadratic {
        c0: f64,
        c1: f64,
        c2: f64,
    },
    /// `amplitude * exp(rate t)`
    Exp {
        amplitude: f64,
        rate: f64,
    },
    Tabulated(CubicSpline),
    /// `factor * base(t)`
    Scaled {
        factor: f64,
        base: Box<Profile>,
    },
    Custom(CustomFn),
}

impl Profile {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Profile::Constant(c) => *c,
            Profile::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &k| acc * t + k),
            Profile::Cos { amplitude, omega, phase } => amplitude * (omega * t + phase).cos(),
            Profile::SqrtQuadratic { c0, c1, c2 } => (c0 + c1 * t + c2 * t * t).sqrt(),
            Profile::Exp { amplitude, rate } => amplitude * (rate * t).exp(),
            Profile::Tabulated(s) => s.eval(t).0,
            Profile::Scaled { factor, base } => factor * base.value(t),
            Profile::Custom(f) => (f.value)(t),
        }
    }

    pub fn d1(&self, t: f64) -> f64 {
        match self {
            Profile::Constant(_) => 0.0,
            Profile::Polynomial(c) => {
                c.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, &ck)| acc * t + k as f64 * ck)
            }
            Profile::Cos { amplitude, omega, phase } => -amplitude * omega * (omega * t + phase).sin(),
            Profile::SqrtQuadratic { c0, c1, c2 } => {
                let g = c0 + c1 * t + c2 * t * t;
                (c1 + 2.0 * c2 * t) / (2.0 * g.sqrt())
            }
            Profile::Exp { amplitude, rate } => amplitude * rate * (rate * t).exp(),
            Profile::Tabulated(s) => s.eval(t).1,
            Profile::Scaled { factor, base } => factor * base.d1(t),
            Profile::Custom(f) => match &f.d1 {
                Some(d1) => d1(t),
                None => central_d1(&*f.value, t),
            },
        }
    }

    pub fn d2(&self, t: f64) -> f64 {
        match self {
            Profile::Constant(_) => 0.0,
            Profile::Polynomial(c) => {
                c.iter().enumerate().skip(2).rev().fold(0.0, |acc, (k, &ck)| acc * t + (k * (k - 1)) as f64 * ck)
            }
            Profile::Cos { amplitude, omega, phase } => -amplitude * omega * omega * (omega * t + phase).cos(),
            Profile::SqrtQuadratic { c0, c1, c2 } => {
                let g = c0 + c1 * t + c2 * t * t;
                let dg = c1 + 2.0 * c2 * t;
                (4.0 * c2 * g - dg * dg) / (4.0 * g * g.sqrt())
            }
            Profile::Exp { amplitude, rate } => amplitude * rate * rate * (rate * t).exp(),
            Profile::Tabulated(s) => s.eval(t).2,
            Profile::Scaled { factor, base } => factor * base.d2(t),
            Profile::Custom(f) => match (&f.d2, &f.d1) {
                (Some(d2), _) => d2(t),
                (None, Some(d1)) => central_d1(&**d1, t),
                (None, None) => central_d2(&*f.value, t),
            },
        }
    }

    /// Multiply by a constant, e.g. to build `a = C rho`.
    pub fn scaled(self, factor: f64) -> Profile {
        Profile::Scaled { factor, base: Box::new(self) }
    }

    /// Checks the derivatives against central differences of the next lower
    /// derivative at `samples` points spread over `window`. Derivatives that
    /// are themselves differenced (custom profiles without supplied
    /// derivatives) are not re-checked.
    pub fn check_derivatives(&self, window: (f64, f64), samples: usize, rel_tol: f64) -> Result<()> {
        let (check_d1, check_d2) = match self {
            Profile::Custom(f) => (f.d1.is_some(), f.d2.is_some()),
            _ => (true, true),
        };
        let d1_supplied = match self {
            Profile::Custom(f) => f.d1.is_some(),
            _ => true,
        };
        let n = samples.max(2);
        for i in 0..n {
            let t = window.0 + (window.1 - window.0) * i as f64 / (n - 1) as f64;
            let v = self.value(t);
            let d1 = self.d1(t);
            let d2 = self.d2(t);
            if !(v.is_finite() && d1.is_finite() && d2.is_finite()) {
                return Err(Error::Domain(format!("profile is not finite at t = {t}")));
            }
            if check_d1 {
                let fd1 = central_d1(|s| self.value(s), t);
                if (fd1 - d1).abs() > rel_tol * 1f64.max(d1.abs()).max(v.abs()) {
                    return Err(Error::Invalid(format!(
                        "first derivative inconsistent at t = {t}: supplied {d1}, differenced {fd1}"
                    )));
                }
            }
            if check_d2 {
                let fd2 = if d1_supplied { central_d1(|s| self.d1(s), t) } else { central_d2(|s| self.value(s), t) };
                if (fd2 - d2).abs() > rel_tol * 1f64.max(d2.abs()).max(d1.abs()) {
                    return Err(Error::Invalid(format!(
                        "second derivative inconsistent at t = {t}: supplied {d2}, differenced {fd2}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Values of the scale and shift profiles and their derivatives at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSample {
    pub rho: f64,
    pub rho_d1: f64,
    pub rho_d2: f64,
    pub a: f64,
    pub a_d1: f64,
    pub a_d2: f64,
}

/// The pair `(rho, a)` that generates a reducible potential.
#[derive(Debug, Clone)]
pub struct ScaleProfile {
    pub rho: Profile,
    pub a: Profile,
}

impl ScaleProfile {
    pub fn new(rho: Profile, a: Profile) -> Self {
        Self { rho, a }
    }

    /// `rho = 1`, `a = 0`.
    pub fn identity() -> Self {
        Self::new(Profile::Constant(1.0), Profile::Constant(0.0))
    }

    pub fn sample(&self, t: f64) -> ProfileSample {
        ProfileSample {
            rho: self.rho.value(t),
            rho_d1: self.rho.d1(t),
            rho_d2: self.rho.d2(t),
            a: self.a.value(t),
            a_d1: self.a.d1(t),
            a_d2: self.a.d2(t),
        }
    }
}

/// Energy-like function `F(u)` of the scaled coordinate `u = (x - a) / rho`.
#[derive(Debug, Clone)]
pub enum ShapeFunction {
    Zero,
    Constant(f64),
    /// `slope * u`
    Linear(f64),
    /// `stiffness * u^2 / 2`
    Quadratic(f64),
    /// `coefficient * u^4`
    Quartic(f64),
    /// `scale * |u|`
    Abs(f64),
    Custom(CustomFn),
}

impl ShapeFunction {
    pub fn value(&self, u: f64) -> f64 {
        match self {
            ShapeFunction::Zero => 0.0,
            ShapeFunction::Constant(c) => *c,
            ShapeFunction::Linear(s) => s * u,
            ShapeFunction::Quadratic(k) => 0.5 * k * u * u,
            ShapeFunction::Quartic(c) => c * u * u * u * u,
            ShapeFunction::Abs(s) => s * u.abs(),
            ShapeFunction::Custom(f) => (f.value)(u),
        }
    }

    pub fn d1(&self, u: f64) -> f64 {
        match self {
            ShapeFunction::Zero | ShapeFunction::Constant(_) => 0.0,
            ShapeFunction::Linear(s) => *s,
            ShapeFunction::Quadratic(k) => k * u,
            ShapeFunction::Quartic(c) => 4.0 * c * u * u * u,
            ShapeFunction::Abs(s) => {
                if u == 0.0 {
                    0.0
                } else {
                    s * u.signum()
                }
            }
            ShapeFunction::Custom(f) => match &f.d1 {
                Some(d1) => d1(u),
                None => central_d1(&*f.value, u),
            },
        }
    }

    /// Coefficients `(kappa, beta, gamma)` with `F(u) = kappa u^2 / 2 + beta u + gamma`
    /// when the shape is a polynomial of degree at most two.
    pub fn quadratic_coefficients(&self) -> Option<(f64, f64, f64)> {
        match self {
            ShapeFunction::Zero => Some((0.0, 0.0, 0.0)),
            ShapeFunction::Constant(c) => Some((0.0, 0.0, *c)),
            ShapeFunction::Linear(s) => Some((0.0, *s, 0.0)),
            ShapeFunction::Quadratic(k) => Some((*k, 0.0, 0.0)),
            ShapeFunction::Quartic(c) if *c == 0.0 => Some((0.0, 0.0, 0.0)),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.quadratic_coefficients(), Some((k, b, g)) if k == 0.0 && b == 0.0 && g == 0.0)
    }
}
