//! Dormand–Prince 5(4) integrator with mixed absolute/relative step control.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

const MAX_STEPS: usize = 2_000_000;

/// Accepted steps of an integration run, including the initial point.
#[derive(Debug, Clone)]
pub struct Solution<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t1` (either direction).
///
/// `rhs` may fail (e.g. when a profile leaves its domain); the failure is
/// propagated unchanged.
pub fn dopri5<const N: usize, F>(
    rhs: F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Solution<N>>
where
    F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
{
    if !(abs_tol > 0.0 && rel_tol >= 0.0) {
        return Err(Error::Invalid("tolerances must be positive".into()));
    }
    let mut sol = Solution { times: vec![t0], states: vec![y0] };
    if t0 == t1 {
        return Ok(sol);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, &y)?;
    let mut h = initial_step(&y, &k1, span, abs_tol, rel_tol);
    let h_min = 1e-14 * span.max(t0.abs()).max(1.0);

    for _ in 0..MAX_STEPS {
        let remaining = (t1 - t).abs();
        if remaining <= 0.0 {
            return Ok(sol);
        }
        let last = h >= remaining;
        let step = if last { remaining } else { h };
        let hs = dir * step;

        let mut k = [[0.0; N]; 7];
        k[0] = k1;
        for s in 1..7 {
            let mut ys = y;
            for (i, v) in ys.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                *v += hs * acc;
            }
            k[s] = rhs(t + C[s] * hs, &ys)?;
        }
        let mut y_new = y;
        for (i, v) in y_new.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(6) {
                acc += A[6][j] * kj[i];
            }
            *v += hs * acc;
        }
        let mut err_sq = 0.0;
        for i in 0..N {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            let scale = abs_tol + rel_tol * y[i].abs().max(y_new[i].abs());
            err_sq += (hs * e / scale).powi(2);
        }
        let err = (err_sq / N as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::NonConvergence(format!("non-finite state at t = {t}")));
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + hs };
            y = y_new;
            // FSAL: the seventh stage is the derivative at the new point.
            k1 = k[6];
            sol.times.push(t);
            sol.states.push(y);
            if last {
                return Ok(sol);
            }
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = step * factor;
        if h < h_min {
            return Err(Error::NonConvergence(format!("step size underflow ({h:.3e}) at t = {t}")));
        }
    }
    Err(Error::NonConvergence(format!("exceeded {MAX_STEPS} steps")))
}

fn initial_step<const N: usize>(y: &[f64; N], dy: &[f64; N], span: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..N {
        let sc = abs_tol + rel_tol * y[i].abs();
        d0 += (y[i] / sc).powi(2);
        d1 += (dy[i] / sc).powi(2);
    }
    let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span).max(1e-12 * span)
}
