//! Independent oracles shared by the integration and acceptance tests.
//!
//! They only use the generic determinant-based analysis routines on a
//! modified Gauss tableau, never the closed forms in `fitting`.

#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};

use fitgauss::analysis::{amplification, dissipation, phase_lag};
use fitgauss::integrator::{FrequencySchedule, OdeSystem};
use fitgauss::tableau::{gauss2, ButcherTableau};
use nalgebra::DMatrix;
use num_complex::Complex64;

pub fn gauss_with(b2: f64, a22: f64) -> ButcherTableau {
    gauss2()
        .with_weight(1, b2)
        .with_stage_coefficient(1, 1, a22)
}

/// `Im(P(iv) e^{-iv})`, which is affine-over-positive in `b2`.
fn phase_residual(b2: f64, v: f64) -> f64 {
    let p = amplification(&gauss_with(b2, 0.25), Complex64::new(0.0, v))
        .expect("regular")
        .value;
    (p * Complex64::from_polar(1.0, -v)).im
}

/// Zero phase-lag `b2` by bisection, or `None` when the only sign change
/// leaves `P(iv) e^{-iv}` negative (phase pi instead of 0).
pub fn bisect_phase_fitted_b2(v: f64) -> Option<f64> {
    let (mut lo, mut hi) = (0.5 - 1.0, 0.5 + 1.0);
    let mut width = 1.0;
    while phase_residual(lo, v).signum() == phase_residual(hi, v).signum() {
        width *= 2.0;
        if width > 1e8 {
            return None;
        }
        lo = 0.5 - width;
        hi = 0.5 + width;
    }
    let flo = phase_residual(lo, v);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phase_residual(mid, v).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b2 = 0.5 * (lo + hi);
    let p = amplification(&gauss_with(b2, 0.25), Complex64::new(0.0, v))
        .ok()?
        .value;
    ((p * Complex64::from_polar(1.0, -v)).re > 0.0).then_some(b2)
}

fn fitted_residual(x: [f64; 2], v: f64) -> Option<[f64; 2]> {
    let t = gauss_with(x[0], x[1]);
    Some([phase_lag(&t, v).ok()?, dissipation(&t, v).ok()?])
}

/// Solves `phase_lag = dissipation = 0` for `(b2, a22)` by Newton's method
/// with a central-difference Jacobian, starting from `start`.
pub fn newton_phase_dissipation(v: f64, start: [f64; 2]) -> Option<[f64; 2]> {
    let mut x = start;
    let mut r = fitted_residual(x, v)?;
    for _ in 0..100 {
        let norm = r[0].abs().max(r[1].abs());
        if norm < 1e-15 {
            return Some(x);
        }
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let h = 1e-6 * x[k].abs().max(1e-3);
            let (mut xp, mut xm) = (x, x);
            xp[k] += h;
            xm[k] -= h;
            let (fp, fm) = (fitted_residual(xp, v)?, fitted_residual(xm, v)?);
            for i in 0..2 {
                jac[i][k] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dx = [
            (jac[1][1] * r[0] - jac[0][1] * r[1]) / det,
            (jac[0][0] * r[1] - jac[1][0] * r[0]) / det,
        ];
        // Halve the step until the residual drops.
        let mut lambda = 1.0;
        loop {
            let cand = [x[0] - lambda * dx[0], x[1] - lambda * dx[1]];
            if let Some(rc) = fitted_residual(cand, v) {
                if rc[0].abs().max(rc[1].abs()) < norm || lambda < 1e-6 {
                    let stalled = cand == x;
                    x = cand;
                    r = rc;
                    if stalled {
                        return (r[0].abs().max(r[1].abs()) < 1e-12).then_some(x);
                    }
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-9 {
                return (norm < 1e-12).then_some(x);
            }
        }
    }
    (r[0].abs().max(r[1].abs()) < 1e-12).then_some(x)
}

/// Newton from several starting points; the first root found wins.
pub fn oracle_phase_dissipation(v: f64, previous: Option<[f64; 2]>) -> Option<[f64; 2]> {
    previous
        .into_iter()
        .chain([
            [0.5, 0.25],
            [0.4, 0.2],
            [0.6, 0.3],
            [0.3, 0.15],
            [1.0, 0.5],
            [-0.5, -0.25],
        ])
        .find_map(|s| newton_phase_dissipation(v, s))
}

/// `n` points log-spaced over `[lo, hi]`.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Least-squares slope of `log10(y)` against `log10(x)`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().log10()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Wraps a system and counts right-hand-side calls.
pub struct Counting<'a> {
    pub inner: &'a dyn OdeSystem,
    pub calls: AtomicUsize,
}

impl<'a> Counting<'a> {
    pub fn new(inner: &'a dyn OdeSystem) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn count(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl OdeSystem for Counting<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn rhs(&self, t: f64, y: &[f64], out: &mut [f64]) {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.rhs(t, y, out)
    }

    fn jacobian(&self, t: f64, y: &[f64]) -> Option<DMatrix<f64>> {
        self.inner.jacobian(t, y)
    }

    fn frequency(&self) -> FrequencySchedule {
        self.inner.frequency()
    }
}

/// `y'' = -omega^2 y` as a first-order system.
pub struct Oscillator {
    pub omega: f64,
}

impl OdeSystem for Oscillator {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, _t: f64, y: &[f64], out: &mut [f64]) {
        out[0] = y[1];
        out[1] = -self.omega * self.omega * y[0];
    }

    fn jacobian(&self, _t: f64, _y: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_row_slice(
            2,
            2,
            &[0.0, 1.0, -self.omega * self.omega, 0.0],
        ))
    }

    fn frequency(&self) -> FrequencySchedule {
        FrequencySchedule::constant(self.omega)
    }
}
