//! Frequency-fitted variants of the two-stage Gauss method.
//!
//! Both variants keep every Gauss coefficient except the ones listed, and
//! choose those as functions of `v = omega h`:
//!
//! * `G2-PL` varies `b2` so that the phase-lag vanishes at `v`;
//! * `G2-PL-D` varies `b2` and `a22` so that phase-lag and dissipation both
//!   vanish at `v`.
//!
//! With `z = iv`, `G(v) = e^{iv} det(I - zA)` and `N(v) = det(I - zB)`, zero
//! phase-lag means `N / G` is real and positive; zero dissipation adds
//! `|N| = |G|`. Since `b2` only enters the second column of `B` and `a22` is
//! a single entry, both determinants are affine in `(b2, a22)`:
//!
//! ```text
//! det(I - zA) = 1 - z (1/4 + a22) + z^2 (a22/4 + 1/48)
//! det(I - zB) = 1 - z (a22 - b2 - 1/4) + z^2 (-a22/4 + b2 sqrt3/6 + 7/48 - sqrt3/12)
//! ```
//!
//! so `G2-PL` solves one real linear equation `Im(N conj G) = 0` and
//! `G2-PL-D` solves the complex linear equation `N = G`, a 2x2 real system.
//! The latter fixes the root that continues to the classical method, so no
//! square-root branch has to be chosen.
//!
//! Closed forms are evaluated in double-double arithmetic and rounded once.
//! For `|v| < 1e-2` the truncated Taylor series is used instead.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::ext::{self, dd, sqrt3, Dd};
use crate::tableau::{gauss2, ButcherTableau};

/// Below this `|v|` the Taylor series replaces the closed forms.
pub const SERIES_THRESHOLD: f64 = 1e-2;

/// A closed-form denominator smaller than this fraction of the magnitude of
/// its terms is reported as a singular parameter.
pub const GUARD_RATIO: f64 = 1e-8;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum FitError {
    #[error("fitting parameter v = {v} is not finite")]
    InvalidParameter { v: f64 },
    #[error("fitting parameter v = {v} is at a pole of the closed form")]
    SingularParameter { v: f64 },
    /// The only coefficient that zeroes `tan(phase)` leaves the method
    /// rotating by `phase` (= pi) per step instead of zero.
    #[error("no zero phase-lag root at v = {v}: the linear root has phase {phase}")]
    BranchFailure { v: f64, phase: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodKind {
    /// Classical two-stage Gauss (`G2`).
    Classical,
    /// Zero phase-lag (`G2-PL`).
    PhaseFitted,
    /// Zero phase-lag and zero dissipation (`G2-PL-D`).
    PhaseDissipationFitted,
}

impl MethodKind {
    pub const ALL: [MethodKind; 3] = [
        MethodKind::Classical,
        MethodKind::PhaseFitted,
        MethodKind::PhaseDissipationFitted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Classical => "G2",
            MethodKind::PhaseFitted => "G2-PL",
            MethodKind::PhaseDissipationFitted => "G2-PL-D",
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MethodKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown fitted method `{s}` (expected G2, G2-PL or G2-PL-D)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedMethodSpec {
    pub kind: MethodKind,
    /// `omega * h`.
    pub v: f64,
}

impl FittedMethodSpec {
    pub fn new(kind: MethodKind, v: f64) -> Self {
        Self { kind, v }
    }
}

/// Which evaluation path produced a coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    ClosedForm,
    Series,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientValue {
    pub value: f64,
    /// `value` minus the classical Gauss coefficient, computed before
    /// rounding so that it keeps full relative precision for small `v`.
    pub excess: f64,
    pub branch: Branch,
}

impl CoefficientValue {
    fn from_excess(classical: f64, excess: Dd, branch: Branch) -> Self {
        Self {
            value: ext::to_f64(excess + classical),
            excess: ext::to_f64(excess),
            branch,
        }
    }
}

fn check_finite(v: f64) -> Result<(), FitError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(FitError::InvalidParameter { v })
    }
}

fn b2_series_excess(v: f64, kind: MethodKind) -> Dd {
    let r3 = sqrt3();
    let v2 = dd(v) * v;
    let v4 = v2 * v2;
    let v6 = v4 * v2;
    match kind {
        MethodKind::Classical => dd(0.0),
        MethodKind::PhaseFitted => v4 / 720.0 + (dd(1.0) / 6720.0 - r3 / 8640.0) * v6,
        MethodKind::PhaseDissipationFitted => {
            v4 / 720.0 + ext::div(r3 * 5.0 - 8.0, (r3 - 3.0) * 10080.0) * v6
        }
    }
}

fn a22_series_excess(v: f64) -> Dd {
    let r3 = sqrt3();
    let v2 = dd(v) * v;
    let v4 = v2 * v2;
    let v6 = v4 * v2;
    let m = r3 - 2.0;
    ext::div(r3 * 5.0 - 9.0, m * 2160.0) * v4 - ext::div(r3 * 220.0 - 381.0, m * m * 181440.0) * v6
}

/// Truncated Taylor series of `b2` through `v^6`.
pub fn series_b2(v: f64, kind: MethodKind) -> f64 {
    ext::to_f64(b2_series_excess(v, kind) + 0.5)
}

/// Truncated Taylor series of the `G2-PL-D` coefficient `a22` through `v^6`.
pub fn series_a22(v: f64) -> f64 {
    ext::to_f64(a22_series_excess(v) + 0.25)
}

/// `series_b2(v, kind) - 1/2` without rounding through `1/2`.
pub fn series_b2_excess(v: f64, kind: MethodKind) -> f64 {
    ext::to_f64(b2_series_excess(v, kind))
}

/// `series_a22(v) - 1/4` without rounding through `1/4`.
pub fn series_a22_excess(v: f64) -> f64 {
    ext::to_f64(a22_series_excess(v))
}

fn guarded(v: f64, den: Dd, scale: Dd) -> Result<(), FitError> {
    if ext::to_f64(den.abs()) <= GUARD_RATIO * ext::to_f64(scale) {
        Err(FitError::SingularParameter { v })
    } else {
        Ok(())
    }
}

/// Closed-form `b2 - 1/2` of the zero phase-lag method.
fn b2_phase_closed(v: f64) -> Result<Dd, FitError> {
    let r3 = sqrt3();
    let vd = dd(v);
    let v2 = vd * vd;
    let (s, c) = ext::sin_cos(vd);
    // G = e^{iv} det(I - ivA) with a22 = 1/4: det = (1 - v^2/12) - iv/2.
    let p = dd(1.0) - v2 / 12.0;
    let gr = c * p + s * vd / 2.0;
    let gi = s * p - c * vd / 2.0;
    // N = Nr + i v b2 with Nr = q - v^2 b2 sqrt3/6, q = 1 - v^2 (1 - sqrt3)/12.
    let q = dd(1.0) - v2 * (dd(1.0) - r3) / 12.0;
    let term1 = vd * gr;
    let term2 = r3 / 6.0 * v2 * gi;
    let den = term1 + term2;
    guarded(v, den, term1.abs() + term2.abs())?;
    let b2 = ext::div(q * gi, den);
    let nr = q - v2 * b2 * r3 / 6.0;
    let ni = vd * b2;
    // Im(N conj G) = 0 by construction; Re(N conj G) < 0 means P(iv) = -|P| e^{iv}.
    let re = nr * gr + ni * gi;
    if re.hi() <= 0.0 {
        let im = ni * gr - nr * gi;
        return Err(FitError::BranchFailure {
            v,
            phase: ext::to_f64(ext::atan2(im, re)).abs(),
        });
    }
    Ok(b2 - 0.5)
}

/// Closed-form `(b2 - 1/2, a22 - 1/4)` of the zero phase-lag, zero
/// dissipation method, from the real and imaginary parts of `N = G`.
fn b2_a22_closed(v: f64) -> Result<(Dd, Dd), FitError> {
    let r3 = sqrt3();
    let vd = dd(v);
    let v2 = vd * vd;
    let (s, c) = ext::sin_cos(vd);
    // Real part:      m11 a22 - k b2 = r1
    // Imaginary part / v: m21 a22 + b2 = r2
    let k = v2 * r3 / 6.0;
    let m11 = v2 * (c + 1.0) / 4.0 - s * vd;
    let m21 = c - 1.0 + s * vd / 4.0;
    let r1 = c * (dd(1.0) - v2 / 48.0) + s * vd / 4.0 - 1.0 + v2 * (dd(7.0) / 48.0 - r3 / 12.0);
    let r2 = ext::div(s * (dd(1.0) - v2 / 48.0), vd) - (c + 1.0) / 4.0;
    let den = m11 + k * m21;
    // Both entries of the a22 column vanish where tan(v/2) = v/4, so the
    // guard compares against bounds on the terms rather than their values.
    let av = vd.abs();
    guarded(v, den, v2 / 2.0 + av + k * (av / 4.0 + 2.0))?;
    let a22 = ext::div(r1 + k * r2, den);
    let b2 = r2 - a22 * m21;
    Ok((b2 - 0.5, a22 - 0.25))
}

/// `b2` of the zero phase-lag method (`b1`, `A` and `c` stay Gauss).
pub fn b2_phase_fitted(v: f64) -> Result<CoefficientValue, FitError> {
    check_finite(v)?;
    if v.abs() < SERIES_THRESHOLD {
        return Ok(CoefficientValue::from_excess(
            0.5,
            b2_series_excess(v, MethodKind::PhaseFitted),
            Branch::Series,
        ));
    }
    Ok(CoefficientValue::from_excess(
        0.5,
        b2_phase_closed(v)?,
        Branch::ClosedForm,
    ))
}

/// `(b2, a22)` of the zero phase-lag, zero dissipation method.
pub fn b2_a22_fitted(v: f64) -> Result<(CoefficientValue, CoefficientValue), FitError> {
    check_finite(v)?;
    if v.abs() < SERIES_THRESHOLD {
        return Ok((
            CoefficientValue::from_excess(
                0.5,
                b2_series_excess(v, MethodKind::PhaseDissipationFitted),
                Branch::Series,
            ),
            CoefficientValue::from_excess(0.25, a22_series_excess(v), Branch::Series),
        ));
    }
    let (b2, a22) = b2_a22_closed(v)?;
    Ok((
        CoefficientValue::from_excess(0.5, b2, Branch::ClosedForm),
        CoefficientValue::from_excess(0.25, a22, Branch::ClosedForm),
    ))
}

/// Materializes the tableau of a fitted method at its fitting parameter.
pub fn fit_tableau(spec: FittedMethodSpec) -> Result<ButcherTableau, FitError> {
    check_finite(spec.v)?;
    let g = gauss2();
    Ok(match spec.kind {
        MethodKind::Classical => g,
        MethodKind::PhaseFitted => g.with_weight(1, b2_phase_fitted(spec.v)?.value),
        MethodKind::PhaseDissipationFitted => {
            let (b2, a22) = b2_a22_fitted(spec.v)?;
            g.with_weight(1, b2.value)
                .with_stage_coefficient(1, 1, a22.value)
        }
    })
}
