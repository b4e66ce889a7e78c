//! Spectral and algebraic properties of a Butcher tableau.
//!
//! Applied to `y' = q y`, a Runge-Kutta method maps `y_n` to `P(z) y_n` with
//! `z = h q` and
//!
//! ```text
//! P(z) = det(I - z B) / det(I - z A),   B[i][j] = A[i][j] - b[j]
//!      = det(I - z A + z e b^T) / det(I - z A)
//! ```
//!
//! The phase-lag and dissipation of the method are
//! `phi(v) = v - arg P(iv)` and `alpha(v) = 1 - |P(iv)|`.

mod stability;

pub use stability::{
    sample_stability, stability_region_boundary, write_polylines_csv, Polyline, StabilityGrid,
    StabilityWindow,
};

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::ext::{self, dd, CDd, Dd};
use crate::tableau::ButcherTableau;

/// Denominators below this modulus are treated as singular.
pub const SINGULAR_DET: f64 = 1e-300;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum AnalysisError {
    #[error("I - zA is singular at z = {re} + {im}i")]
    SingularMatrix { re: f64, im: f64 },
}

/// `P(z) = K + iL`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplificationFactor {
    pub value: Complex64,
}

impl AmplificationFactor {
    /// Real part `K`.
    pub fn re(&self) -> f64 {
        self.value.re
    }

    /// Imaginary part `L`.
    pub fn im(&self) -> f64 {
        self.value.im
    }
}

fn det(m: &DMatrix<Complex64>) -> Complex64 {
    match m.nrows() {
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        3 => {
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
        }
        _ => m.clone().lu().determinant(),
    }
}

fn ratio(num: Complex64, den: Complex64, z: Complex64) -> Result<Complex64, AnalysisError> {
    if den.norm() < SINGULAR_DET || !den.is_finite() {
        return Err(AnalysisError::SingularMatrix { re: z.re, im: z.im });
    }
    Ok(num / den)
}

fn i_minus_za(t: &ButcherTableau, z: Complex64) -> DMatrix<Complex64> {
    let s = t.stages();
    DMatrix::from_fn(s, s, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        Complex64::new(id, 0.0) - z * t.a(i, j)
    })
}

/// `P(z) = det(I - zB) / det(I - zA)` with `B = A - e b^T`.
pub fn amplification(
    t: &ButcherTableau,
    z: Complex64,
) -> Result<AmplificationFactor, AnalysisError> {
    let s = t.stages();
    let b = t.b();
    let i_minus_zb = DMatrix::from_fn(s, s, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        Complex64::new(id, 0.0) - z * (t.a(i, j) - b[j])
    });
    let value = ratio(det(&i_minus_zb), det(&i_minus_za(t, z)), z)?;
    Ok(AmplificationFactor { value })
}

/// `R(z) = det(I - zA + z e b^T) / det(I - zA)`.
pub fn stability_function(t: &ButcherTableau, z: Complex64) -> Result<Complex64, AnalysisError> {
    let den_m = i_minus_za(t, z);
    let mut num_m = den_m.clone();
    for i in 0..t.stages() {
        for (j, &bj) in t.b().iter().enumerate() {
            num_m[(i, j)] += z * bj;
        }
    }
    ratio(det(&num_m), det(&den_m), z)
}

/// Coefficients `d_k` of `det(I - zM) = sum_k d_k z^k` (Faddeev-LeVerrier).
fn det_poly(m: &[Dd], s: usize) -> Vec<Dd> {
    let mut coeffs = vec![dd(1.0)];
    // A_k = M B_{k-1}, e_k = tr(A_k) / k, B_k = e_k I - A_k, with B_0 = I;
    // e_k are the elementary symmetric functions of the eigenvalues.
    let mut bk: Vec<Dd> = (0..s * s)
        .map(|k| if k / s == k % s { dd(1.0) } else { dd(0.0) })
        .collect();
    for k in 1..=s {
        let mut ak = vec![dd(0.0); s * s];
        for i in 0..s {
            for j in 0..s {
                let mut sum = dd(0.0);
                for l in 0..s {
                    sum += m[i * s + l] * bk[l * s + j];
                }
                ak[i * s + j] = sum;
            }
        }
        let ek = (0..s).fold(dd(0.0), |acc, i| acc + ak[i * s + i]) / k as f64;
        coeffs.push(if k % 2 == 0 { ek } else { -ek });
        bk = ak.into_iter().map(|x| -x).collect();
        for i in 0..s {
            bk[i * s + i] += ek;
        }
    }
    coeffs
}

/// Polynomial with real coefficients evaluated at `iv`.
fn eval_at_iv(coeffs: &[Dd], v: f64) -> CDd {
    let mut re = dd(0.0);
    let mut im = dd(0.0);
    let mut vk = dd(1.0);
    for (k, &c) in coeffs.iter().enumerate() {
        let term = c * vk;
        match k % 4 {
            0 => re += term,
            1 => im += term,
            2 => re -= term,
            _ => im -= term,
        }
        vk *= v;
    }
    CDd::new(re, im)
}

/// `(det(I - ivB), det(I - ivA))` in double-double.
fn num_den_at_iv(t: &ButcherTableau, v: f64) -> Result<(CDd, CDd), AnalysisError> {
    let s = t.stages();
    let a: Vec<Dd> = (0..s * s).map(|k| dd(t.a(k / s, k % s))).collect();
    let bm: Vec<Dd> = (0..s * s)
        .map(|k| dd(t.a(k / s, k % s)) - t.b()[k % s])
        .collect();
    let num = eval_at_iv(&det_poly(&bm, s), v);
    let den = eval_at_iv(&det_poly(&a, s), v);
    if ext::to_f64(den.norm_sqr()).sqrt() < SINGULAR_DET {
        return Err(AnalysisError::SingularMatrix { re: 0.0, im: v });
    }
    Ok((num, den))
}

/// Phase-lag `phi(v) = v - arg P(iv)`, reduced to `(-pi, pi]`.
///
/// Only the per-step rotation error modulo `2 pi` is observable, so the
/// result is the principal argument of `e^{iv} / P(iv)`. It is evaluated in
/// double-double arithmetic: for small `v` the value is `O(v^5)` and would
/// otherwise be lost to cancellation.
pub fn phase_lag(t: &ButcherTableau, v: f64) -> Result<f64, AnalysisError> {
    let (num, den) = num_den_at_iv(t, v)?;
    let (s, c) = ext::sin_cos(dd(v));
    let w = num.mul(den.conj()).mul(CDd::new(c, -s));
    Ok(-ext::to_f64(ext::atan2(w.im, w.re)))
}

/// Dissipation `alpha(v) = 1 - |P(iv)|`.
pub fn dissipation(t: &ButcherTableau, v: f64) -> Result<f64, AnalysisError> {
    let (num, den) = num_den_at_iv(t, v)?;
    let n2 = num.norm_sqr();
    let d2 = den.norm_sqr();
    // 1 - |N|/|D| = (|D|^2 - |N|^2) / (|D| (|D| + |N|))
    let dn = d2.sqrt();
    let nn = n2.sqrt();
    Ok(ext::to_f64(ext::div(d2 - n2, dn * (dn + nn))))
}

/// Left-minus-right residuals of the eight order conditions through order 4.
///
/// Order: `sum b - 1`, `sum b c - 1/2`, `sum b c^2 - 1/3`, `sum b A c - 1/6`,
/// `sum b c^3 - 1/4`, `sum b c A c - 1/8`, `sum b A c^2 - 1/12`,
/// `sum b A A c - 1/24`.
pub fn order_residuals(t: &ButcherTableau) -> [f64; 8] {
    let s = t.stages();
    let b: Vec<Dd> = t.b().iter().map(|&x| dd(x)).collect();
    let c: Vec<Dd> = t.c().iter().map(|&x| dd(x)).collect();
    let a = |i: usize, j: usize| dd(t.a(i, j));
    let ac: Vec<Dd> = (0..s)
        .map(|i| (0..s).fold(dd(0.0), |acc, j| acc + a(i, j) * c[j]))
        .collect();
    let ac2: Vec<Dd> = (0..s)
        .map(|i| (0..s).fold(dd(0.0), |acc, j| acc + a(i, j) * c[j] * c[j]))
        .collect();
    let aac: Vec<Dd> = (0..s)
        .map(|i| (0..s).fold(dd(0.0), |acc, j| acc + a(i, j) * ac[j]))
        .collect();
    let sum = |f: &dyn Fn(usize) -> Dd| (0..s).fold(dd(0.0), |acc, i| acc + b[i] * f(i));
    let terms = [
        (sum(&|_| dd(1.0)), 1.0),
        (sum(&|i| c[i]), 2.0),
        (sum(&|i| c[i] * c[i]), 3.0),
        (sum(&|i| ac[i]), 6.0),
        (sum(&|i| c[i] * c[i] * c[i]), 4.0),
        (sum(&|i| c[i] * ac[i]), 8.0),
        (sum(&|i| ac2[i]), 12.0),
        (sum(&|i| aac[i]), 24.0),
    ];
    terms.map(|(lhs, inv)| ext::to_f64(lhs - dd(1.0) / inv))
}

/// Residuals `b_i a_ij + b_j a_ji - b_i b_j` of the symplecticity conditions.
///
/// Diagonal pairs `(i, i)` come first, then `(i, j)` with `i < j` in
/// lexicographic order; for two stages this is `(1,1), (2,2), (1,2)`.
pub fn symplecticity_residuals(t: &ButcherTableau) -> Vec<f64> {
    let s = t.stages();
    let b = t.b();
    let pairs = (0..s)
        .map(|i| (i, i))
        .chain((0..s).flat_map(|i| (i + 1..s).map(move |j| (i, j))));
    pairs
        .map(|(i, j)| {
            let r = dd(b[i]) * t.a(i, j) + dd(b[j]) * t.a(j, i) - dd(b[i]) * b[j];
            ext::to_f64(r)
        })
        .collect()
}

/// Order and symplecticity residuals together.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSet {
    pub order: [f64; 8],
    pub symplectic: Vec<f64>,
}

pub fn residuals(t: &ButcherTableau) -> ResidualSet {
    ResidualSet {
        order: order_residuals(t),
        symplectic: symplecticity_residuals(t),
    }
}
