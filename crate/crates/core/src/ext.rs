//! Double-double helpers used where double precision cancels away the answer.
//!
//! Arithmetic comes from [`twofloat`]. Its transcendental functions stop at
//! roughly 1e-22 relative accuracy, which is not enough for the fitted
//! coefficients near `v = 0`, so sine, cosine and `atan2` are provided here
//! with full double-double accuracy.

use twofloat::consts::{FRAC_PI_2, PI};
use twofloat::TwoFloat;

pub(crate) type Dd = TwoFloat;

#[inline]
pub(crate) fn dd(x: f64) -> Dd {
    TwoFloat::from(x)
}

#[inline]
pub(crate) fn to_f64(x: Dd) -> f64 {
    x.hi() + x.lo()
}

/// Double-double quotient. `TwoFloat`'s own `Dd / Dd` is only accurate to
/// about one double ulp.
pub(crate) fn div(a: Dd, b: Dd) -> Dd {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    dd(q1) + q2 + q3
}

pub(crate) fn sqrt3() -> Dd {
    dd(3.0).sqrt()
}

/// Taylor kernels valid for |r| <= pi/4.
fn sin_kernel(r: Dd) -> Dd {
    let r2 = r * r;
    let mut term = r;
    let mut sum = r;
    let mut k = 1.0;
    loop {
        term = -term * r2 / ((k + 1.0) * (k + 2.0));
        k += 2.0;
        sum += term;
        if term.hi().abs() <= 1e-34 * sum.hi().abs().max(1e-300) || k > 60.0 {
            break;
        }
    }
    sum
}

fn cos_kernel(r: Dd) -> Dd {
    let r2 = r * r;
    let mut term = dd(1.0);
    let mut sum = dd(1.0);
    let mut k = 0.0;
    loop {
        term = -term * r2 / ((k + 1.0) * (k + 2.0));
        k += 2.0;
        sum += term;
        if term.hi().abs() <= 1e-34 || k > 60.0 {
            break;
        }
    }
    sum
}

/// Sine and cosine of a double-double argument.
///
/// Reduction by multiples of pi/2 uses the double-double constant, so the
/// result degrades slowly (about 1e-32 per quadrant) for large arguments.
pub(crate) fn sin_cos(x: Dd) -> (Dd, Dd) {
    let q = (x.hi() / FRAC_PI_2.hi()).round();
    let r = x - FRAC_PI_2 * q;
    let (s, c) = (sin_kernel(r), cos_kernel(r));
    match (q as i64).rem_euclid(4) {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}

/// Two-argument arctangent in (-pi, pi].
///
/// Starts from the double result and applies one Newton correction on
/// `y cos t - x sin t = 0`, which is exact to double-double order because
/// the correction is below 1e-15.
pub(crate) fn atan2(y: Dd, x: Dd) -> Dd {
    if y.hi() == 0.0 && x.hi() == 0.0 {
        return dd(0.0);
    }
    let t0 = dd(y.hi().atan2(x.hi()));
    let (s, c) = sin_cos(t0);
    let num = y * c - x * s;
    let den = x * c + y * s;
    let corr = div(num, den);
    let mut t = t0 + corr - corr * corr * corr / 3.0;
    if t > PI {
        t -= PI * 2.0;
    } else if t <= -PI {
        t += PI * 2.0;
    }
    t
}

/// Minimal complex number over double-double parts.
#[derive(Clone, Copy, Debug)]
pub(crate) struct CDd {
    pub re: Dd,
    pub im: Dd,
}

impl CDd {
    pub fn new(re: Dd, im: Dd) -> Self {
        Self { re, im }
    }

    pub fn mul(self, o: Self) -> Self {
        Self::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }

    pub fn conj(self) -> Self {
        Self::new(self.re, -self.im)
    }

    pub fn norm_sqr(self) -> Dd {
        self.re * self.re + self.im * self.im
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values computed with 40-digit arithmetic, split into two doubles.
    #[test]
    fn sin_cos_match_high_precision_references() {
        let (s, c) = sin_cos(dd(0.01));
        let s_ref = dd(0.009999833334166664) + dd(4.265611722485374e-19);
        assert!(to_f64(s - s_ref).abs() < 1e-30, "{:?}", s - s_ref);
        // cos(0.01)^2 + sin(0.01)^2 == 1
        let one = s * s + c * c - 1.0;
        assert!(to_f64(one).abs() < 1e-31);
        for &x in &[0.3, 1.0, 2.0, 5.0, 20.0, 50.0, -7.5] {
            let (s, c) = sin_cos(dd(x));
            assert!(to_f64(s * s + c * c - 1.0).abs() < 1e-30, "x = {x}");
            assert!((to_f64(s) - x.sin()).abs() < 1e-15);
            assert!((to_f64(c) - x.cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn division_is_double_double_accurate() {
        let a = dd(0.7) + 1e-20;
        let b = dd(0.3) - 3e-19;
        let q = div(a, b);
        assert!(to_f64(q * b - a).abs() < 1e-31);
        assert!(to_f64(div(dd(1.0), dd(3.0)) * 3.0 - 1.0).abs() < 1e-31);
    }

    #[test]
    fn atan2_inverts_sin_cos() {
        for &t in &[1e-9, 0.01, 0.7, 1.5, 2.9, -0.4, -3.0] {
            let (s, c) = sin_cos(dd(t));
            let back = atan2(s * 3.0, c * 3.0);
            assert!(to_f64(back - t).abs() < 1e-30 * t.abs().max(1.0), "t = {t}");
        }
        assert!(to_f64(atan2(dd(0.0), dd(-1.0)) - PI).abs() < 1e-30);
    }
}
