//! Bracketed root finding (Brent's method).

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;

/// An interval `[lo, hi]` over which a function changes sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootBracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

impl RootBracket {
    /// Evaluates `f` at both ends and checks the sign change.
    pub fn new<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64) -> Result<Self> {
        let f_lo = f(lo);
        let f_hi = f(hi);
        Self::from_values(lo, hi, f_lo, f_hi)
    }

    pub fn from_values(lo: f64, hi: f64, f_lo: f64, f_hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!("bracket requires lo < hi, got [{lo}, {hi}]")));
        }
        if f_lo.is_nan() || f_hi.is_nan() || f_lo * f_hi > 0.0 {
            return Err(Error::NoSignChange { lo, hi, f_lo, f_hi });
        }
        Ok(Self { lo, hi, f_lo, f_hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Finds a root of `f` inside `bracket` to within `tol` using Brent's method.
///
/// The bracket is maintained throughout, so the returned point always lies
/// in `[lo, hi]`. An exact zero at an endpoint is returned as-is.
pub fn find_root<F: FnMut(f64) -> f64>(mut f: F, bracket: RootBracket, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let RootBracket { lo, hi, f_lo, f_hi } = bracket;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }

    let (mut a, mut b, mut fa, mut fb) = (lo, hi, f_lo, f_hi);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;

    for _ in 0..MAX_ITERATIONS {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // Inverse quadratic interpolation, or secant when only two points differ.
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if fb.is_nan() {
            return Err(Error::Domain(format!("function returned NaN at {b}")));
        }
    }
    Err(Error::RootNotConverged { iterations: MAX_ITERATIONS, width: (c - b).abs() })
}

/// Grows `[lo, hi]` geometrically away from `anchor` until `f` changes sign.
pub fn expand_bracket<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    max_steps: usize,
) -> Result<RootBracket> {
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    for _ in 0..max_steps {
        if f_lo * f_hi <= 0.0 {
            return RootBracket::from_values(lo, hi, f_lo, f_hi);
        }
        let w = hi - lo;
        if f_lo.abs() < f_hi.abs() {
            lo -= 1.6 * w;
            f_lo = f(lo);
        } else {
            hi += 1.6 * w;
            f_hi = f(hi);
        }
    }
    RootBracket::from_values(lo, hi, f_lo, f_hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn square_root_of_four() {
        let f = |x: f64| x * x - 4.0;
        let b = RootBracket::new(f, 0.0, 3.0).unwrap();
        let r = find_root(f, b, 1e-10).unwrap();
        assert!((r - 2.0).abs() < 1e-10);
    }

    #[test]
    fn root_at_endpoint_is_returned() {
        let f = |x: f64| x - 1.0;
        let b = RootBracket::new(f, 1.0, 2.0).unwrap();
        assert_eq!(find_root(f, b, 1e-12).unwrap(), 1.0);
        let b = RootBracket::new(f, 0.0, 1.0).unwrap();
        assert_eq!(find_root(f, b, 1e-12).unwrap(), 1.0);
    }

    #[test]
    fn no_sign_change_is_an_error() {
        let err = RootBracket::new(|x: f64| x * x + 1.0, -1.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::NoSignChange { .. }));
    }

    #[test]
    fn expands_to_find_bracket() {
        let b = expand_bracket(|x: f64| x - 50.0, 0.0, 1.0, 60).unwrap();
        assert!(b.lo <= 50.0 && b.hi >= 50.0);
    }

    proptest! {
        #[test]
        fn invariant_under_monotone_rescaling(root in -5.0f64..5.0, scale in 1e-6f64..1e6) {
            let f = |x: f64| (x - root).powi(3) + (x - root);
            let g = |x: f64| scale * f(x);
            let h = |x: f64| (f(x)).atan();
            let b = RootBracket::new(f, -10.0, 10.0).unwrap();
            let r1 = find_root(f, b, 1e-10).unwrap();
            let r2 = find_root(g, RootBracket::new(g, -10.0, 10.0).unwrap(), 1e-10).unwrap();
            let r3 = find_root(h, RootBracket::new(h, -10.0, 10.0).unwrap(), 1e-10).unwrap();
            prop_assert!((r1 - root).abs() < 1e-9);
            prop_assert!((r1 - r2).abs() < 1e-9);
            prop_assert!((r1 - r3).abs() < 1e-9);
        }
    }
}
