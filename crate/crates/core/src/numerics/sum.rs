//! Compensated summation and double-double arithmetic.
//!
//! The clump-length density and the largest-gap probability are alternating
//! series whose partial sums can be many orders of magnitude larger than the
//! result. [`SignedLogSum`] accumulates terms given in log-magnitude/sign form
//! with Neumaier compensation and tracks the absolute mass so callers can
//! estimate how much precision the cancellation cost. When that is too much,
//! the series is re-evaluated with [`DoubleDouble`] terms.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Compensated sum of a slice.
pub fn compensated_sum(xs: &[f64]) -> f64 {
    xs.iter().copied().collect::<NeumaierSum>().value()
}

/// Accumulator for terms `sign * exp(log_mag)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SignedLogSum {
    sum: NeumaierSum,
    abs_mass: f64,
    terms: usize,
}

impl SignedLogSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_signed(&mut self, negative: bool, log_mag: f64) {
        if log_mag == f64::NEG_INFINITY {
            return;
        }
        let mag = log_mag.exp();
        self.sum.add(if negative { -mag } else { mag });
        self.abs_mass += mag;
        self.terms += 1;
    }

    pub fn add(&mut self, x: f64) {
        self.sum.add(x);
        self.abs_mass += x.abs();
        self.terms += 1;
    }

    pub fn value(&self) -> f64 {
        self.sum.value()
    }

    /// Sum of the absolute values of all accumulated terms.
    pub fn abs_mass(&self) -> f64 {
        self.abs_mass
    }

    /// Estimated relative error of [`value`](Self::value), assuming each term
    /// carries a few ulps of rounding error from its own evaluation.
    pub fn relative_error_estimate(&self) -> f64 {
        let v = self.value().abs();
        let per_term = 8.0 * f64::EPSILON * (self.terms.max(1) as f64).sqrt();
        if v == 0.0 {
            if self.abs_mass == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            per_term * self.abs_mass / v
        }
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`, about 106 bits of precision.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

const LN2_DD: DoubleDouble = DoubleDouble { hi: std::f64::consts::LN_2, lo: 2.319_046_813_846_299_6e-17 };

impl DoubleDouble {
    pub const ZERO: DoubleDouble = DoubleDouble { hi: 0.0, lo: 0.0 };
    pub const ONE: DoubleDouble = DoubleDouble { hi: 1.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    /// Exact product of two doubles.
    pub fn from_prod(a: f64, b: f64) -> Self {
        let (hi, lo) = two_prod(a, b);
        Self { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn is_sign_negative(self) -> bool {
        self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0)
    }

    fn ldexp(self, e: i32) -> Self {
        let s = 2f64.powi(e);
        Self { hi: self.hi * s, lo: self.lo * s }
    }

    pub fn powi(self, mut n: u32) -> Self {
        let mut base = self;
        let mut acc = DoubleDouble::ONE;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            n >>= 1;
        }
        acc
    }

    /// Exponential to roughly double-double accuracy.
    pub fn exp(self) -> Self {
        if self.hi > 709.0 {
            return Self::new(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Self::ZERO;
        }
        let k = (self.hi / std::f64::consts::LN_2).round();
        let r = self - LN2_DD * DoubleDouble::new(k);
        // r in [-ln2/2, ln2/2]; shrink further so the Taylor series converges fast.
        const SQUARINGS: i32 = 10;
        let r = r.ldexp(-SQUARINGS);
        let mut term = DoubleDouble::ONE;
        let mut sum = DoubleDouble::ONE;
        for i in 1..=20 {
            term = term * r / DoubleDouble::new(i as f64);
            sum = sum + term;
            if term.hi.abs() < 1e-34 {
                break;
            }
        }
        for _ in 0..SQUARINGS {
            sum = sum * sum;
        }
        sum.ldexp(k as i32)
    }
}

impl From<f64> for DoubleDouble {
    fn from(x: f64) -> Self {
        Self::new(x)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        Self { hi: -self.hi, lo: -self.lo }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Self { hi, lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q1 = self.hi / o.hi;
        let r = self - o * DoubleDouble::new(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * DoubleDouble::new(q2);
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Self { hi, lo } + DoubleDouble::new(q3)
    }
}
