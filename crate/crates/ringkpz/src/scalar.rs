//! Scalar abstraction shared by the f64 and double-double evaluation paths.
//!
//! Every cancellation-sensitive pipeline (Fredholm determinants on both the
//! finite-size and limit side) is written once against [`Real`] and a small
//! complex type [`CF`] generic over it. The f64 instantiation is the fast
//! default; the [`crate::dd::Dd`] instantiation is the escalation path used
//! when a quadrature's cancellation floor exceeds the requested tolerance.

use crate::dd::Dd;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Real:
    Copy
    + Clone
    + Debug
    + PartialEq
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(x: f64) -> Self;
    /// Build from a two-limb representation (hi + lo); f64 keeps only hi,
    /// double-double keeps both. Lets generic code embed 32-digit constants.
    fn from_limbs(hi: f64, lo: f64) -> Self;
    fn to_f64(self) -> f64;
    fn abs(self) -> Self;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn expm1(self) -> Self;
    fn sin_cos(self) -> (Self, Self);
    fn atan2(y: Self, x: Self) -> Self;
    /// Unit roundoff of this precision, used in cancellation-floor estimates.
    fn eps() -> f64;
    /// Label recorded in output metadata when this precision produced a row.
    fn label() -> &'static str;
}

impl Real for f64 {
    #[inline]
    fn zero() -> f64 {
        0.0
    }
    #[inline]
    fn one() -> f64 {
        1.0
    }
    #[inline]
    fn from_f64(x: f64) -> f64 {
        x
    }
    #[inline]
    fn from_limbs(hi: f64, _lo: f64) -> f64 {
        hi
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    #[inline]
    fn sqrt(self) -> f64 {
        f64::sqrt(self)
    }
    #[inline]
    fn exp(self) -> f64 {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> f64 {
        f64::ln(self)
    }
    #[inline]
    fn expm1(self) -> f64 {
        f64::exp_m1(self)
    }
    #[inline]
    fn sin_cos(self) -> (f64, f64) {
        f64::sin_cos(self)
    }
    #[inline]
    fn atan2(y: f64, x: f64) -> f64 {
        f64::atan2(y, x)
    }
    #[inline]
    fn eps() -> f64 {
        f64::EPSILON
    }
    fn label() -> &'static str {
        "f64"
    }
}

impl Real for Dd {
    #[inline]
    fn zero() -> Dd {
        Dd::ZERO
    }
    #[inline]
    fn one() -> Dd {
        Dd::ONE
    }
    #[inline]
    fn from_f64(x: f64) -> Dd {
        Dd::from_f64(x)
    }
    #[inline]
    fn from_limbs(hi: f64, lo: f64) -> Dd {
        Dd::new(hi, lo)
    }
    #[inline]
    fn to_f64(self) -> f64 {
        Dd::to_f64(self)
    }
    #[inline]
    fn abs(self) -> Dd {
        Dd::abs(self)
    }
    #[inline]
    fn sqrt(self) -> Dd {
        Dd::sqrt(self)
    }
    #[inline]
    fn exp(self) -> Dd {
        Dd::exp(self)
    }
    #[inline]
    fn ln(self) -> Dd {
        Dd::ln(self)
    }
    #[inline]
    fn expm1(self) -> Dd {
        Dd::expm1(self)
    }
    #[inline]
    fn sin_cos(self) -> (Dd, Dd) {
        Dd::sin_cos(self)
    }
    #[inline]
    fn atan2(y: Dd, x: Dd) -> Dd {
        Dd::atan2(y, x)
    }
    #[inline]
    fn eps() -> f64 {
        // 2^-104: effective unit roundoff of double-double.
        4.930380657631324e-32
    }
    fn label() -> &'static str {
        "dd"
    }
}

/// Complex number over a [`Real`] scalar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CF<R> {
    pub re: R,
    pub im: R,
}

impl<R: Real> CF<R> {
    #[inline]
    pub fn new(re: R, im: R) -> Self {
        CF { re, im }
    }

    #[inline]
    pub fn zero() -> Self {
        CF { re: R::zero(), im: R::zero() }
    }

    #[inline]
    pub fn one() -> Self {
        CF { re: R::one(), im: R::zero() }
    }

    #[inline]
    pub fn from_f64s(re: f64, im: f64) -> Self {
        CF { re: R::from_f64(re), im: R::from_f64(im) }
    }

    #[inline]
    pub fn real(re: R) -> Self {
        CF { re, im: R::zero() }
    }

    #[inline]
    pub fn conj(self) -> Self {
        CF { re: self.re, im: -self.im }
    }

    #[inline]
    pub fn norm_sqr(self) -> R {
        self.re * self.re + self.im * self.im
    }

    #[inline]
    pub fn abs(self) -> R {
        self.norm_sqr().sqrt()
    }

    #[inline]
    pub fn arg(self) -> R {
        R::atan2(self.im, self.re)
    }

    #[inline]
    pub fn scale(self, s: R) -> Self {
        CF { re: self.re * s, im: self.im * s }
    }

    #[inline]
    pub fn inv(self) -> Self {
        let d = self.norm_sqr();
        CF { re: self.re / d, im: -self.im / d }
    }

    pub fn exp(self) -> Self {
        let m = self.re.exp();
        let (s, c) = self.im.sin_cos();
        CF { re: m * c, im: m * s }
    }

    /// `exp(self) - 1` without cancellation for small arguments.
    ///
    /// Real part: `e^x cos y - 1 = expm1(x) - e^x * 2 sin^2(y/2)`, which
    /// avoids the subtraction of two near-unit quantities.
    pub fn expm1(self) -> Self {
        let m = self.re.exp();
        let half = R::from_f64(0.5);
        let two = R::from_f64(2.0);
        let (s, c) = self.im.sin_cos();
        let sh = (self.im * half).sin_cos().0;
        CF { re: self.re.expm1() - m * two * sh * sh, im: m * s }
        .settle(CF { re: m * c - R::one(), im: m * s })
    }

    // `expm1` helper: the cancellation-free form is preferred, but for large
    // arguments both forms coincide; keep the direct one when the stable form
    // produced a non-finite intermediate (e.g. `exp(re)` overflowed).
    fn settle(self, fallback: Self) -> Self {
        if self.re.to_f64().is_finite() && self.im.to_f64().is_finite() {
            self
        } else {
            fallback
        }
    }

    /// Principal branch logarithm.
    pub fn ln(self) -> Self {
        let half = R::from_f64(0.5);
        CF { re: self.norm_sqr().ln() * half, im: self.arg() }
    }

    /// Principal branch square root via polar form.
    pub fn sqrt(self) -> Self {
        let m = self.abs().sqrt();
        let half = R::from_f64(0.5);
        let (s, c) = (self.arg() * half).sin_cos();
        CF { re: m * c, im: m * s }
    }

    /// Integer power by binary exponentiation (exact branch handling since
    /// the exponent is integral).
    pub fn powi(self, n: i64) -> Self {
        if n == 0 {
            return Self::one();
        }
        let mut base = if n < 0 { self.inv() } else { self };
        let mut k = n.unsigned_abs();
        let mut acc = Self::one();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            k >>= 1;
        }
        acc
    }

    #[inline]
    pub fn to_c64(self) -> num_complex::Complex64 {
        num_complex::Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    #[inline]
    pub fn from_c64(z: num_complex::Complex64) -> Self {
        Self::from_f64s(z.re, z.im)
    }
}

impl<R: Real> Add for CF<R> {
    type Output = CF<R>;
    #[inline]
    fn add(self, o: CF<R>) -> CF<R> {
        CF { re: self.re + o.re, im: self.im + o.im }
    }
}

impl<R: Real> Sub for CF<R> {
    type Output = CF<R>;
    #[inline]
    fn sub(self, o: CF<R>) -> CF<R> {
        CF { re: self.re - o.re, im: self.im - o.im }
    }
}

impl<R: Real> Neg for CF<R> {
    type Output = CF<R>;
    #[inline]
    fn neg(self) -> CF<R> {
        CF { re: -self.re, im: -self.im }
    }
}

impl<R: Real> Mul for CF<R> {
    type Output = CF<R>;
    #[inline]
    fn mul(self, o: CF<R>) -> CF<R> {
        CF {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }
}

impl<R: Real> Div for CF<R> {
    type Output = CF<R>;
    #[inline]
    fn div(self, o: CF<R>) -> CF<R> {
        // Naive quotient: all pipeline magnitudes stay far from the
        // norm_sqr overflow threshold (~1e154).
        let d = o.norm_sqr();
        CF {
            re: (self.re * o.re + self.im * o.im) / d,
            im: (self.im * o.re - self.re * o.im) / d,
        }
    }
}

/// Neumaier-compensated sum of complex values; removes the O(M) rounding
/// growth from long trapezoid sums in the f64 path (harmless in dd).
pub struct CompensatedSum<R> {
    sum: CF<R>,
    comp: CF<R>,
}

impl<R: Real> CompensatedSum<R> {
    pub fn new() -> Self {
        CompensatedSum { sum: CF::zero(), comp: CF::zero() }
    }

    pub fn add(&mut self, v: CF<R>) {
        let t_re = self.sum.re + v.re;
        self.comp.re = self.comp.re
            + if self.sum.re.abs() >= v.re.abs() {
                (self.sum.re - t_re) + v.re
            } else {
                (v.re - t_re) + self.sum.re
            };
        self.sum.re = t_re;
        let t_im = self.sum.im + v.im;
        self.comp.im = self.comp.im
            + if self.sum.im.abs() >= v.im.abs() {
                (self.sum.im - t_im) + v.im
            } else {
                (v.im - t_im) + self.sum.im
            };
        self.sum.im = t_im;
    }

    pub fn value(&self) -> CF<R> {
        self.sum + self.comp
    }
}

impl<R: Real> Default for CompensatedSum<R> {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_algebra_f64() {
        let a = CF::<f64>::new(1.5, -2.0);
        let b = CF::<f64>::new(-0.3, 0.7);
        let p = a * b;
        let q = p / b;
        assert!((q.re - a.re).abs() < 1e-14 && (q.im - a.im).abs() < 1e-14);
        let l = a.ln().exp();
        assert!((l.re - a.re).abs() < 1e-14 && (l.im - a.im).abs() < 1e-14);
        let s = a.sqrt();
        let ss = s * s;
        assert!((ss.re - a.re).abs() < 1e-14 && (ss.im - a.im).abs() < 1e-14);
    }

    #[test]
    fn powi_matches_repeated_multiplication() {
        let a = CF::<f64>::new(0.9, 0.4);
        let mut acc = CF::<f64>::one();
        for _ in 0..13 {
            acc = acc * a;
        }
        let p = a.powi(13);
        assert!((p.re - acc.re).abs() < 1e-13 && (p.im - acc.im).abs() < 1e-13);
        let pn = a.powi(-13);
        let prod = p * pn;
        assert!((prod.re - 1.0).abs() < 1e-12 && prod.im.abs() < 1e-12);
    }

    #[test]
    fn expm1_small_argument_keeps_relative_accuracy() {
        // Reference: exp(z) - 1 for z = 1e-9 * (1 + i) is
        // 1e-9 + 1e-18*... ; the naive form loses ~9 digits.
        let z = CF::<f64>::new(1e-9, 1e-9);
        let got = z.expm1();
        // Second-order expansion z + z^2/2 is exact to ~1e-27 here.
        let want = z + z * z * CF::real(0.5);
        assert!((got.re - want.re).abs() < 1e-24);
        assert!((got.im - want.im).abs() < 1e-24);
        // Large argument agrees with the direct form.
        let w = CF::<f64>::new(3.0, 2.0);
        let direct = w.exp() - CF::one();
        let stable = w.expm1();
        assert!((stable.re - direct.re).abs() < 1e-13 * direct.abs());
        assert!((stable.im - direct.im).abs() < 1e-13 * direct.abs());
    }

    #[test]
    fn complex_algebra_dd_consistent_with_f64() {
        let a = CF::<Dd>::from_f64s(1.5, -2.0);
        let af = CF::<f64>::new(1.5, -2.0);
        let got = (a.ln().exp() * a.sqrt().powi(2)).to_c64();
        let want = (af.ln().exp() * af.sqrt().powi(2)).to_c64();
        assert!((got.re - want.re).abs() < 1e-12 && (got.im - want.im).abs() < 1e-12);
    }

    #[test]
    fn compensated_sum_beats_naive_on_cancellation() {
        // Sum 1e8 copies of 0.1-like values minus their total: compensated
        // result must be exact to dd of the f64 model.
        let mut cs = CompensatedSum::<f64>::new();
        let v = CF::<f64>::new(0.1, -0.01);
        for _ in 0..10_000 {
            cs.add(v);
        }
        cs.add(CF::new(-1000.0, 100.0));
        let got = cs.value();
        assert!(got.re.abs() < 1e-10 && got.im.abs() < 1e-11);
    }
}
