//! Double-double arithmetic (~31 significant decimal digits).
//!
//! The contour integrands of both distribution pipelines peak many orders of
//! magnitude above the value of the integral in the far left tail, so the
//! trapezoid sum cancels more digits than f64 carries. Quadratures detect
//! that through a cancellation-floor estimate and re-evaluate with this type.
//!
//! A value is an unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`. The
//! arithmetic kernels are the classic error-free transforms (Dekker split
//! product, Knuth two-sum); transcendentals follow the QD library design:
//! `exp` by 2^k scaling plus a short Taylor series, `ln` by Newton on `exp`,
//! trig by three-limb Cody-Waite reduction mod pi/2 plus Taylor. All are
//! frozen against 50-digit mpmath references in the tests below.

use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

/// Splitter constant 2^27 + 1 for Dekker's exact product.
const SPLIT: f64 = 134217729.0;

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Requires |a| >= |b| (or a == 0).
#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn split(a: f64) -> (f64, f64) {
    let t = SPLIT * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

/// Exact product of two doubles as a double-double (no FMA dependence).
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

pub const DD_LN2: Dd = Dd { hi: 0.6931471805599453, lo: 2.3190468138462996e-17 };
pub const DD_PI: Dd = Dd { hi: 3.141592653589793, lo: 1.2246467991473532e-16 };
pub const DD_TWO_PI: Dd = Dd { hi: 6.283185307179586, lo: 2.4492935982947064e-16 };
/// pi/2 as three limbs for Cody-Waite argument reduction.
const PI_2_LIMBS: (f64, f64, f64) =
    (1.5707963267948966, 6.123233995736766e-17, -1.4973849048591698e-33);

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline]
    pub fn new(hi: f64, lo: f64) -> Dd {
        let (s, e) = quick_two_sum(hi, lo);
        Dd { hi: s, lo: e }
    }

    #[inline]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) { -self } else { self }
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.hi.is_finite()
    }

    /// Exact scaling by a power of two.
    #[inline]
    pub fn ldexp(self, k: i32) -> Dd {
        let f = f64::powi(2.0, k);
        Dd { hi: self.hi * f, lo: self.lo * f }
    }

    pub fn sqrt(self) -> Dd {
        if self.hi == 0.0 && self.lo == 0.0 {
            return Dd::ZERO;
        }
        debug_assert!(self.hi > 0.0, "dd sqrt of negative value");
        // One Newton correction on the f64 seed doubles its accuracy.
        let y0 = self.hi.sqrt();
        let y0sq = Dd::from(two_prod(y0, y0));
        let diff = self - y0sq;
        let corr = diff.hi / (2.0 * y0);
        Dd::new(y0, corr + diff.lo / (2.0 * y0))
    }

    pub fn recip(self) -> Dd {
        Dd::ONE / self
    }

    /// exp with ~1 ulp double-double accuracy; saturates to 0 / inf outside
    /// the representable exponent range.
    pub fn exp(self) -> Dd {
        if self.hi <= -746.0 {
            return Dd::ZERO;
        }
        if self.hi >= 709.78 {
            return Dd { hi: f64::INFINITY, lo: 0.0 };
        }
        // x = m*ln2 + r, |r| <= ln2/2; e^x = 2^m * (e^(r/512))^512.
        let m = (self.hi / DD_LN2.hi).round();
        let r = (self - DD_LN2 * Dd::from_f64(m)).ldexp(-9);
        // Taylor of e^r - 1 for |r| <= ln2/1024 ~ 6.8e-4: 9 terms suffice.
        let mut term = r;
        let mut sum = r;
        for k in 2..=9 {
            term = term * r / Dd::from_f64(k as f64);
            sum = sum + term;
        }
        // Undo scaling via (1+s)^2 - 1 = s^2 + 2s, nine times.
        let mut s = sum;
        for _ in 0..9 {
            s = s * s + s.ldexp(1);
        }
        (s + Dd::ONE).ldexp(m as i32)
    }

    /// ln by two Newton corrections of the f64 seed (y += x*e^-y - 1).
    pub fn ln(self) -> Dd {
        debug_assert!(self.hi > 0.0, "dd ln of non-positive value");
        let mut y = Dd::from_f64(self.hi.ln());
        for _ in 0..2 {
            let e = (-y).exp();
            y = y + self * e - Dd::ONE;
        }
        y
    }

    /// e^x - 1, accurate for small |x|.
    pub fn expm1(self) -> Dd {
        if self.hi.abs() >= 0.34 {
            return self.exp() - Dd::ONE;
        }
        let mut term = self;
        let mut sum = self;
        let mut k = 2.0;
        loop {
            term = term * self / Dd::from_f64(k);
            sum = sum + term;
            if term.hi.abs() <= 1e-40 * sum.hi.abs().max(1e-300) || k > 40.0 {
                return sum;
            }
            k += 1.0;
        }
    }

    /// Reduce mod pi/2; returns (r, quadrant mod 4). Accurate for |x| up to
    /// ~1e8 (far beyond the phases this crate produces).
    fn reduce_pi2(self) -> (Dd, i64) {
        let q = (self.hi / PI_2_LIMBS.0).round();
        if q == 0.0 {
            return (self, 0);
        }
        let (p0, p1, p2) = PI_2_LIMBS;
        let r = self - Dd::from(two_prod(q, p0)) - Dd::from(two_prod(q, p1))
            - Dd::from_f64(q * p2);
        (r, (q as i64).rem_euclid(4))
    }

    /// Taylor sin on |r| <= pi/4 + tiny.
    fn sin_taylor(r: Dd) -> Dd {
        let x2 = r * r;
        let mut term = r;
        let mut sum = r;
        let mut k = 1.0;
        while term.hi.abs() > 1e-36 {
            term = -term * x2 / Dd::from_f64((k + 1.0) * (k + 2.0));
            sum = sum + term;
            k += 2.0;
        }
        sum
    }

    fn cos_taylor(r: Dd) -> Dd {
        let x2 = r * r;
        let mut term = Dd::ONE;
        let mut sum = Dd::ONE;
        let mut k = 0.0;
        while term.hi.abs() > 1e-36 {
            term = -term * x2 / Dd::from_f64((k + 1.0) * (k + 2.0));
            sum = sum + term;
            k += 2.0;
        }
        sum
    }

    pub fn sin_cos(self) -> (Dd, Dd) {
        // Past ~2^51 quadrants the three-limb Cody-Waite reduction loses the
        // quadrant entirely (and the i64 cast of q would wrap). Fall back to
        // the f64 result, which is what the argument's own granularity
        // supports at that magnitude, rather than returning garbage.
        if !self.hi.is_finite() || self.hi.abs() > 2.0_f64.powi(51) {
            let (s, c) = self.hi.sin_cos();
            return (Dd::from_f64(s), Dd::from_f64(c));
        }
        let (r, quad) = self.reduce_pi2();
        let s = Dd::sin_taylor(r);
        let c = Dd::cos_taylor(r);
        match quad {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        }
    }

    pub fn sin(self) -> Dd {
        self.sin_cos().0
    }

    pub fn cos(self) -> Dd {
        self.sin_cos().1
    }

    /// Four-quadrant arctangent, one Newton correction of the f64 seed.
    pub fn atan2(y: Dd, x: Dd) -> Dd {
        if y.hi == 0.0 && y.lo == 0.0 {
            return if x.hi >= 0.0 { Dd::ZERO } else { DD_PI };
        }
        let th0 = f64::atan2(y.hi, x.hi);
        let mut th = Dd::from_f64(th0);
        // f(th) = y cos th - x sin th has a simple zero at the true angle.
        for _ in 0..1 {
            let (s, c) = th.sin_cos();
            let num = y * c - x * s;
            let den = y * s + x * c;
            th = th + num / den;
        }
        th
    }
}

impl From<(f64, f64)> for Dd {
    #[inline]
    fn from(p: (f64, f64)) -> Dd {
        Dd::new(p.0, p.1)
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (s1, s2) = quick_two_sum(s1, s2 + t2);
        Dd { hi: s1, lo: s2 }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, b.hi);
        let (s, e) = quick_two_sum(p1, p2 + (self.hi * b.lo + self.lo * b.hi));
        Dd { hi: s, lo: e }
    }
}

impl Div for Dd {
    type Output = Dd;
    #[inline]
    fn div(self, b: Dd) -> Dd {
        // Long division with three quotient limbs (QD accurate division).
        let q1 = self.hi / b.hi;
        let r = self - b * Dd::from_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Dd::from_f64(q2);
        let q3 = r.hi / b.hi;
        let (s, e) = quick_two_sum(q1, q2);
        Dd::new(s, e + q3)
    }
}

impl PartialEq for Dd {
    fn eq(&self, other: &Dd) -> bool {
        self.hi == other.hi && self.lo == other.lo
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Dd) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            ord => ord,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// mpmath (50 digits), split into exact binary limbs.
    const UNARY_REFS: &[(&str, f64, f64, f64)] = &[
        ("exp", 0.3, 1.3498588075760032, -9.447314673432387e-17),
        ("exp", -20.0, 2.061153622438558e-09, -4.19755767595054e-26),
        ("exp", 35.0, 1586013452313430.8, -0.02187035537422534),
        ("exp", 700.0, 1.0142320547350045e+304, 1.6666571920734673e+287),
        ("ln", 0.3, -1.2039728043259361, 8.935521583403776e-17),
        ("ln", 7.0, 1.9459101490553132, 7.323586207904907e-17),
        ("ln", 0.001, -6.907755278982137, -2.1613487097372872e-16),
        ("sqrt", 2.0, 1.4142135623730951, -9.667293313452913e-17),
        ("sqrt", 0.3, 0.5477225575051661, 2.890126723719787e-17),
        ("sin", 0.7, 0.644217687237691, 2.8740567927338755e-18),
        ("cos", 0.7, 0.7648421872844885, -4.013780434022238e-17),
        ("sin", -12.5, 0.06632189735120068, 4.628667126141473e-18),
        ("cos", -12.5, 0.9977982791785807, 3.3602447434110414e-18),
        ("sin", 1950.25, 0.628044614266182, 4.5960768677245074e-17),
        ("cos", 1950.25, -0.7781773335758647, -1.1980724578416947e-17),
        ("expm1", 0.001, 0.0010005001667083417, 2.598544094203749e-20),
        ("expm1", -0.4, -0.32967995396436073, 1.382964510883754e-17),
    ];

    const ATAN2_REFS: &[(f64, f64, f64, f64)] = &[
        (1.0, 2.0, 0.4636476090008061, 2.2698777452961687e-17),
        (-0.7, -0.3, -1.9756881130799802, 1.0502421050460647e-16),
        (3.0, -4.0, 2.498091544796509, -4.392407599224622e-18),
        (-1e-08, -1.0, -3.141592643589793, -6.168997032962155e-17),
    ];

    fn rel_err(v: Dd, ref_hi: f64, ref_lo: f64) -> f64 {
        let d = (v - Dd::new(ref_hi, ref_lo)).hi.abs();
        d / ref_hi.abs().max(1e-300)
    }

    /// Transcendentals must be accurate to ~1e-30 relative: two orders above
    /// the dd ulp (~1.2e-32), leaving headroom for argument reduction.
    const DD_FN_TOL: f64 = 1e-29;

    #[test]
    fn transcendentals_match_mpmath() {
        for &(name, x, rh, rl) in UNARY_REFS {
            let xd = Dd::from_f64(x);
            let v = match name {
                "exp" => xd.exp(),
                "ln" => xd.ln(),
                "sqrt" => xd.sqrt(),
                "sin" => xd.sin(),
                "cos" => xd.cos(),
                "expm1" => xd.expm1(),
                _ => unreachable!(),
            };
            let e = rel_err(v, rh, rl);
            assert!(e < DD_FN_TOL, "{name}({x}): rel err {e:.3e}");
        }
        for &(y, x, rh, rl) in ATAN2_REFS {
            let v = Dd::atan2(Dd::from_f64(y), Dd::from_f64(x));
            let e = rel_err(v, rh, rl);
            assert!(e < DD_FN_TOL, "atan2({y},{x}): rel err {e:.3e}");
        }
    }

    #[test]
    fn field_ops_are_error_free_to_dd_ulp() {
        // (a*b)/b == a and (a+b)-b == a to ~1e-31 for awkward operands.
        let pairs = [
            (1.0 / 3.0, 7.0 / 11.0),
            (1e10 + 1.0 / 7.0, 3.0e-7),
            (-2.5000000001e-3, 1.0 / 9.0),
        ];
        for &(a, b) in &pairs {
            let ad = Dd::from_f64(a);
            let bd = Dd::from_f64(b);
            let m = (ad * bd) / bd;
            assert!(((m - ad).hi / a).abs() < 1e-31, "mul/div roundtrip");
            let s = (ad + bd) - bd;
            assert!(((s - ad).hi / a).abs() < 1e-31, "add/sub roundtrip");
        }
    }

    #[test]
    fn exp_ln_roundtrip_and_pythagoras() {
        for &x in &[0.017, 1.3, 9.0, 123.456, 600.0] {
            let xd = Dd::from_f64(x);
            let r = xd.exp().ln();
            assert!((r - xd).hi.abs() < 1e-29 * x.abs().max(1.0));
        }
        for &x in &[0.3, 2.0, -7.7, 1234.5] {
            let (s, c) = Dd::from_f64(x).sin_cos();
            let one = s * s + c * c;
            assert!((one - Dd::ONE).hi.abs() < 1e-30);
        }
    }

    #[test]
    fn comparisons_and_abs() {
        let a = Dd::new(1.0, -1e-20);
        let b = Dd::ONE;
        assert!(a < b);
        assert_eq!((-a).abs().hi, a.hi);
        assert!(Dd::from_f64(2.0) > Dd::from_f64(1.0));
    }
}
