//! Dense complex LU factorization, generic over the scalar precision.
//!
//! The Fredholm determinants in this crate are determinants of moderate dense
//! complex matrices (dimension <= a few hundred). Partial-pivoted LU gives
//! the determinant in log form (magnitudes span thousands of orders across
//! quadrature nodes), linear solves for the rank-one determinant-ratio route,
//! and `tr(A^{-1} B)` for the Jacobi-formula x-derivative.

use crate::scalar::{Real, CF};

/// Square complex matrix, row-major.
#[derive(Clone, Debug)]
pub struct CMat<R> {
    pub n: usize,
    pub data: Vec<CF<R>>,
}

impl<R: Real> CMat<R> {
    pub fn zeros(n: usize) -> Self {
        CMat { n, data: vec![CF::zero(); n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> CF<R>) -> Self {
        let mut m = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    /// I + A in place.
    pub fn add_identity(&mut self) {
        for i in 0..self.n {
            let d = self.data[i * self.n + i];
            self.data[i * self.n + i] = d + CF::one();
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> CF<R> {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: CF<R>) {
        self.data[i * self.n + j] = v;
    }
}

pub struct LuFactor<R> {
    n: usize,
    lu: Vec<CF<R>>,
    piv: Vec<usize>,
    swaps_odd: bool,
    singular: bool,
    /// Largest entry magnitude seen during elimination; feeds the
    /// cancellation-floor noise model of the quadratures.
    growth: f64,
}

pub fn lu_factor<R: Real>(mat: CMat<R>) -> LuFactor<R> {
    let n = mat.n;
    let mut a = mat.data;
    let mut piv = Vec::with_capacity(n);
    let mut swaps_odd = false;
    let mut singular = false;
    let mut growth = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            growth = growth.max(a[i * n + j].norm_sqr().to_f64());
        }
    }
    for k in 0..n {
        let mut p = k;
        let mut best = a[k * n + k].norm_sqr();
        for r in (k + 1)..n {
            let m = a[r * n + k].norm_sqr();
            if m > best {
                best = m;
                p = r;
            }
        }
        piv.push(p);
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            swaps_odd = !swaps_odd;
        }
        let pivot = a[k * n + k];
        if pivot.norm_sqr().to_f64() == 0.0 {
            singular = true;
            continue;
        }
        let pinv = pivot.inv();
        for r in (k + 1)..n {
            let factor = a[r * n + k] * pinv;
            a[r * n + k] = factor;
            for j in (k + 1)..n {
                let v = a[r * n + j] - factor * a[k * n + j];
                a[r * n + j] = v;
                let m = v.norm_sqr().to_f64();
                if m > growth {
                    growth = m;
                }
            }
        }
    }
    LuFactor { n, lu: a, piv, swaps_odd, singular, growth: growth.sqrt() }
}

impl<R: Real> LuFactor<R> {
    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn growth(&self) -> f64 {
        self.growth
    }

    /// (smallest, largest) pivot magnitude |U_ii|; their ratio is a cheap
    /// proxy for how close the matrix is to singular.
    pub fn pivot_extremes(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for k in 0..self.n {
            let m = self.lu[k * self.n + k].abs().to_f64();
            lo = lo.min(m);
            hi = hi.max(m);
        }
        (lo, hi)
    }

    /// Determinant as (ln|det|, arg det); arg is an unwrapped sum of pivot
    /// arguments, valid inside exp. Singular matrices yield ln|det| = -inf.
    pub fn log_det(&self) -> (R, R) {
        if self.singular {
            return (R::from_f64(f64::NEG_INFINITY), R::zero());
        }
        let mut ln_mag = R::zero();
        let mut arg = if self.swaps_odd { R::from_f64(std::f64::consts::PI) } else { R::zero() };
        let half = R::from_f64(0.5);
        for k in 0..self.n {
            let p = self.lu[k * self.n + k];
            ln_mag = ln_mag + p.norm_sqr().ln() * half;
            arg = arg + p.arg();
        }
        (ln_mag, arg)
    }

    /// Determinant as a complex value; only safe when ln|det| is moderate.
    pub fn det(&self) -> CF<R> {
        if self.singular {
            return CF::zero();
        }
        let (lm, arg) = self.log_det();
        CF::new(lm, arg).exp()
    }

    /// Solve A x = b.
    pub fn solve(&self, b: &[CF<R>]) -> Vec<CF<R>> {
        assert_eq!(b.len(), self.n);
        assert!(!self.singular, "solve on singular factorization");
        let n = self.n;
        let mut x = b.to_vec();
        // The factorization swaps whole rows (multipliers included), so the
        // stored L belongs to P*A = L*U; apply all of P before substituting.
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
        }
        for k in 0..n {
            let xk = x[k];
            for r in (k + 1)..n {
                x[r] = x[r] - self.lu[r * n + k] * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in (k + 1)..n {
                s = s - self.lu[k * n + j] * x[j];
            }
            x[k] = s * self.lu[k * n + k].inv();
        }
        x
    }

    /// tr(A^{-1} B) by solving against each column of B.
    pub fn trace_solve(&self, b: &CMat<R>) -> CF<R> {
        assert_eq!(b.n, self.n);
        let n = self.n;
        let mut tr = CF::zero();
        let mut col = vec![CF::zero(); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = b.at(i, j);
            }
            let x = self.solve(&col);
            tr = tr + x[j];
        }
        tr
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dd::Dd;

    fn c(re: f64, im: f64) -> CF<f64> {
        CF::new(re, im)
    }

    #[test]
    fn empty_matrix_has_unit_determinant() {
        let f = lu_factor(CMat::<f64>::zeros(0));
        let (lm, arg) = f.log_det();
        assert_eq!(lm, 0.0);
        assert_eq!(arg, 0.0);
    }

    #[test]
    fn two_by_two_determinant() {
        let m = CMat { n: 2, data: vec![c(1.0, 2.0), c(-0.5, 0.3), c(2.0, -1.0), c(0.7, 0.7)] };
        // ad - bc computed directly.
        let want = c(1.0, 2.0) * c(0.7, 0.7) - c(-0.5, 0.3) * c(2.0, -1.0);
        let got = lu_factor(m).det();
        assert!((got.re - want.re).abs() < 1e-14 && (got.im - want.im).abs() < 1e-14);
    }

    #[test]
    fn solve_has_small_residual() {
        let n = 6;
        // Deterministic pseudo-random entries; diagonally dominant enough.
        let mut s = 1u64;
        let mut rnd = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / (1u64 << 53) as f64 - 0.5
        };
        let a = CMat::from_fn(n, |i, j| {
            let d = if i == j { 4.0 } else { 0.0 };
            c(rnd() + d, rnd())
        });
        let b: Vec<CF<f64>> = (0..n).map(|_| c(rnd(), rnd())).collect();
        let f = lu_factor(a.clone());
        let x = f.solve(&b);
        for i in 0..n {
            let mut r = CF::zero();
            for j in 0..n {
                r = r + a.at(i, j) * x[j];
            }
            assert!((r.re - b[i].re).abs() < 1e-13 && (r.im - b[i].im).abs() < 1e-13);
        }
    }

    #[test]
    fn solve_is_correct_when_pivoting_reorders_later_rows() {
        // Column 0 keeps row 0 as pivot, column 1 then promotes row 2, so a
        // row swap happens after multipliers already exist. A solver that
        // interleaves swaps with forward substitution gets this wrong.
        let rows = [
            [c(10.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)],
            [c(1.0, 0.0), c(0.1, 0.0), c(3.0, 0.0)],
            [c(2.0, 0.0), c(5.0, 0.0), c(0.2, 0.0)],
        ];
        let a = CMat::from_fn(3, |i, j| rows[i][j]);
        let b = [c(1.0, -1.0), c(2.0, 0.5), c(3.0, 2.0)];
        let x = lu_factor(a.clone()).solve(&b);
        for i in 0..3 {
            let mut r = CF::zero();
            for j in 0..3 {
                r = r + a.at(i, j) * x[j];
            }
            assert!((r.re - b[i].re).abs() < 1e-13 && (r.im - b[i].im).abs() < 1e-13);
        }
    }

    #[test]
    fn matrix_determinant_lemma_rank_one() {
        // det(I + u v^T) = 1 + v^T u: independent oracle for det + solve.
        let n = 5;
        let u: Vec<CF<f64>> = (0..n).map(|i| c(0.3 + 0.1 * i as f64, -0.2)).collect();
        let v: Vec<CF<f64>> = (0..n).map(|i| c(-0.1, 0.05 * i as f64 + 0.02)).collect();
        let mut m = CMat::from_fn(n, |i, j| u[i] * v[j]);
        m.add_identity();
        let got = lu_factor(m).det();
        let mut dot = CF::zero();
        for i in 0..n {
            dot = dot + v[i] * u[i];
        }
        let want = CF::one() + dot;
        assert!((got.re - want.re).abs() < 1e-13 && (got.im - want.im).abs() < 1e-13);
    }

    #[test]
    fn trace_solve_matches_explicit_inverse_picture() {
        // For A = diag(a_i) and B arbitrary: tr(A^{-1}B) = sum B_ii / a_i.
        let n = 4;
        let diag = [c(2.0, 1.0), c(-1.0, 0.5), c(0.3, -2.0), c(1.5, 1.5)];
        let a = CMat::from_fn(n, |i, j| if i == j { diag[i] } else { CF::zero() });
        let b = CMat::from_fn(n, |i, j| c((i + 2 * j) as f64 * 0.1, 0.3 - j as f64 * 0.05));
        let f = lu_factor(a);
        let got = f.trace_solve(&b);
        let mut want = CF::zero();
        for i in 0..n {
            want = want + b.at(i, i) / diag[i];
        }
        assert!((got.re - want.re).abs() < 1e-13 && (got.im - want.im).abs() < 1e-13);
    }

    #[test]
    fn dd_determinant_agrees_with_f64_on_benign_matrix() {
        let n = 4;
        let f64_mat =
            CMat::from_fn(n, |i, j| c(1.0 / (1.0 + i as f64 + j as f64), 0.1 * i as f64));
        let dd_mat = CMat::from_fn(n, |i, j| {
            let v = f64_mat.at(i, j);
            CF::<Dd>::from_f64s(v.re, v.im)
        });
        let d1 = lu_factor(f64_mat).det();
        let d2 = lu_factor(dd_mat).det().to_c64();
        assert!((d1.re - d2.re).abs() < 1e-12 * d1.abs().max(1e-30));
        assert!((d1.im - d2.im).abs() < 1e-12 * d1.abs().max(1e-30));
    }

    #[test]
    fn singular_matrix_flagged() {
        let m = CMat { n: 2, data: vec![c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)] };
        let f = lu_factor(m);
        assert!(f.is_singular());
        let d = f.det();
        assert_eq!(d.re, 0.0);
    }
}
