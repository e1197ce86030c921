//! Bethe root solver: all L roots of w^N (w+1)^{L-N} = zz^L for contour
//! parameters |zz| below the stationary radius.
//!
//! The roots split into a "right" family of N roots clustering at the origin
//! and a "left" family of L-N roots clustering at -1. Each family is seeded by
//! a per-root fixed-point iteration at a small starting modulus, then carried
//! to the requested modulus by geometric continuation with a log-space Newton
//! update. Working in logs keeps every quantity O(L), so no intermediate
//! overflows regardless of system size; left roots are stored as v = w + 1 so
//! that the cluster near -1 keeps full relative precision.

use crate::error::{Error, Result};
use crate::scalar::{Real, CF};

/// Largest ring size the solver accepts; O(L^2) downstream assemblies get
/// unreasonable past this.
pub const MAX_RING: usize = 4096;

/// Stay strictly inside the stationary radius: right and left families merge
/// at w = -rho when |zz| reaches it.
pub const RADIUS_MARGIN: f64 = 0.999;

/// Newton is declared converged when the log-residual per root drops below
/// 50 eps L (eps of the working precision; the residual is a sum of ~L terms).
pub const NEWTON_TOL_FACTOR: f64 = 50.0;

/// Starting modulus of the continuation as a fraction of the stationary
/// radius: clusters are well separated there and the fixed-point seeds land
/// inside every Newton basin.
const CONTINUATION_START: f64 = 0.25;

/// Roots closer than this to the separating line Re w = -rho make the
/// left/right classification meaningless; surfaced as a partition error
/// rather than silently resolved.
pub const PARTITION_GUARD: f64 = 1e-9;

/// Stationary radius r0 = rho^rho (1-rho)^(1-rho) bounding the zz-contour.
pub fn stationary_radius(rho: f64) -> f64 {
    (rho * rho.ln() + (1.0 - rho) * (1.0 - rho).ln()).exp()
}

/// Ring size and particle count with the validity guards applied once.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelParams {
    pub l: usize,
    pub n: usize,
}

impl ModelParams {
    pub fn new(l: usize, n: usize) -> Result<Self> {
        if l < 2 || l > MAX_RING {
            return Err(Error::SizeGuard(format!(
                "ring size L={l} outside 2..={MAX_RING}"
            )));
        }
        if n == 0 || n >= l {
            return Err(Error::Domain(format!(
                "particle number N={n} must satisfy 0 < N < L={l}"
            )));
        }
        Ok(ModelParams { l, n })
    }

    /// Particle density rho = N/L.
    pub fn rho(&self) -> f64 {
        self.n as f64 / self.l as f64
    }

    /// Stationary radius for this density.
    pub fn radius(&self) -> f64 {
        stationary_radius(self.rho())
    }
}

/// Map a point z of the unit-disc contour to the zz-plane via
/// zz^L = (-1)^N r0^L z, taking the principal branch.
pub fn substitute_z(l: usize, n: usize, z: CF<f64>) -> CF<f64> {
    let rho = n as f64 / l as f64;
    let r0 = stationary_radius(rho);
    let phase = (z.arg() + std::f64::consts::PI * n as f64) / l as f64;
    let modulus = r0 * (z.abs().ln() / l as f64).exp();
    CF::new(modulus * phase.cos(), modulus * phase.sin())
}

/// The two root families at a given zz, plus the achieved log-residual.
#[derive(Clone, Debug)]
pub struct BetheRoots<R: Real> {
    pub l: usize,
    pub n: usize,
    pub zz: CF<R>,
    /// Right family: the N roots near the origin, as w.
    pub right: Vec<CF<R>>,
    /// Left family: the L-N roots near -1, stored as v = w + 1.
    pub left_v: Vec<CF<R>>,
    /// Max |log P(w) - L log zz| over all roots at exit.
    pub residual: f64,
}

impl<R: Real> BetheRoots<R> {
    /// Left-family roots as w = v - 1.
    pub fn left_w(&self) -> Vec<CF<R>> {
        self.left_v.iter().map(|v| *v - CF::one()).collect()
    }

    /// Verify the left/right classification: every right root must satisfy
    /// Re w > -rho and every left root Re w < -rho, with a guard band so a
    /// root sitting on the line is reported instead of misfiled.
    pub fn partition_check(&self) -> Result<()> {
        let rho = self.n as f64 / self.l as f64;
        for w in &self.right {
            let margin = w.re.to_f64() + rho;
            if margin < PARTITION_GUARD {
                return Err(Error::Partition(format!(
                    "right root at Re w + rho = {margin:.3e}"
                )));
            }
        }
        for v in &self.left_v {
            // Re w < -rho in v = w + 1 coordinates reads Re v < 1 - rho.
            let margin = (1.0 - rho) - v.re.to_f64();
            if margin < PARTITION_GUARD {
                return Err(Error::Partition(format!(
                    "left root at rho + Re w = {:.3e}",
                    -margin
                )));
            }
        }
        Ok(())
    }
}

/// Which root family a factor polynomial ranges over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Factor polynomial q_side(w) = prod (w - u) over the chosen family,
/// evaluated directly. Overflows for large L; prefer `q_factor_log`.
pub fn q_factor<R: Real>(roots: &BetheRoots<R>, side: Side, w: CF<R>) -> CF<R> {
    let mut p = CF::one();
    match side {
        Side::Right => {
            for u in &roots.right {
                p = p * (w - *u);
            }
        }
        Side::Left => {
            // w - (v - 1) = (w + 1) - v keeps precision near the -1 cluster.
            let w1 = w + CF::one();
            for v in &roots.left_v {
                p = p * (w1 - *v);
            }
        }
    }
    p
}

/// Log form of `q_factor`: sum of principal logs of the factors. The
/// imaginary part is a phase accumulated factor by factor, not reduced.
pub fn q_factor_log<R: Real>(roots: &BetheRoots<R>, side: Side, w: CF<R>) -> CF<R> {
    let mut s = CF::zero();
    match side {
        Side::Right => {
            for u in &roots.right {
                s = s + (w - *u).ln();
            }
        }
        Side::Left => {
            let w1 = w + CF::one();
            for v in &roots.left_v {
                s = s + (w1 - *v).ln();
            }
        }
    }
    s
}

fn two_pi<R: Real>() -> R {
    R::from_limbs(6.283185307179586, 2.4492935982947064e-16)
}

fn pi<R: Real>() -> R {
    R::from_limbs(3.141592653589793, 1.2246467991473532e-16)
}

/// Reduce the imaginary part of a log-residual to (-pi, pi].
fn reduce_branch<R: Real>(e: CF<R>) -> CF<R> {
    let k = (e.im.to_f64() / (2.0 * std::f64::consts::PI)).round();
    if k == 0.0 {
        e
    } else {
        CF { re: e.re, im: e.im - R::from_f64(k) * two_pi::<R>() }
    }
}

/// Log-residual of a right root: E = L Log zz - N Log w - (L-N) Log(1+w).
fn residual_right<R: Real>(l: usize, n: usize, log_zz_l: CF<R>, w: CF<R>) -> CF<R> {
    let e = log_zz_l
        - w.ln().scale(R::from_f64(n as f64))
        - (CF::one() + w).ln().scale(R::from_f64((l - n) as f64));
    reduce_branch(e)
}

/// Log-residual of a left root in v = w + 1 coordinates, using the fixed
/// analytic branch log(w) = i pi + Log(1 - v) valid throughout |v| < 1.
fn residual_left<R: Real>(l: usize, n: usize, log_zz_l: CF<R>, v: CF<R>) -> CF<R> {
    let log_w = CF { re: R::zero(), im: pi::<R>() } + (CF::one() - v).ln();
    let e = log_zz_l
        - log_w.scale(R::from_f64(n as f64))
        - v.ln().scale(R::from_f64((l - n) as f64));
    reduce_branch(e)
}

/// Newton update shared by both families. In w coordinates the step is
/// delta = E w(w+1) / (L (w+rho)); the same expression in v = w+1 reads
/// delta_v = E v(v-1) / (L (v-(1-rho))).
fn newton_family<R: Real>(
    l: usize,
    n: usize,
    log_zz_l: CF<R>,
    roots: &mut [CF<R>],
    left: bool,
    tol: f64,
) -> Result<f64> {
    let lf = R::from_f64(l as f64);
    let shift = if left {
        CF::real(R::from_f64((l - n) as f64) / lf) // 1 - rho
    } else {
        CF::real(-(R::from_f64(n as f64) / lf)) // -rho, entering as w - (-rho)
    };
    let mut worst = 0.0f64;
    for r in roots.iter_mut() {
        let mut ok = false;
        for _ in 0..60 {
            let e = if left {
                residual_left(l, n, log_zz_l, *r)
            } else {
                residual_right(l, n, log_zz_l, *r)
            };
            let mag = e.abs().to_f64();
            if mag < tol {
                worst = worst.max(mag);
                ok = true;
                break;
            }
            let x = *r;
            let denom = (x - shift).scale(lf);
            let num = if left { x * (x - CF::one()) } else { x * (x + CF::one()) };
            let delta = e * num / denom;
            *r = x + delta;
            if !r.re.to_f64().is_finite() || !r.im.to_f64().is_finite() {
                return Err(Error::NonConvergence(
                    "Newton produced a non-finite Bethe root".into(),
                ));
            }
        }
        if !ok {
            return Err(Error::NonConvergence(format!(
                "Bethe Newton stalled at L={l}, N={n}"
            )));
        }
    }
    Ok(worst)
}

/// Fixed-point seeds for both families at small |zz| where the iteration is a
/// strong contraction.
fn seed_families<R: Real>(
    l: usize,
    n: usize,
    log_zz: CF<R>,
) -> (Vec<CF<R>>, Vec<CF<R>>) {
    let lf = R::from_f64(l as f64);
    let log_zz_l = log_zz.scale(lf);
    let mut right = Vec::with_capacity(n);
    for m in 0..n {
        let branch = CF { re: R::zero(), im: two_pi::<R>() * R::from_f64(m as f64) };
        let mut w = CF::<R>::zero();
        for _ in 0..8 {
            let ex = (log_zz_l - (CF::one() + w).ln().scale(R::from_f64((l - n) as f64))
                + branch)
                .scale(R::one() / R::from_f64(n as f64));
            w = ex.exp();
        }
        right.push(w);
    }
    let mut left = Vec::with_capacity(l - n);
    for m in 0..(l - n) {
        let branch = CF {
            re: R::zero(),
            im: two_pi::<R>() * R::from_f64(m as f64) - pi::<R>() * R::from_f64(n as f64),
        };
        let mut v = CF::<R>::zero();
        for _ in 0..8 {
            let ex = (log_zz_l - (CF::one() - v).ln().scale(R::from_f64(n as f64)) + branch)
                .scale(R::one() / R::from_f64((l - n) as f64));
            v = ex.exp();
        }
        left.push(v);
    }
    (right, left)
}

/// Cheap O(L) sanity identities from the coefficients of
/// w^N (w+1)^{L-N} - zz^L: the root sum is -(L-N), equivalently
/// sum right w + sum left v = 0, and sum log|w_i| = L log|zz|.
fn vieta_check<R: Real>(l: usize, roots: &BetheRoots<R>) -> Result<()> {
    let mut s = CF::<R>::zero();
    for w in &roots.right {
        s = s + *w;
    }
    for v in &roots.left_v {
        s = s + *v;
    }
    let tol = 1e4 * f64::EPSILON * l as f64;
    if s.abs().to_f64() > tol {
        return Err(Error::Singular(format!(
            "Vieta sum violated ({:.2e} > {:.2e}): duplicate or lost Bethe root",
            s.abs().to_f64(),
            tol
        )));
    }
    let mut log_mod = 0.0f64;
    for w in &roots.right {
        log_mod += w.abs().to_f64().ln();
    }
    for v in &roots.left_v {
        log_mod += (*v - CF::one()).abs().to_f64().ln();
    }
    let expect = l as f64 * roots.zz.abs().to_f64().ln();
    if (log_mod - expect).abs() > 1e-9 * l as f64 {
        return Err(Error::Singular(
            "Vieta product violated: duplicate or lost Bethe root".into(),
        ));
    }
    Ok(())
}

/// Solve for all roots at the requested zz (f64 precision).
pub fn solve(l: usize, n: usize, zz: CF<f64>) -> Result<BetheRoots<f64>> {
    let params = ModelParams::new(l, n)?;
    let r0 = params.radius();
    let target = zz.abs();
    if !(target > 0.0) {
        return Err(Error::Domain("|zz| must be positive".into()));
    }
    if target >= RADIUS_MARGIN * r0 {
        return Err(Error::Domain(format!(
            "|zz| = {target:.6e} too close to the stationary radius {r0:.6e}"
        )));
    }
    let phase = zz.arg();
    let start = (CONTINUATION_START * r0).min(target);
    let tol = NEWTON_TOL_FACTOR * f64::EPSILON * l as f64;

    for attempt in 0..3 {
        let steps = if start < target {
            (12 << attempt).max(1)
        } else {
            1
        };
        let result = (|| -> Result<BetheRoots<f64>> {
            let zz0 = CF::new(start * phase.cos(), start * phase.sin());
            let (mut right, mut left) = seed_families::<f64>(l, n, zz0.ln());
            let mut residual = 0.0f64;
            for j in 0..=steps {
                let frac = j as f64 / steps as f64;
                let modulus = start * (target / start).powf(frac);
                let zj = CF::new(modulus * phase.cos(), modulus * phase.sin());
                let log_zz_l = zj.ln().scale(l as f64);
                let r1 = newton_family(l, n, log_zz_l, &mut right, false, tol)?;
                let r2 = newton_family(l, n, log_zz_l, &mut left, true, tol)?;
                residual = r1.max(r2);
            }
            let roots = BetheRoots { l, n, zz, right, left_v: left, residual };
            vieta_check(l, &roots)?;
            roots.partition_check()?;
            Ok(roots)
        })();
        match result {
            Ok(r) => return Ok(r),
            Err(_) if attempt < 2 => continue,
            Err(e) => return Err(e),
        }
    }
    unreachable!()
}

/// Re-solve at a neighboring zz using existing roots as the seed. Falls back
/// to a cold solve when warm Newton fails (e.g. the step was too large).
pub fn solve_warm(warm: &BetheRoots<f64>, zz: CF<f64>) -> Result<BetheRoots<f64>> {
    let (l, n) = (warm.l, warm.n);
    let tol = NEWTON_TOL_FACTOR * f64::EPSILON * l as f64;
    let rho = n as f64 / l as f64;
    if zz.abs() >= RADIUS_MARGIN * stationary_radius(rho) {
        return Err(Error::Domain("warm target outside the contour domain".into()));
    }
    let log_zz_l = zz.ln().scale(l as f64);
    let mut right = warm.right.clone();
    let mut left = warm.left_v.clone();
    let attempt = (|| -> Result<BetheRoots<f64>> {
        let r1 = newton_family(l, n, log_zz_l, &mut right, false, tol)?;
        let r2 = newton_family(l, n, log_zz_l, &mut left, true, tol)?;
        let roots = BetheRoots { l, n, zz, right, left_v: left, residual: r1.max(r2) };
        vieta_check(l, &roots)?;
        roots.partition_check()?;
        Ok(roots)
    })();
    match attempt {
        Ok(r) => Ok(r),
        Err(_) => solve(l, n, zz),
    }
}

impl BetheRoots<f64> {
    /// Polish every root in a higher working precision (a few Newton steps
    /// from the f64 values, which sit deep inside each basin).
    pub fn refine<R: Real>(&self) -> Result<BetheRoots<R>> {
        let (l, n) = (self.l, self.n);
        let zz = CF::<R>::from_f64s(self.zz.re, self.zz.im);
        let log_zz_l = zz.ln().scale(R::from_f64(l as f64));
        let tol = NEWTON_TOL_FACTOR * R::eps() * l as f64;
        let mut right: Vec<CF<R>> =
            self.right.iter().map(|w| CF::from_f64s(w.re, w.im)).collect();
        let mut left: Vec<CF<R>> =
            self.left_v.iter().map(|v| CF::from_f64s(v.re, v.im)).collect();
        let r1 = newton_family(l, n, log_zz_l, &mut right, false, tol)?;
        let r2 = newton_family(l, n, log_zz_l, &mut left, true, tol)?;
        Ok(BetheRoots { l, n, zz, right, left_v: left, residual: r1.max(r2) })
    }
}
