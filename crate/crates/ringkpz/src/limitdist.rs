//! Limiting crossover distributions on the relaxation scale.
//!
//! Evaluates the stationary-initial-condition law F_U, the step law F_2, the
//! Bernoulli mixture F_B, the scaled second-moment function g_U with its
//! second derivative, and the figure scan tables. Each law is a contour
//! integral over a circle |z| < 1 of a Fredholm determinant on the discrete
//! node family e^{-xi^2/2} = z restricted to Re(xi) < 0; F_U additionally
//! carries the analytic x-derivative of the integrand.
//!
//! The z-trapezoid is spectrally accurate, so accuracy is governed by node
//! truncation and by cancellation in the determinant. Both are tracked
//! explicitly: truncation through a per-point node tolerance (widened for
//! very negative x, where the kernel exponent grows before it decays), and
//! cancellation through a noise floor measured from the doubling ladder
//! itself: a drift that stops shrinking is the rounding plateau of the
//! working precision. Points whose f64 plateau exceeds the requested
//! resolution are transparently re-evaluated in double-double precision.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::exactdist::QuadratureSpec;
use crate::linalg::{lu_factor, CMat};
use crate::scalar::{CompensatedSum, Real, CF};
use crate::specfun::{big_b, gauss_hermite, phi_tail_integral, polylog, PolyOrder};
use crate::table::DistTable;

/// Default node-truncation tolerance: keep xi while the cubic kernel weight
/// e^{Re(-tau xi^3/3)} stays above this. 1e-16 puts the dropped tail below
/// f64 roundoff of the leading nodes.
pub const NODE_WEIGHT_TOL: f64 = 1e-16;

/// Nodes must satisfy the defining equation e^{-xi^2/2} = z to this absolute
/// residual; the closed-form branch formula delivers far better, so a miss
/// signals a broken branch choice.
pub const XI_RESIDUAL_ATOL: f64 = 1e-12;

/// A node inside this radius of the origin is degenerate (only possible as
/// z -> 1, where the n = 0 branch collapses) and poisons every 1/xi factor.
pub const XI_DEGENERATE_RADIUS: f64 = 1e-8;

/// Left nodes satisfy Re(xi) >= sqrt(-ln|z|) > 0 in magnitude, so pairwise
/// sums xi_1 + eta stay bounded away from zero; tripping this guard means
/// the node set itself is corrupt.
pub const PAIR_SUM_GUARD: f64 = 1e-12;

/// Smallest acceptable LU pivot magnitude of I - K; below this the
/// determinant carries no trustworthy digits (proxy for the smallest
/// singular value at these well-scaled small dimensions).
pub const NEAR_SINGULAR_PIVOT: f64 = 1e-10;

/// Baseline noise floor per unit of working-precision eps ratio. The
/// measured components sit on top: the imaginary residue of the z-mean of a
/// real law is pure cancellation noise (same rounding paths as the real
/// part, no signal), and a stalled doubling drift marks the rounding
/// plateau. The 1e-13 unit bakes in eps_f64 with a safety margin for the
/// O(10^2)-term reductions used here.
pub const LIMIT_NOISE_FLOOR: f64 = 1e-13;

/// Quadrature doubling must move a limit CDF value by no more than this
/// (or the point's noise floor, whichever is larger).
pub const LIMIT_CONV_ATOL: f64 = 1e-9;

/// A doubling drift not shrinking below this fraction of the previous drift
/// counts as stalled; two consecutive stalls mark the rounding plateau.
/// Genuine trapezoid convergence here is geometric with factors well under
/// 1/10 per doubling, so 1/4 separates the regimes cleanly.
pub const LADDER_STALL_RATIO: f64 = 0.25;

/// Hard ceiling on the accepted noise floor after double-double escalation;
/// a value carrying more cancellation noise than this is useless to every
/// downstream tolerance and is reported as non-convergent instead.
pub const LIMIT_FLOOR_CEIL: f64 = 1e-6;

/// The z-mean of a real limit CDF must have imaginary residue below this
/// (or the noise floor at hard points).
pub const LIMIT_IMAG_ATOL: f64 = 1e-8;

/// CDF values may stray outside [0, 1] by at most this before clamping.
pub const LIMIT_CLAMP_EPS: f64 = 1e-8;

/// When the measured f64 noise floor of a point (imaginary residue or drift
/// plateau) exceeds this, the point is re-evaluated in double-double.
pub const ESCALATION_FLOOR: f64 = 1e-8;

/// Exponent guard before calling exp; beyond this the working precision is
/// already meaningless and overflow is near.
pub const OVERFLOW_GUARD_LOG: f64 = 600.0;

/// Doubling ladder cap for the z-trapezoid (64 default nodes -> 2048).
pub const MAX_LIMIT_DOUBLINGS: usize = 5;

/// Enumeration guard for the node family; reachable only with nonsensical
/// tolerances.
pub const NODE_ENUM_GUARD: i64 = 100_000;

/// Moment tabulation grid for g_U: [-15, 10] in steps of 0.05. The appendix
/// tail bounds put the density mass outside this window below 1e-8 for the
/// tau of interest.
pub const MOMENT_GRID_LO: f64 = -15.0;
pub const MOMENT_GRID_HI: f64 = 10.0;
pub const MOMENT_GRID_STEP: f64 = 0.05;

/// Density mass allowed outside the tabulation window.
pub const MOMENT_MASS_ATOL: f64 = 1e-8;

/// Default central-difference step for g_U''.
pub const GU_SECOND_STEP_DEFAULT: f64 = 0.05;

/// Gauss-Hermite defaults and caps for F_B. Arguments above the ceiling
/// contribute F_U ~ 1 within ~1e-6 (cubic upper-tail decay, and the mean of
/// F_U sits at -tau, far below the ceiling); weights below the skip
/// threshold cannot move the result at the 1e-6 acceptance level.
pub const FB_YNODES_MIN: usize = 20;
pub const FB_YNODES_DEFAULT: usize = 40;
pub const FB_ARG_CEIL: f64 = 12.0;
pub const FB_WEIGHT_SKIP: f64 = 1e-18;
pub const FB_CEIL_TAIL: f64 = 1e-6;
pub const FB_CONV_ATOL: f64 = 1e-6;

/// Arguments below this floor are taken as F_U = 0 in the F_B mixture. In
/// the small-tau regime the left tail decays like the cubic Baik-Rains tail,
/// dead below -12 tau^{1/3}; in the large-tau regime the law is close to a
/// Gaussian centered at -tau with deviation ~0.94 sqrt(tau), dead 7.6 sigmas
/// out. Either bound keeps the neglected mass under ~1e-9 for tau <= 8 while
/// staying inside the region the determinant can resolve in double-double.
pub fn fb_arg_floor(tau: f64) -> f64 {
    -(12.0 * tau.cbrt()).max(tau + 7.6 * tau.sqrt())
}

/// Rescaled parameters of the limit laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingParams {
    pub tau: f64,
    pub gamma: f64,
    pub x: f64,
}

impl ScalingParams {
    pub fn new(tau: f64, gamma: f64, x: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() || !gamma.is_finite() || !x.is_finite() {
            return Err(Error::Domain(format!(
                "scaling parameters need tau > 0 and finite gamma, x; got tau = {tau}, gamma = {gamma}, x = {x}"
            )));
        }
        Ok(Self { tau, gamma, x })
    }
}

/// Solutions of e^{-xi^2/2} = z with Re(xi) < 0, truncated by kernel weight.
#[derive(Debug, Clone)]
pub struct LimitNodeSet<R: Real> {
    pub z: CF<R>,
    pub left: Vec<CF<R>>,
    /// Largest |xi| kept; the set is the full family restricted to this ball.
    pub truncation: f64,
}

impl<R: Real> LimitNodeSet<R> {
    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }
}

/// Kernel matrix over the left nodes together with its x-derivative
/// (dPhi/dx = xi turns each summand into (xi_1 + eta) times itself).
#[derive(Debug, Clone)]
pub struct LimitKernel<R: Real> {
    pub k: CMat<R>,
    pub dk_dx: CMat<R>,
}

/// One evaluated limit-law point with its numerical health indicators.
#[derive(Debug, Clone, Copy)]
pub struct LimitEval {
    /// Clamped CDF value.
    pub value: f64,
    /// |Im| of the z-mean before taking the real part.
    pub imag_residue: f64,
    /// Cancellation floor: no digits below this are meaningful.
    pub noise_floor: f64,
    /// Change of the value under the final quadrature doubling.
    pub quad_drift: f64,
    /// z-trapezoid nodes at the accepted resolution.
    pub z_nodes: usize,
    /// Largest xi-node count over the contour.
    pub xi_nodes: usize,
    /// Precision label of the path that produced the value.
    pub precision: &'static str,
}

impl LimitEval {
    /// Combined per-row error estimate for tables.
    pub fn err(&self) -> f64 {
        self.noise_floor.max(self.quad_drift)
    }
}

fn pi_r<R: Real>() -> R {
    R::from_limbs(3.141592653589793, 1.2246467991473532e-16)
}

fn four_pi<R: Real>() -> R {
    R::from_limbs(12.566370614359172, 4.898587196589413e-16)
}

fn sqrt_two_pi<R: Real>() -> R {
    (R::from_f64(2.0) * pi_r::<R>()).sqrt()
}

fn sqrt_2_over_pi<R: Real>() -> R {
    (R::from_f64(2.0) / pi_r::<R>()).sqrt()
}

/// Enumerate the left node family xi_n = -sqrt(-2 Log z - 4 pi i n), keeping
/// every node whose kernel weight e^{Re(-tau xi^3/3)} is at least `tol`.
/// The n = 0 node anchors the set and is always kept.
pub fn s_nodes<R: Real>(z: CF<R>, tau: f64, tol: f64) -> Result<LimitNodeSet<R>> {
    let r = z.abs().to_f64();
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("|z| = {r} outside (0, 1)")));
    }
    if !(tau > 0.0) || !(tol > 0.0) {
        return Err(Error::Domain(format!(
            "node enumeration needs tau > 0 and tol > 0, got {tau}, {tol}"
        )));
    }
    let ln_tol = tol.ln();
    let log_z = z.ln();
    let minus_two_log_z = CF::zero() - log_z.scale(R::from_f64(2.0));
    let mut left: Vec<CF<R>> = Vec::new();
    let mut truncation: f64 = 0.0;

    let probe = |n: i64| -> Result<Option<CF<R>>> {
        let s = minus_two_log_z - CF::new(R::zero(), four_pi::<R>() * R::from_f64(n as f64));
        let xi = CF::zero() - s.sqrt();
        if xi.abs().to_f64() < XI_DEGENERATE_RADIUS {
            return Err(Error::Domain(format!(
                "degenerate node at n = {n}: |xi| < {XI_DEGENERATE_RADIUS:.0e} (z too close to 1)"
            )));
        }
        let residual = ((xi * xi).scale(R::from_f64(-0.5)).exp() - z).abs().to_f64();
        if residual > XI_RESIDUAL_ATOL {
            return Err(Error::NonConvergence(format!(
                "node residual {residual:.3e} at n = {n} exceeds {XI_RESIDUAL_ATOL:.0e}"
            )));
        }
        let cube = xi * xi * xi;
        let weight_log = -(tau / 3.0) * cube.re.to_f64();
        if n == 0 || weight_log >= ln_tol {
            Ok(Some(xi))
        } else {
            Ok(None)
        }
    };

    let mut misses = 0usize;
    let mut n = 0i64;
    loop {
        let mut kept_here = false;
        if let Some(xi) = probe(n)? {
            truncation = truncation.max(xi.abs().to_f64());
            left.push(xi);
            kept_here = true;
        }
        if n > 0 {
            if let Some(xi) = probe(-n)? {
                truncation = truncation.max(xi.abs().to_f64());
                left.push(xi);
                kept_here = true;
            }
        }
        misses = if kept_here { 0 } else { misses + 1 };
        // Three consecutive empty levels: the cubic weight has taken over
        // for good on both wings of the family.
        if misses >= 3 {
            break;
        }
        n += 1;
        if n > NODE_ENUM_GUARD {
            return Err(Error::NonConvergence(format!(
                "node enumeration passed {NODE_ENUM_GUARD} levels without decaying below tol = {tol:.3e}"
            )));
        }
    }
    Ok(LimitNodeSet {
        z,
        left,
        truncation,
    })
}

/// Widen the node tolerance for very negative x. Along the deep-node ray
/// the exponent decays like D(s) = tau*sqrt(2)*s^3/6 - |x|*s/sqrt(2) with
/// s = |xi|; for x < 0 the linear term grows before the cubic one wins, so
/// the cut must move to the root of D(s) = -ln(tol) past the minimum. The
/// returned tolerance makes the plain weight rule keep every |xi| up to
/// that root.
pub fn effective_node_tol(tau: f64, x: f64, tol: f64) -> f64 {
    let b = (-x).max(0.0) / std::f64::consts::SQRT_2;
    if b == 0.0 {
        return tol;
    }
    let a = tau * std::f64::consts::SQRT_2 / 6.0;
    let target = -tol.ln();
    let d = |s: f64| a * s * s * s - b * s;
    let mut lo = (b / (3.0 * a)).sqrt();
    if d(lo) >= target {
        return tol;
    }
    let mut hi = lo + 1.0;
    while d(hi) < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if d(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (-a * hi * hi * hi).exp().min(tol).max(1e-300)
}

fn phi_from_tail<R: Real>(xi: CF<R>, tail: CF<R>, x: f64, tau: f64) -> CF<R> {
    let cube = xi * xi * xi;
    xi.scale(R::from_f64(x)) - cube.scale(R::from_f64(tau) / R::from_f64(3.0))
        - tail.scale(sqrt_2_over_pi::<R>())
}

/// Kernel exponent Phi_z(xi; x, tau) = -tau xi^3/3 + x xi - sqrt(2/pi) T(xi),
/// with T the tail integral of Li_{1/2}(e^{-omega^2/2}).
pub fn phi_z<R: Real>(xi: CF<R>, x: f64, tau: f64) -> Result<CF<R>> {
    let (tail, _) = phi_tail_integral(xi)?;
    Ok(phi_from_tail(xi, tail, x, tau))
}

fn assemble_kernel<R: Real>(
    xi: &[CF<R>],
    tail: &[CF<R>],
    sp: &ScalingParams,
) -> Result<LimitKernel<R>> {
    let n = xi.len();
    if n == 0 {
        return Err(Error::Domain("empty node set".into()));
    }
    let half_gamma = R::from_f64(0.5 * sp.gamma);
    let mut p = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    for i in 0..n {
        let phi = phi_from_tail(xi[i], tail[i], sp.x, sp.tau);
        let sq = xi[i] * xi[i];
        // Split exponent: e^{phi_1 + phi_eta + gamma(xi_1^2 - eta^2)/2}
        // = p(xi_1) q(eta) with p = e^{phi + gamma xi^2/2}, q = e^{phi - ...}.
        let ep = phi + sq.scale(half_gamma);
        let eq = phi - sq.scale(half_gamma);
        if ep.re.to_f64() > OVERFLOW_GUARD_LOG || eq.re.to_f64() > OVERFLOW_GUARD_LOG {
            return Err(Error::Overflow(format!(
                "kernel exponent {:.1} beyond guard {OVERFLOW_GUARD_LOG}",
                ep.re.to_f64().max(eq.re.to_f64())
            )));
        }
        p.push(ep.exp());
        q.push(eq.exp());
    }
    let mut k = CMat::zeros(n);
    let mut dk = CMat::zeros(n);
    for i in 0..n {
        for m in 0..n {
            let pair = xi[i] + xi[m];
            if pair.abs().to_f64() < PAIR_SUM_GUARD {
                return Err(Error::Domain(format!(
                    "coincident nodes: |xi_{i} + xi_{m}| < {PAIR_SUM_GUARD:.0e}"
                )));
            }
            let c = p[i] * q[m] / (xi[i] * xi[m] * pair);
            for j in 0..n {
                let d = c / (xi[m] + xi[j]);
                k.set(i, j, k.at(i, j) + d);
                dk.set(i, j, dk.at(i, j) + d * pair);
            }
        }
    }
    Ok(LimitKernel { k, dk_dx: dk })
}

/// Kernel matrix and its x-derivative on a node set.
pub fn limit_kernel<R: Real>(
    nodes: &LimitNodeSet<R>,
    sp: &ScalingParams,
) -> Result<LimitKernel<R>> {
    let mut tails = Vec::with_capacity(nodes.left.len());
    for &xi in &nodes.left {
        tails.push(phi_tail_integral(xi)?.0);
    }
    assemble_kernel(&nodes.left, &tails, sp)
}

/// det(I - K) for a limit kernel.
pub fn limit_fredholm_det<R: Real>(kernel: &LimitKernel<R>) -> Result<CF<R>> {
    let n = kernel.k.n;
    let mut a = CMat::from_fn(n, |i, j| CF::zero() - kernel.k.at(i, j));
    a.add_identity();
    let lu = lu_factor(a);
    if lu.is_singular() {
        return Err(Error::Singular("singular I - K in limit determinant".into()));
    }
    Ok(lu.det())
}

/// Everything about one z-node that does not depend on x or gamma: the
/// node family, its tail integrals, and the prefactor ingredients A_1, A_2
/// and 2B. Built once per contour and reused across the whole (x, gamma)
/// batch.
struct ZCache<R: Real> {
    z: CF<R>,
    a1: CF<R>,
    a2: CF<R>,
    two_b: CF<R>,
    xi: Vec<CF<R>>,
    tail: Vec<CF<R>>,
}

fn build_zcache<R: Real>(z: CF<R>, tau: f64, node_tol: f64) -> Result<ZCache<R>> {
    let nodes = s_nodes(z, tau, node_tol)?;
    let mut tail = Vec::with_capacity(nodes.len());
    for &xi in &nodes.left {
        tail.push(phi_tail_integral(xi)?.0);
    }
    let stp = sqrt_two_pi::<R>();
    let li32 = polylog(PolyOrder::ThreeHalves, z)?;
    let li52 = polylog(PolyOrder::FiveHalves, z)?;
    let (b, _) = big_b(z)?;
    Ok(ZCache {
        z,
        a1: CF::zero() - li32.scale(R::one() / stp),
        a2: CF::zero() - li52.scale(R::one() / stp),
        two_b: b.scale(R::from_f64(2.0)),
        xi: nodes.left,
        tail,
    })
}

/// Integrand pieces at one z-node: the F_2 term e^{pref} det(I - K) and the
/// F_U term g(z)/z with g the analytic x-derivative.
struct ZTerm<R: Real> {
    f2: CF<R>,
    fu: CF<R>,
}

fn z_integrand<R: Real>(zc: &ZCache<R>, x: f64, tau: f64, gamma: f64) -> Result<ZTerm<R>> {
    let sp = ScalingParams { tau, gamma, x };
    let kernel = assemble_kernel(&zc.xi, &zc.tail, &sp)?;
    let n = kernel.k.n;
    let mut a = CMat::from_fn(n, |i, j| CF::zero() - kernel.k.at(i, j));
    a.add_identity();
    let lu = lu_factor(a);
    if lu.is_singular() {
        return Err(Error::Singular(format!(
            "singular I - K at z = {:?}",
            zc.z.to_c64()
        )));
    }
    let (pivot_lo, _) = lu.pivot_extremes();
    if pivot_lo < NEAR_SINGULAR_PIVOT {
        return Err(Error::Singular(format!(
            "near-singular I - K at z = {:?}: min pivot {pivot_lo:.3e}",
            zc.z.to_c64()
        )));
    }
    let (log_abs, arg) = lu.log_det();
    let pref = zc.a1.scale(R::from_f64(x)) + zc.a2.scale(R::from_f64(tau)) + zc.two_b;
    let log_term = pref + CF::new(log_abs, arg);
    if log_term.re.to_f64() > OVERFLOW_GUARD_LOG {
        return Err(Error::Overflow(format!(
            "integrand exponent {:.1} beyond guard",
            log_term.re.to_f64()
        )));
    }
    let f2 = log_term.exp();
    let trace = lu.trace_solve(&kernel.dk_dx);
    let fu = f2 * (zc.a1 - trace) / zc.z;
    Ok(ZTerm { f2, fu })
}

#[derive(Clone, Copy)]
enum LimitLaw {
    F2,
    Fu,
}

/// Raw (unclamped) batch evaluation at one contour resolution.
#[derive(Clone, Copy)]
struct RawPoint {
    value: f64,
    imag: f64,
    floor: f64,
    xi_nodes: usize,
}

/// Ladder outcome for one point: the accepted raw value, the drift of its
/// final doubling, and the resolution it settled at. A stalled point carries
/// its drift plateau inside `raw.floor`.
struct LadderPoint {
    raw: RawPoint,
    drift: f64,
    m: usize,
}

fn eval_all<R: Real + Send + Sync>(
    caches: &[ZCache<R>],
    law: LimitLaw,
    tau: f64,
    pts: &[(f64, f64)],
) -> Result<Vec<RawPoint>> {
    let eps_ratio = R::eps() / f64::EPSILON;
    pts.par_iter()
        .map(|&(x, gamma)| {
            let mut sum = CompensatedSum::<R>::new();
            let mut xi_nodes = 0usize;
            for zc in caches {
                let term = z_integrand(zc, x, tau, gamma)?;
                xi_nodes = xi_nodes.max(zc.xi.len());
                match law {
                    LimitLaw::F2 => sum.add(term.f2),
                    LimitLaw::Fu => sum.add(term.fu),
                }
            }
            let inv_m = R::one() / R::from_f64(caches.len() as f64);
            let mean = sum.value().scale(inv_m);
            let (value, imag) = match law {
                LimitLaw::F2 => (mean.re.to_f64(), mean.im.to_f64().abs()),
                LimitLaw::Fu => {
                    let s = sqrt_two_pi::<f64>();
                    (-s * mean.re.to_f64(), s * mean.im.to_f64().abs())
                }
            };
            let floor = (LIMIT_NOISE_FLOOR * eps_ratio).max(imag);
            Ok(RawPoint {
                value,
                imag,
                floor,
                xi_nodes,
            })
        })
        .collect()
}

/// Upper half of an m-point circle contour. The integrand of every limit law
/// satisfies f(conj z) = conj f(z), so the full trapezoid mean is the two
/// real-axis terms plus twice the real part of the interior upper-half
/// terms. Building only the half keeps the conjugate pairing exact (no
/// angle rounding can break it) and halves the work.
struct Contour<R: Real> {
    m: usize,
    /// Caches at theta = 2 pi j / m for j = 0..=m/2; the endpoints are
    /// constructed exactly on the real axis.
    upper: Vec<ZCache<R>>,
}

fn cache_at<R: Real>(j: usize, m: usize, radius: f64, tau: f64, node_tol: f64) -> Result<ZCache<R>> {
    let z = if j == 0 {
        CF::new(R::from_f64(radius), R::zero())
    } else if 2 * j == m {
        CF::new(R::from_f64(-radius), R::zero())
    } else {
        let th = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
        CF::new(R::zero(), R::from_f64(th))
            .exp()
            .scale(R::from_f64(radius))
    };
    build_zcache(z, tau, node_tol)
}

fn build_contour<R: Real + Send + Sync>(
    m: usize,
    radius: f64,
    tau: f64,
    node_tol: f64,
) -> Result<Contour<R>> {
    if m < 2 || m % 2 != 0 {
        return Err(Error::Domain(format!(
            "contour node count m = {m} must be even and at least 2"
        )));
    }
    let upper = (0..=m / 2)
        .into_par_iter()
        .map(|j| cache_at(j, m, radius, tau, node_tol))
        .collect::<Result<_>>()?;
    Ok(Contour { m, upper })
}

/// Double the contour resolution, reusing every existing node: the even
/// indices of the 2m-grid are exactly the m-grid.
fn extend_contour<R: Real + Send + Sync>(
    old: Contour<R>,
    radius: f64,
    tau: f64,
    node_tol: f64,
) -> Result<Contour<R>> {
    let m2 = old.m * 2;
    let fresh: Vec<ZCache<R>> = (0..old.m / 2)
        .into_par_iter()
        .map(|i| cache_at(2 * i + 1, m2, radius, tau, node_tol))
        .collect::<Result<_>>()?;
    let mut upper = Vec::with_capacity(m2 / 2 + 1);
    let mut odds = fresh.into_iter();
    for even in old.upper {
        upper.push(even);
        if let Some(odd) = odds.next() {
            upper.push(odd);
        }
    }
    Ok(Contour { m: m2, upper })
}

/// Doubling ladder at one precision. A point is accepted when its doubling
/// drift falls under max(LIMIT_CONV_ATOL, a-priori floor), or when the drift
/// stalls (fails to shrink by LADDER_STALL_RATIO twice in a row), which
/// identifies the rounding plateau of the working precision; the plateau is
/// then recorded as the point's noise floor.
fn eval_points<R: Real + Send + Sync>(
    law: LimitLaw,
    tau: f64,
    pts: &[(f64, f64)],
    quad: &QuadratureSpec,
    node_tol: f64,
) -> Result<Vec<LadderPoint>> {
    let mut m = quad.nodes;
    let mut caches = build_caches::<R>(m, quad.radius, tau, node_tol)?;
    let mut prev = eval_all(&caches, law, tau, pts)?;
    let mut done: Vec<Option<LadderPoint>> = (0..pts.len()).map(|_| None).collect();
    let mut last_drift = vec![f64::INFINITY; pts.len()];
    let mut stalls = vec![0u32; pts.len()];
    for _ in 0..MAX_LIMIT_DOUBLINGS {
        m *= 2;
        caches = extend_caches(caches, quad.radius, tau, node_tol)?;
        let next = eval_all(&caches, law, tau, pts)?;
        for (i, slot) in done.iter_mut().enumerate() {
            if slot.is_some() {
                continue;
            }
            let drift = (prev[i].value - next[i].value).abs();
            if drift <= LIMIT_CONV_ATOL.max(next[i].floor) {
                *slot = Some(LadderPoint {
                    raw: next[i],
                    drift,
                    m,
                });
            } else if drift > LADDER_STALL_RATIO * last_drift[i] {
                stalls[i] += 1;
                if stalls[i] >= 2 {
                    let mut raw = next[i];
                    raw.floor = raw.floor.max(drift);
                    *slot = Some(LadderPoint { raw, drift, m });
                }
            } else {
                stalls[i] = 0;
            }
            last_drift[i] = drift;
        }
        if done.iter().all(Option::is_some) {
            return Ok(done.into_iter().map(|p| p.expect("all settled")).collect());
        }
        prev = next;
    }
    Err(Error::NonConvergence(format!(
        "z-trapezoid still improving after {MAX_LIMIT_DOUBLINGS} doublings (m = {m})"
    )))
}

fn finalize(law_name: &str, raw: RawPoint, drift: f64, m: usize, label: &'static str) -> Result<LimitEval> {
    if raw.imag > LIMIT_IMAG_ATOL.max(raw.floor) {
        return Err(Error::NonConvergence(format!(
            "{law_name}: imaginary residue {:.3e} above {:.3e}",
            raw.imag,
            LIMIT_IMAG_ATOL.max(raw.floor)
        )));
    }
    let slack = LIMIT_CLAMP_EPS + raw.floor;
    if raw.value < -slack || raw.value > 1.0 + slack {
        return Err(Error::NonConvergence(format!(
            "{law_name}: value {:.6e} outside [0, 1] beyond slack {slack:.3e}",
            raw.value
        )));
    }
    Ok(LimitEval {
        value: raw.value.clamp(0.0, 1.0),
        imag_residue: raw.imag,
        noise_floor: raw.floor,
        quad_drift: drift,
        z_nodes: m,
        xi_nodes: raw.xi_nodes,
        precision: label,
    })
}

/// Evaluate a batch of (x, gamma) points of one law, escalating individual
/// points to double-double when their f64 cancellation floor exceeds
/// [`ESCALATION_FLOOR`].
fn eval_batch(
    law: LimitLaw,
    tau: f64,
    pts: &[(f64, f64)],
    quad: &QuadratureSpec,
) -> Result<Vec<LimitEval>> {
    let law_name = match law {
        LimitLaw::F2 => "f2_limit",
        LimitLaw::Fu => "fu_limit",
    };
    let node_tol = pts
        .iter()
        .map(|&(x, _)| effective_node_tol(tau, x, NODE_WEIGHT_TOL))
        .fold(NODE_WEIGHT_TOL, f64::min);
    let coarse = eval_points::<f64>(law, tau, pts, quad, node_tol)?;
    let hard: Vec<usize> = coarse
        .iter()
        .enumerate()
        .filter(|(_, p)| p.raw.floor > ESCALATION_FLOOR)
        .map(|(i, _)| i)
        .collect();
    let mut out: Vec<Option<LimitEval>> = Vec::with_capacity(pts.len());
    for (i, p) in coarse.into_iter().enumerate() {
        if hard.contains(&i) {
            out.push(None);
        } else {
            out.push(Some(finalize(law_name, p.raw, p.drift, p.m, f64::label())?));
        }
    }
    if !hard.is_empty() {
        let sub: Vec<(f64, f64)> = hard.iter().map(|&i| pts[i]).collect();
        let refined = eval_points::<Dd>(law, tau, &sub, quad, node_tol)?;
        for (&i, p) in hard.iter().zip(refined) {
            if p.raw.floor > LIMIT_FLOOR_CEIL {
                return Err(Error::NonConvergence(format!(
                    "{law_name}: double-double noise floor {:.3e} at (x, gamma) = {:?} exceeds {LIMIT_FLOOR_CEIL:.0e}",
                    p.raw.floor, pts[i]
                )));
            }
            out[i] = Some(finalize(law_name, p.raw, p.drift, p.m, Dd::label())?);
        }
    }
    Ok(out.into_iter().map(|e| e.expect("all points filled")).collect())
}

/// F_2(x; tau, gamma): circle mean of e^{x A_1 + tau A_2 + 2B} det(I - K).
pub fn f2_limit(sp: &ScalingParams, quad: &QuadratureSpec) -> Result<LimitEval> {
    Ok(eval_batch(LimitLaw::F2, sp.tau, &[(sp.x, sp.gamma)], quad)?
        .pop()
        .expect("one point in, one out"))
}

/// F_U(x; tau, gamma): minus the contour integral of the analytic
/// x-derivative of the F_2 integrand against dz/(sqrt(2 pi) i z^2).
pub fn fu_limit(sp: &ScalingParams, quad: &QuadratureSpec) -> Result<LimitEval> {
    Ok(eval_batch(LimitLaw::Fu, sp.tau, &[(sp.x, sp.gamma)], quad)?
        .pop()
        .expect("one point in, one out"))
}

/// Batch form of [`fu_limit`] sharing the z-contour caches across all
/// (x, gamma) points; the workhorse for tabulations and scans.
pub fn fu_batch(tau: f64, pts: &[(f64, f64)], quad: &QuadratureSpec) -> Result<Vec<LimitEval>> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("tau = {tau} must be positive")));
    }
    eval_batch(LimitLaw::Fu, tau, pts, quad)
}

/// Gap between the analytic x-derivative of the F_U integrand and a central
/// finite difference of the F_2 integrand at one (z, x, tau, gamma) point.
pub fn integrand_dx_gap(
    z: CF<f64>,
    sp: &ScalingParams,
    step: f64,
) -> Result<f64> {
    let node_tol = effective_node_tol(sp.tau, sp.x - step, NODE_WEIGHT_TOL);
    let zc = build_zcache(z, sp.tau, node_tol)?;
    let g = |x: f64| -> Result<ZTerm<f64>> { z_integrand(&zc, x, sp.tau, sp.gamma) };
    let center = g(sp.x)?;
    let plus = g(sp.x + step)?;
    let minus = g(sp.x - step)?;
    // fu carries an extra 1/z; undo it to compare d/dx of the bare integrand.
    let analytic = center.fu * zc.z;
    let fd = (plus.f2 - minus.f2).scale(1.0 / (2.0 * step));
    Ok((analytic - fd).abs())
}

fn default_quad() -> QuadratureSpec {
    QuadratureSpec::new(0.5, 64).expect("static default is valid")
}

/// F_U tabulated on an x-grid at fixed gamma; returns per-point evaluations.
pub fn fu_table(
    tau: f64,
    gamma: f64,
    xs: &[f64],
    quad: &QuadratureSpec,
) -> Result<Vec<LimitEval>> {
    let pts: Vec<(f64, f64)> = xs.iter().map(|&x| (x, gamma)).collect();
    fu_batch(tau, &pts, quad)
}

fn simpson(step: f64, ys: &[f64]) -> f64 {
    assert!(ys.len() >= 3 && ys.len() % 2 == 1, "odd point count required");
    let mut s = ys[0] + ys[ys.len() - 1];
    for (i, y) in ys.iter().enumerate().take(ys.len() - 1).skip(1) {
        s += y * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * step / 3.0
}

/// First and second moments of F_U by integration by parts over a CDF grid:
/// E[X] = b F(b) - a F(a) - int F, E[X^2] = b^2 F(b) - a^2 F(a) - 2 int x F.
/// Composite Simpson delivers the accuracy the 0.05 grid supports.
pub fn fu_moments_on_grid(
    tau: f64,
    gamma: f64,
    quad: &QuadratureSpec,
    lo: f64,
    hi: f64,
    step: f64,
) -> Result<(f64, f64)> {
    let n = ((hi - lo) / step).round() as usize;
    if n < 2 || n % 2 != 0 || ((hi - lo) - n as f64 * step).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "moment grid [{lo}, {hi}] step {step} must have an even interval count"
        )));
    }
    let xs: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
    let evals = fu_table(tau, gamma, &xs, quad)?;
    let f_lo = evals[0].value;
    let f_hi = evals[n].value;
    if f_lo > MOMENT_MASS_ATOL || 1.0 - f_hi > MOMENT_MASS_ATOL {
        return Err(Error::NonConvergence(format!(
            "density mass outside [{lo}, {hi}] exceeds {MOMENT_MASS_ATOL:.0e}: F(lo) = {f_lo:.3e}, 1 - F(hi) = {:.3e}",
            1.0 - f_hi
        )));
    }
    let f: Vec<f64> = evals.iter().map(|e| e.value).collect();
    let xf: Vec<f64> = xs.iter().zip(&f).map(|(x, v)| x * v).collect();
    let i0 = simpson(step, &f);
    let i1 = simpson(step, &xf);
    let m1 = hi * f_hi - lo * f_lo - i0;
    let m2 = hi * hi * f_hi - lo * lo * f_lo - 2.0 * i1;
    Ok((m1, m2))
}

/// Moments on the standard [-15, 10] grid.
pub fn fu_moments(tau: f64, gamma: f64, quad: &QuadratureSpec) -> Result<(f64, f64)> {
    fu_moments_on_grid(
        tau,
        gamma,
        quad,
        MOMENT_GRID_LO,
        MOMENT_GRID_HI,
        MOMENT_GRID_STEP,
    )
}

/// g_U(gamma; tau) = tau^{2/3} E[X^2] under F_U(.; tau, gamma).
pub fn g_u(gamma: f64, tau: f64) -> Result<f64> {
    let (_, m2) = fu_moments(tau, gamma, &default_quad())?;
    Ok(tau.powf(2.0 / 3.0) * m2)
}

/// Central second difference of g_U in gamma with step h.
pub fn g_u_second(gamma: f64, tau: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("step h = {h} must be positive")));
    }
    let up = g_u(gamma + h, tau)?;
    let mid = g_u(gamma, tau)?;
    let down = g_u(gamma - h, tau)?;
    Ok((up - 2.0 * mid + down) / (h * h))
}

/// F_B(x; tau, gamma): Gaussian mixture of F_U over the Bernoulli-density
/// parameter, evaluated by Gauss-Hermite after y = gamma + 2 sqrt(2) tau s.
pub fn fb_bernoulli(sp: &ScalingParams, quad: &QuadratureSpec, ynodes: usize) -> Result<LimitEval> {
    if ynodes < FB_YNODES_MIN {
        return Err(Error::Domain(format!(
            "ynodes = {ynodes} below minimum {FB_YNODES_MIN}"
        )));
    }
    let arg_floor = fb_arg_floor(sp.tau);
    let pass = |n: usize| -> Result<(f64, f64, f64, usize, usize)> {
        let (s, w) = gauss_hermite(n)?;
        let mut capped_one_mass = 0.0;
        let mut pts: Vec<(f64, f64)> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for i in 0..n {
            if w[i] < FB_WEIGHT_SKIP {
                continue;
            }
            let y = sp.gamma + 2.0 * std::f64::consts::SQRT_2 * sp.tau * s[i];
            let arg = sp.x + (sp.gamma * sp.gamma - y * y) / (4.0 * sp.tau);
            if arg <= arg_floor {
                continue;
            }
            if arg >= FB_ARG_CEIL {
                capped_one_mass += w[i];
                continue;
            }
            pts.push((arg, y));
            weights.push(w[i]);
        }
        let evals = fu_batch(sp.tau, &pts, quad)?;
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        let mut value = capped_one_mass;
        let mut floor = capped_one_mass * FB_CEIL_TAIL;
        let mut imag: f64 = 0.0;
        let mut z_nodes = quad.nodes;
        let mut xi_nodes = 0;
        for (wi, e) in weights.iter().zip(&evals) {
            value += wi * e.value;
            floor += wi * e.err();
            imag = imag.max(e.imag_residue);
            z_nodes = z_nodes.max(e.z_nodes);
            xi_nodes = xi_nodes.max(e.xi_nodes);
        }
        Ok((value * inv_sqrt_pi, floor * inv_sqrt_pi, imag, z_nodes, xi_nodes))
    };
    let (v1, _, _, _, _) = pass(ynodes)?;
    let (v2, floor, imag, z_nodes, xi_nodes) = pass(2 * ynodes)?;
    let drift = (v1 - v2).abs();
    if drift >= FB_CONV_ATOL {
        return Err(Error::NonConvergence(format!(
            "fb_bernoulli: doubling ynodes moved the value by {drift:.3e} >= {FB_CONV_ATOL:.0e}"
        )));
    }
    Ok(LimitEval {
        value: v2.clamp(0.0, 1.0),
        imag_residue: imag,
        noise_floor: floor,
        quad_drift: drift,
        z_nodes,
        xi_nodes,
        precision: f64::label(),
    })
}

/// Scan families matching the figures: Gaussian-limit parameterization
/// F_U(-tau + pi^{1/4}/sqrt(2) x sqrt(tau); tau, 0) and Baik-Rains
/// parameterization F_U(tau^{1/3} x; tau, 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanKind {
    Gaussian,
    BaikRains,
}

impl ScanKind {
    fn arg(self, tau: f64, x: f64) -> f64 {
        match self {
            ScanKind::Gaussian => {
                -tau + std::f64::consts::PI.powf(0.25) / std::f64::consts::SQRT_2 * x * tau.sqrt()
            }
            ScanKind::BaikRains => tau.powf(1.0 / 3.0) * x,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ScanKind::Gaussian => "gaussian",
            ScanKind::BaikRains => "baikrains",
        }
    }
}

/// One table per tau: F_U along the scan parameterization on the x-grid.
pub fn limit_scans(
    kind: ScanKind,
    tau_list: &[f64],
    grid: &[f64],
    quad: &QuadratureSpec,
) -> Result<Vec<(f64, DistTable)>> {
    let mut out = Vec::with_capacity(tau_list.len());
    for &tau in tau_list {
        let pts: Vec<(f64, f64)> = grid.iter().map(|&x| (kind.arg(tau, x), 0.0)).collect();
        let evals = eval_batch(LimitLaw::Fu, tau, &pts, quad)?;
        let mut meta = BTreeMap::new();
        meta.insert("kind".into(), kind.name().into());
        meta.insert("tau".into(), format!("{tau}"));
        meta.insert("gamma".into(), "0".into());
        meta.insert("radius".into(), format!("{}", quad.radius));
        meta.insert("z_nodes".into(), format!("{}", quad.nodes));
        let table = DistTable::new(
            grid.to_vec(),
            evals.iter().map(|e| e.value).collect(),
            evals.iter().map(|e| e.err()).collect(),
            meta,
            ["x", "value", "err"],
        )?;
        out.push((tau, table));
    }
    Ok(out)
}

/// Sup-distance of the Gaussian-parameterized scan to the standard normal
/// CDF over the grid; the soft convergence diagnostic of the large-tau limit.
pub fn gaussian_scan_distance(tau: f64, grid: &[f64], quad: &QuadratureSpec) -> Result<f64> {
    let scans = limit_scans(ScanKind::Gaussian, &[tau], grid, quad)?;
    let (_, table) = &scans[0];
    let mut sup: f64 = 0.0;
    for (x, v) in grid.iter().zip(&table.values) {
        let phi = 0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2);
        sup = sup.max((v - phi).abs());
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> QuadratureSpec {
        default_quad()
    }

    #[test]
    fn principal_node_at_real_half() {
        let z = CF::new(0.5, 0.0);
        let set = s_nodes(z, 1.0, NODE_WEIGHT_TOL).unwrap();
        let expected = -(2.0 * std::f64::consts::LN_2).sqrt();
        assert!((set.left[0].re - expected).abs() < 1e-14);
        assert!(set.left[0].im.abs() < 1e-14);
        for xi in &set.left {
            assert!(xi.re < 0.0, "left node with Re >= 0: {xi:?}");
        }
    }

    #[test]
    fn node_residuals_at_complex_z() {
        let z = CF::new(0.0, std::f64::consts::FRAC_PI_4).exp().scale(0.3);
        let set = s_nodes(z, 1.0, NODE_WEIGHT_TOL).unwrap();
        assert!(set.len() >= 5);
        for &xi in &set.left {
            let res = ((xi * xi).scale(-0.5).exp() - z).abs();
            assert!(res <= XI_RESIDUAL_ATOL, "residual {res:.3e}");
        }
    }

    #[test]
    fn node_count_scales_like_m_squared_over_four_pi() {
        // tol chosen so the asymptotic weight rule cuts at |xi| = M = 8.
        let m = 8.0f64;
        let tol = (-std::f64::consts::SQRT_2 / 6.0 * m * m * m).exp();
        let set = s_nodes(CF::new(0.5, 0.0), 1.0, tol).unwrap();
        let predicted = 2.0 * m * m / (4.0 * std::f64::consts::PI);
        let got = set.len() as f64;
        assert!(
            (got - predicted).abs() <= 2.0,
            "count {got} vs predicted {predicted:.2}"
        );
        assert!((set.truncation - m).abs() < 1.5);
    }

    #[test]
    fn effective_tol_widens_only_for_negative_x() {
        assert_eq!(effective_node_tol(1.0, 0.0, 1e-16), 1e-16);
        assert_eq!(effective_node_tol(1.0, 3.0, 1e-16), 1e-16);
        let widened = effective_node_tol(1.0, -12.0, 1e-16);
        assert!(widened < 1e-30, "got {widened:.3e}");
        // The widened rule keeps at least as many nodes.
        let base = s_nodes(CF::new(0.5, 0.0), 1.0, 1e-16).unwrap();
        let wide = s_nodes(CF::new(0.5, 0.0), 1.0, widened).unwrap();
        assert!(wide.len() > base.len());
    }

    #[test]
    fn phi_assembles_its_three_terms() {
        let xi = CF::new(-2.0, 0.0);
        let phi = phi_z(xi, 0.0, 1.0).unwrap();
        let (tail, _) = phi_tail_integral(xi).unwrap();
        let manual = CF::real(8.0 / 3.0) - tail.scale((2.0 / std::f64::consts::PI).sqrt());
        assert!((phi - manual).abs() < 1e-13);
    }

    #[test]
    fn phi_is_linear_in_x() {
        let xi = CF::new(-1.3, 0.8);
        let a = phi_z(xi, 1.7, 0.9).unwrap();
        let b = phi_z(xi, 0.4, 0.9).unwrap();
        let diff = a - b - xi.scale(1.3);
        assert!(diff.abs() < 1e-12, "gap {:.3e}", diff.abs());
    }

    #[test]
    fn phi_reflects_under_conjugation() {
        let xi = CF::new(-1.1, 0.6);
        let a = phi_z(xi, 0.7, 1.4).unwrap();
        let b = phi_z(xi.conj(), 0.7, 1.4).unwrap().conj();
        assert!((a - b).abs() < 1e-11, "gap {:.3e}", (a - b).abs());
    }

    #[test]
    fn single_node_kernel_matches_hand_sum() {
        // tol = 0.5 keeps only the anchored n = 0 node at z = 0.5.
        let z = CF::new(0.5, 0.0);
        let nodes = s_nodes(z, 1.0, 0.5).unwrap();
        assert_eq!(nodes.len(), 1);
        let sp = ScalingParams::new(1.0, 0.7, 0.3).unwrap();
        let kernel = limit_kernel(&nodes, &sp).unwrap();
        let xi = nodes.left[0];
        let phi = phi_z(xi, sp.x, sp.tau).unwrap();
        let hand = (phi + phi).exp() / (xi * xi * (xi + xi) * (xi + xi));
        assert!((kernel.k.at(0, 0) - hand).abs() < 1e-13 * hand.abs());
        let hand_dx = hand * (xi + xi);
        assert!((kernel.dk_dx.at(0, 0) - hand_dx).abs() < 1e-13 * hand_dx.abs());
    }

    #[test]
    fn determinant_stable_under_node_widening() {
        let z = CF::new(0.5, 0.0);
        let sp = ScalingParams::new(1.0, 0.0, 0.0).unwrap();
        let base = s_nodes(z, sp.tau, NODE_WEIGHT_TOL).unwrap();
        let wide = s_nodes(z, sp.tau, 1e-26).unwrap();
        assert!(wide.len() > base.len());
        let d1 = limit_fredholm_det(&limit_kernel(&base, &sp).unwrap()).unwrap();
        let d2 = limit_fredholm_det(&limit_kernel(&wide, &sp).unwrap()).unwrap();
        assert!((d1 - d2).abs() < 1e-10, "drift {:.3e}", (d1 - d2).abs());
    }

    #[test]
    fn determinant_periodic_and_even_in_gamma() {
        let z = CF::new(0.1, 0.45);
        let nodes = s_nodes(z, 1.0, NODE_WEIGHT_TOL).unwrap();
        let det_at = |gamma: f64| {
            let sp = ScalingParams::new(1.0, gamma, 0.2).unwrap();
            limit_fredholm_det(&limit_kernel(&nodes, &sp).unwrap()).unwrap()
        };
        let d0 = det_at(0.3);
        let d1 = det_at(1.3);
        let d2 = det_at(-0.3);
        assert!((d0 - d1).abs() <= 1e-8, "period gap {:.3e}", (d0 - d1).abs());
        assert!((d0 - d2).abs() <= 1e-8, "parity gap {:.3e}", (d0 - d2).abs());
    }

    #[test]
    fn f2_reaches_one_in_the_upper_tail() {
        let sp = ScalingParams::new(1.0, 0.0, 12.0).unwrap();
        let e = f2_limit(&sp, &quad()).unwrap();
        assert!((e.value - 1.0).abs() < 1e-6, "F2(12) = {}", e.value);
    }

    #[test]
    fn ladder_probe_temp() {
        println!();
        let x = -6.0;
        let tol = effective_node_tol(1.0, x, NODE_WEIGHT_TOL);
        println!("x={x}: node_tol={tol:.3e}");
        let m = 256usize;
        let caches = build_caches::<Dd>(m, 0.5, 1.0, tol).unwrap();
        for &j in &[1usize, 19, 64, 100, 127] {
            let a = z_integrand(&caches[j], x, 1.0, 0.0).unwrap();
            let b = z_integrand(&caches[m - j], x, 1.0, 0.0).unwrap();
            let gap = (a.f2 - b.f2.conj()).abs().to_f64();
            let na = caches[j].xi.len();
            let nb = caches[m - j].xi.len();
            println!(
                "  j={j}: |f2|={:.3e} conj gap={:.3e} nodes {na}/{nb} a1 gap={:.3e} tail gap={:.3e} twob gap={:.3e}",
                a.f2.abs().to_f64(),
                gap,
                (caches[j].a1 - caches[m - j].a1.conj()).abs().to_f64(),
                (caches[j].tail[0] - caches[m - j].tail[0].conj()).abs().to_f64(),
                (caches[j].two_b - caches[m - j].two_b.conj()).abs().to_f64(),
            );
        }
        for &jr in &[0usize, m / 2] {
            let t = z_integrand(&caches[jr], x, 1.0, 0.0).unwrap();
            println!(
                "  real-axis j={jr}: f2 = {:+.6e} {:+.6e} i",
                t.f2.re.to_f64(),
                t.f2.im.to_f64()
            );
        }
    }

    #[test]
    fn f2_is_monotone_in_x() {
        let xs: Vec<f64> = (0..13).map(|i| -6.0 + i as f64).collect();
        let pts: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 0.0)).collect();
        let evals = eval_batch(LimitLaw::F2, 1.0, &pts, &quad()).unwrap();
        for w in evals.windows(2) {
            assert!(
                w[1].value + 1e-9 >= w[0].value,
                "F2 not monotone: {} -> {}",
                w[0].value,
                w[1].value
            );
        }
    }

    #[test]
    fn f2_two_resolutions_agree() {
        let sp = ScalingParams::new(1.0, 0.0, 0.0).unwrap();
        let a = f2_limit(&sp, &QuadratureSpec::new(0.5, 64).unwrap()).unwrap();
        let b = f2_limit(&sp, &QuadratureSpec::new(0.45, 96).unwrap()).unwrap();
        assert!(
            (a.value - b.value).abs() <= 1e-8,
            "gap {:.3e}",
            (a.value - b.value).abs()
        );
    }

    #[test]
    fn fu_is_periodic_and_even_in_gamma() {
        let pts = [(0.0, 0.3), (0.0, 1.3), (0.0, -0.3)];
        let evals = fu_batch(1.0, &pts, &quad()).unwrap();
        assert!(
            (evals[0].value - evals[1].value).abs() <= 1e-6,
            "period gap {:.3e}",
            (evals[0].value - evals[1].value).abs()
        );
        assert!(
            (evals[0].value - evals[2].value).abs() <= 1e-6,
            "parity gap {:.3e}",
            (evals[0].value - evals[2].value).abs()
        );
    }

    #[test]
    fn fu_upper_tail_reaches_one() {
        let sp = ScalingParams::new(1.0, 0.0, 8.0).unwrap();
        let e = fu_limit(&sp, &quad()).unwrap();
        assert!((e.value - 1.0).abs() < 1e-5, "F_U(8) = {}", e.value);
    }

    #[test]
    fn fu_deep_left_tail_escalates_and_vanishes() {
        let sp = ScalingParams::new(1.0, 0.0, -12.0).unwrap();
        let e = fu_limit(&sp, &quad()).unwrap();
        assert_eq!(e.precision, "dd");
        assert!(e.value < 1e-5, "F_U(-12) = {:.3e}", e.value);
        assert!(e.noise_floor < 1e-8, "floor {:.3e}", e.noise_floor);
    }

    #[test]
    fn analytic_dx_matches_finite_difference() {
        let z = CF::new(0.4, 0.2);
        let sp = ScalingParams::new(1.2, 0.4, 0.7).unwrap();
        let gap = integrand_dx_gap(z, &sp, 1e-4).unwrap();
        assert!(gap <= 1e-6, "gap {gap:.3e}");
    }

    #[test]
    fn fb_is_even_in_gamma_and_normalized() {
        let q = quad();
        let a = fb_bernoulli(&ScalingParams::new(1.0, 0.7, 0.5).unwrap(), &q, FB_YNODES_DEFAULT)
            .unwrap();
        let b = fb_bernoulli(&ScalingParams::new(1.0, -0.7, 0.5).unwrap(), &q, FB_YNODES_DEFAULT)
            .unwrap();
        assert!(
            (a.value - b.value).abs() <= 1e-6,
            "gamma parity gap {:.3e}",
            (a.value - b.value).abs()
        );
        let top = fb_bernoulli(&ScalingParams::new(1.0, 0.0, 12.0).unwrap(), &q, FB_YNODES_DEFAULT)
            .unwrap();
        assert!((top.value - 1.0).abs() < 1e-5, "F_B(12) = {}", top.value);
    }

    #[test]
    fn fb_rejects_too_few_ynodes() {
        let sp = ScalingParams::new(1.0, 0.0, 0.0).unwrap();
        assert!(matches!(
            fb_bernoulli(&sp, &quad(), 8),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn gaussian_scan_approaches_normal_at_large_tau() {
        let grid: Vec<f64> = (-6..=6).map(|i| i as f64 * 0.5).collect();
        let d4 = gaussian_scan_distance(4.0, &grid, &quad()).unwrap();
        assert!(d4 <= 0.05, "sup distance {d4:.4}");
    }

    #[test]
    fn scan_tables_are_monotone_and_well_formed() {
        let grid: Vec<f64> = (-3..=3).map(|i| i as f64).collect();
        let scans = limit_scans(ScanKind::BaikRains, &[1.0], &grid, &quad()).unwrap();
        let (tau, table) = &scans[0];
        assert_eq!(*tau, 1.0);
        assert_eq!(table.len(), grid.len());
        for w in table.values.windows(2) {
            assert!(w[1] + 1e-9 >= w[0], "scan not monotone");
        }
        assert_eq!(table.meta["kind"], "baikrains");
    }

    #[test]
    fn simpson_integrates_cubics_exactly() {
        let ys: Vec<f64> = (0..=4).map(|i| {
            let x = i as f64 * 0.25;
            x * x * x - 2.0 * x + 1.0
        })
        .collect();
        let exact = {
            let f = |x: f64| x * x * x * x / 4.0 - x * x + x;
            f(1.0) - f(0.0)
        };
        assert!((simpson(0.25, &ys) - exact).abs() < 1e-15);
    }

    #[test]
    fn scaling_params_reject_bad_tau() {
        assert!(ScalingParams::new(0.0, 0.0, 0.0).is_err());
        assert!(ScalingParams::new(-1.0, 0.0, 0.0).is_err());
        assert!(ScalingParams::new(1.0, f64::NAN, 0.0).is_err());
    }
}
