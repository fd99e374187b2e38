//! Interior symmetric socialization equilibria.
//!
//! In the one-type market the marginal network return is strictly
//! decreasing in effort, so the first-order condition has a unique root
//! whenever the cost lies below its `s -> 0` limit. Bisection on a doubling
//! bracket finds it.
//!
//! With two education types the first-order conditions form a 2-D system
//! with, typically, zero or two interior roots. Nothing guarantees
//! uniqueness, so the solver combines damped Gauss-Seidel from a grid of
//! starts with a sign-change scan of both residuals, polishes every
//! candidate with Newton's method and reports all distinct roots.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numdiff;
use crate::params::{ModelParams, Profile};
use crate::rates::{expected_utility, Agent, RateOptions};
use crate::scalar::{lit, one_minus_exp_neg, to_f64, Scalar};

/// Default residual tolerance of the one-type solver.
pub fn default_tol_homogeneous<T: Scalar>() -> T {
    lit::<T>(1e-10).max(T::epsilon() * lit(0.1))
}

/// Default residual tolerance of the two-type solver.
pub fn default_tol_heterogeneous<T: Scalar>() -> T {
    lit::<T>(1e-9).max(T::epsilon() * lit(0.1))
}

fn positive<T: Scalar>(x: T, what: &'static str) -> Result<()> {
    if x > T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            domain: "finite positive effort",
            value: to_f64(x),
        })
    }
}

// ---------------------------------------------------------------------------
// One education type
// ---------------------------------------------------------------------------

/// Cost bound below which an interior equilibrium exists:
/// `V a d (1-a) (1-d)`.
pub fn existence_threshold_homogeneous<T: Scalar>(params: &ModelParams<T>) -> T {
    let one = T::one();
    let (a, d) = (params.arrival, params.divorce);
    params.marriage_value * a * d * (one - a) * (one - d)
}

/// Marginal network return of socialization at the symmetric profile `s`.
pub fn foc_homogeneous_lhs<T: Scalar>(s: T, params: &ModelParams<T>) -> Result<T> {
    positive(s, "s")?;
    let one = T::one();
    let (a, d) = (params.arrival, params.divorce);
    let u = one_minus_exp_neg(s * d);
    Ok(params.marriage_value
        * (one - a)
        * a
        * (one - d)
        * (u / s)
        * (-(a * (one - d) * u / d)).exp())
}

/// Outcome of the one-type solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousEquilibrium<T> {
    /// Equilibrium effort; 0 when only the zero equilibrium exists.
    pub s_star: T,
    /// `|LHS(s*) - c|`.
    pub residual: T,
    pub exists: bool,
    /// Cost bound `V a d (1-a) (1-d)`.
    pub threshold: T,
    pub iterations: usize,
    /// Final bisection bracket.
    pub bracket: (T, T),
}

/// Solves the one-type first-order condition.
pub fn solve_homogeneous<T: Scalar>(params: &ModelParams<T>, tol: T) -> Result<HomogeneousEquilibrium<T>> {
    params.validate()?;
    if !(tol > T::zero()) {
        return Err(Error::InvalidParameter {
            field: "tol",
            value: to_f64(tol),
            reason: "must be > 0",
        });
    }
    let c = params.cost;
    let threshold = existence_threshold_homogeneous(params);
    if c >= threshold {
        return Ok(HomogeneousEquilibrium {
            s_star: T::zero(),
            residual: T::zero(),
            exists: false,
            threshold,
            iterations: 0,
            bracket: (T::zero(), T::zero()),
        });
    }

    let two = lit::<T>(2.0);
    let mut lo = lit::<T>(1e-12);
    let mut hi = T::one();
    let mut iterations = 0;
    while foc_homogeneous_lhs(hi, params)? >= c {
        lo = hi;
        hi = hi * two;
        iterations += 1;
        if iterations > 2000 || !hi.is_finite() {
            return Err(Error::InvariantViolation(format!(
                "no upper bracket for the one-type condition below s = {}",
                to_f64(hi)
            )));
        }
    }

    let width = lit::<T>(1e-12);
    let mut s;
    loop {
        iterations += 1;
        s = (lo + hi) / two;
        if s <= lo || s >= hi {
            break;
        }
        let f = foc_homogeneous_lhs(s, params)? - c;
        if f.abs() < tol {
            break;
        }
        if f > T::zero() {
            lo = s;
        } else {
            hi = s;
        }
        if hi - lo < width {
            s = (lo + hi) / two;
            break;
        }
    }
    // A tolerance tighter than the bracket allows returns the bracket limit.
    let residual = (foc_homogeneous_lhs(s, params)? - c).abs();
    Ok(HomogeneousEquilibrium {
        s_star: s,
        residual,
        exists: true,
        threshold,
        iterations,
        bracket: (lo, hi),
    })
}

/// Arrival rate at which `ds*/da` changes sign, given the divorce rate and
/// equilibrium effort.
pub fn a_bar<T: Scalar>(divorce: T, s_star: T) -> T {
    let one = T::one();
    let two = lit::<T>(2.0);
    let x = (one - divorce) * one_minus_exp_neg(s_star * divorce) / divorce;
    if x == T::zero() {
        return lit(0.5);
    }
    // Rationalized (2 + x - sqrt(4 + x^2)) / (2x), free of cancellation.
    two / (two + x + (lit::<T>(4.0) + x * x).sqrt())
}

/// `ds*/da` by implicit differentiation of the one-type condition.
pub fn ds_da_implicit<T: Scalar>(s_star: T, params: &ModelParams<T>) -> Result<T> {
    positive(s_star, "s_star")?;
    let one = T::one();
    let two = lit::<T>(2.0);
    let (a, d, s) = (params.arrival, params.divorce, s_star);
    let u = one_minus_exp_neg(s * d);
    let e = (-(s * d)).exp();
    let numerator = u * (one - two * a - a * (one - a) * (one - d) * u / d);
    let denominator = a * (one - a) * ((a * (one - d) * e + one / s) * u - d * e);
    if !(denominator > T::zero()) {
        return Err(Error::InvariantViolation(format!(
            "implicit-derivative denominator {} is not positive at s = {}",
            to_f64(denominator),
            to_f64(s)
        )));
    }
    Ok(numerator / denominator)
}

// ---------------------------------------------------------------------------
// Two education types
// ---------------------------------------------------------------------------

/// Marginal network return of a high type at the symmetric profile.
pub fn foc_high_lhs<T: Scalar>(s_h: T, s_l: T, params: &ModelParams<T>) -> Result<T> {
    positive(s_h, "s_h")?;
    positive(s_l, "s_l")?;
    Ok(high_return(s_h, s_l, params))
}

fn high_return<T: Scalar>(s_h: T, s_l: T, params: &ModelParams<T>) -> T {
    let one = T::one();
    let (a, d, h) = (params.arrival, params.divorce, params.high_share);
    let y = h * s_h + (one - h) * s_l;
    let u = one_minus_exp_neg(d * s_h);
    (one - a) * a * (one - d) * h * params.high_gain * u * (-(a * (one - d) * h * s_h * u / (d * y))).exp()
        / y
}

/// Marginal network return of a low type at the symmetric profile, in the
/// printed closed form with the deviator's effort set to `s_l`.
///
/// Exponentials of order `a / d` appear in intermediate terms, so this form
/// overflows when `d` is tiny and `s_l` large. The solvers use the
/// equivalent factored form [`marginal_return_low`].
pub fn foc_low_lhs<T: Scalar>(s_l: T, s_h: T, params: &ModelParams<T>) -> Result<T> {
    positive(s_l, "s_l")?;
    positive(s_h, "s_h")?;
    let one = T::one();
    let (a, d, h, yg) = (params.arrival, params.divorce, params.high_share, params.high_gain);
    let s_i = s_l;
    let y = h * (s_h - s_l) + s_l;
    // exp(d (h-1) s_l^2 / y) - 1
    let q_m1 = (d * (h - one) * s_l * s_l / y).exp_m1();
    let t1 = a * (d - one) * s_l * q_m1 / s_l;
    let ex = -(t1 + a * (one - d) * h * s_i * (one - (-(d * s_h)).exp()) / y + d * d * s_h) / d;
    let pre = -(a - one) * a * (d - one) / (s_l * y) * ex.exp();
    let g = a * (d - one) * s_l * q_m1 / (d * s_l);
    let bracket = -h * s_l * (yg - one) * (g + d * s_h).exp() + h * s_l * (yg - one) * g.exp()
        + y * (d * ((h - one) * s_l * s_l / y + s_h)).exp()
        - (d * s_h).exp() * (h * s_h + s_l)
        + h * s_l;
    Ok(pre * bracket)
}

/// Low-type marginal return in factored form,
/// `d (1-a) E1 [(Y-1) k1 + E2 (k1 + k2)]`, where `k1` and `k2` are the
/// per-unit Psi exponents towards high and low partners.
pub fn marginal_return_low<T: Scalar>(s_l: T, s_h: T, params: &ModelParams<T>) -> Result<T> {
    positive(s_l, "s_l")?;
    positive(s_h, "s_h")?;
    Ok(low_return(s_l, s_h, params))
}

fn low_return<T: Scalar>(s_l: T, s_h: T, params: &ModelParams<T>) -> T {
    let one = T::one();
    let (a, d, h, yg) = (params.arrival, params.divorce, params.high_share, params.high_gain);
    let y = h * s_h + (one - h) * s_l;
    let base = a * (one - d) / d;
    let k1 = base * h * one_minus_exp_neg(d * s_h) / y;
    let k2 = base * one_minus_exp_neg(d * (one - h) * s_l * s_l / y) / s_l;
    let e1 = (-(k1 * s_l)).exp();
    let e2 = (-(k2 * s_l)).exp();
    d * (one - a) * e1 * ((yg - one) * k1 + e2 * (k1 + k2))
}

/// Relative agreement demanded between the printed low-type condition
/// and the numerical derivative of the low-type expected utility.
pub const TRANSCRIPTION_TOLERANCE: f64 = 1e-6;

/// Numerical `d EU_l / d s_i + c` at `s_i = s_l`, from the deviation-form
/// rates. Richardson-refined central differences.
pub fn numerical_marginal_return_low<T: Scalar>(s_l: T, s_h: T, params: &ModelParams<T>) -> Result<T> {
    positive(s_l, "s_l")?;
    positive(s_h, "s_h")?;
    let profile = Profile::new(s_h, s_l);
    let opts = RateOptions::default();
    let step = s_l * lit(1e-3);
    let slope = numdiff::richardson(
        |s_i| expected_utility(Agent::Low, s_i, &profile, params, opts),
        s_l,
        step,
    )?;
    Ok(slope + params.cost)
}

/// [`foc_low_lhs`] cross-checked against
/// [`numerical_marginal_return_low`]. Fails with a transcription
/// diagnostic naming both values when they disagree by more than
/// `rel_tol`.
pub fn foc_low_lhs_checked<T: Scalar>(s_l: T, s_h: T, params: &ModelParams<T>, rel_tol: f64) -> Result<T> {
    let printed = foc_low_lhs(s_l, s_h, params)?;
    let numerical = numerical_marginal_return_low(s_l, s_h, params)?;
    let (p, n) = (to_f64(printed), to_f64(numerical));
    let relative = (p - n).abs() / n.abs().max(f64::MIN_POSITIVE);
    if !(relative <= rel_tol) {
        return Err(Error::TranscriptionMismatch {
            s_high: to_f64(s_h),
            s_low: to_f64(s_l),
            printed: p,
            numerical: n,
            relative,
        });
    }
    Ok(printed)
}

/// Cost bound `c_l(s_h)` below which low types invest when high types
/// invest `s_h`: `a (1-a) (1-d) Y (1 - exp(-d s_h)) / s_h`. At `s_h = 0`
/// the limit `a (1-a) (1-d) Y d` is returned.
pub fn existence_threshold_low<T: Scalar>(s_h: T, params: &ModelParams<T>) -> T {
    let one = T::one();
    let (a, d) = (params.arrival, params.divorce);
    let scale = a * (one - a) * (one - d) * params.high_gain;
    if s_h > T::zero() {
        scale * one_minus_exp_neg(d * s_h) / s_h
    } else {
        scale * d
    }
}

/// Numerical estimate of the high-type cost bound at low-type effort
/// `s_l`: the maximum over `s_h` of [`foc_high_lhs`]. Returns the maximum
/// and its location.
pub fn existence_threshold_high<T: Scalar>(s_l: T, params: &ModelParams<T>) -> Result<(T, T)> {
    positive(s_l, "s_l")?;
    let f = |x: T| high_return(x, s_l, params);
    let (lo, hi, points) = (lit::<T>(1e-6).ln(), lit::<T>(1e4).ln(), 241);
    let step = (hi - lo) / lit(points as f64 - 1.0);
    let at = |i: usize| (lo + step * lit(i as f64)).exp();
    let mut best = 0;
    let mut best_val = f(at(0));
    for i in 1..points {
        let v = f(at(i));
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    // Golden-section refinement in log space around the best grid point.
    let mut left = lo + step * lit(best.saturating_sub(1) as f64);
    let mut right = lo + step * lit((best + 1).min(points - 1) as f64);
    let ratio = lit::<T>(0.5) * (lit::<T>(5.0).sqrt() - T::one());
    let g = |x: T| f(x.exp());
    let mut x1 = right - ratio * (right - left);
    let mut x2 = left + ratio * (right - left);
    let (mut f1, mut f2) = (g(x1), g(x2));
    for _ in 0..100 {
        if f1 >= f2 {
            right = x2;
            x2 = x1;
            f2 = f1;
            x1 = right - ratio * (right - left);
            f1 = g(x1);
        } else {
            left = x1;
            x1 = x2;
            f1 = f2;
            x2 = left + ratio * (right - left);
            f2 = g(x2);
        }
    }
    let x = ((left + right) / lit(2.0)).exp();
    let v = f(x);
    Ok(if v >= best_val { (v, x) } else { (best_val, at(best)) })
}

/// Cost bound above which no interior equilibrium of the two-type market
/// can exist: `a (1-a) (1-d) Y d`. Both marginal returns lie strictly
/// below it at every positive profile.
pub fn global_cost_bound<T: Scalar>(params: &ModelParams<T>) -> T {
    let one = T::one();
    let (a, d) = (params.arrival, params.divorce);
    a * (one - a) * (one - d) * params.high_gain * d
}

/// How the two-type verdict was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeterogeneousStatus {
    /// At least one interior root was found.
    Interior,
    /// `c >= a (1-a) (1-d) Y d`: no interior root is possible.
    AboveCostBound,
    /// Below the global bound, but neither the starts nor the residual
    /// scan produced a root.
    NoRootFound,
}

impl HeterogeneousStatus {
    pub fn tag(self) -> &'static str {
        match self {
            HeterogeneousStatus::Interior => "interior",
            HeterogeneousStatus::AboveCostBound => "above-cost-bound",
            HeterogeneousStatus::NoRootFound => "no-root-found",
        }
    }
}

/// Outcome of the two-type solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeterogeneousEquilibrium<T> {
    /// Primary root: the one with the largest high-type effort.
    pub s_h_star: T,
    pub s_l_star: T,
    pub residual_h: T,
    pub residual_l: T,
    pub exists: bool,
    pub status: HeterogeneousStatus,
    /// Global cost bound `a (1-a) (1-d) Y d`.
    pub threshold: T,
    /// `c_l(s_h*)`, 0 without a root.
    pub threshold_low: T,
    /// Numerical `c_h(s_l*)`, 0 without a root.
    pub threshold_high: T,
    /// Gauss-Seidel and Newton iterations over all starts.
    pub iterations: usize,
    /// All distinct roots, by decreasing high-type effort.
    pub roots: Vec<Profile<T>>,
}

impl<T: Scalar> HeterogeneousEquilibrium<T> {
    pub fn profile(&self) -> Profile<T> {
        Profile::new(self.s_h_star, self.s_l_star)
    }
}

/// Knobs of the two-type solver.
#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneousOptions<T> {
    /// Residual tolerance per equation.
    pub tol: T,
    /// Gauss-Seidel damping factor.
    pub damping: T,
    pub max_iterations: usize,
    /// Starting values; the start grid is their Cartesian square.
    pub starts: Vec<T>,
    /// Points per axis of the log-spaced residual scan; 0 disables it.
    pub scan_points: usize,
}

impl<T: Scalar> Default for HeterogeneousOptions<T> {
    fn default() -> Self {
        HeterogeneousOptions {
            tol: default_tol_heterogeneous(),
            damping: lit(0.5),
            max_iterations: 10_000,
            starts: [0.1, 0.5, 1.0, 2.0, 5.0].into_iter().map(lit).collect(),
            scan_points: 160,
        }
    }
}

struct System<'a, T> {
    params: &'a ModelParams<T>,
}

impl<T: Scalar> System<'_, T> {
    fn residuals(&self, s: [T; 2]) -> [T; 2] {
        let c = self.params.cost;
        [
            high_return(s[0], s[1], self.params) - c,
            low_return(s[1], s[0], self.params) - c,
        ]
    }

    fn max_residual(&self, s: [T; 2]) -> T {
        let r = self.residuals(s);
        r[0].abs().max(r[1].abs())
    }
}

/// Solves the two-type first-order conditions.
pub fn solve_heterogeneous<T: Scalar>(
    params: &ModelParams<T>,
    opts: &HeterogeneousOptions<T>,
) -> Result<HeterogeneousEquilibrium<T>> {
    params.validate()?;
    let h = params.high_share;
    if !(h > T::zero() && h < T::one()) {
        return Err(Error::InvalidParameter {
            field: "h",
            value: to_f64(h),
            reason: "the two-type solver needs h strictly inside (0, 1)",
        });
    }
    if !(opts.tol > T::zero()) {
        return Err(Error::InvalidParameter {
            field: "tol",
            value: to_f64(opts.tol),
            reason: "must be > 0",
        });
    }
    let bound = global_cost_bound(params);
    let none = |status, iterations| HeterogeneousEquilibrium {
        s_h_star: T::zero(),
        s_l_star: T::zero(),
        residual_h: T::zero(),
        residual_l: T::zero(),
        exists: false,
        status,
        threshold: bound,
        threshold_low: T::zero(),
        threshold_high: T::zero(),
        iterations,
        roots: Vec::new(),
    };
    if params.cost >= bound {
        return Ok(none(HeterogeneousStatus::AboveCostBound, 0));
    }

    let sys = System { params };
    let mut roots: Vec<[T; 2]> = Vec::new();
    let mut iterations = 0;
    // Gauss-Seidel fixed points that Newton's method could not polish.
    let mut unpolished = 0;

    for &sh0 in &opts.starts {
        for &sl0 in &opts.starts {
            let (found, its) = gauss_seidel(&sys, [sh0, sl0], opts);
            iterations += its;
            if let Some((seed, fixed_point)) = found {
                let (polished, its) = newton(&sys, seed, opts.tol);
                iterations += its;
                match polished {
                    Some(r) => insert_root(&mut roots, r),
                    None if fixed_point => unpolished += 1,
                    None => {}
                }
            }
        }
    }

    // Scan cells only bracket both zero curves, which need not cross there.
    for seed in scan_seeds(&sys, opts.scan_points) {
        let (polished, its) = newton(&sys, seed, opts.tol);
        iterations += its;
        if let Some(r) = polished {
            insert_root(&mut roots, r);
        }
    }

    if roots.is_empty() {
        if unpolished == 0 {
            return Ok(none(HeterogeneousStatus::NoRootFound, iterations));
        }
        return Err(Error::SolverFailure(format!(
            "{unpolished} Gauss-Seidel fixed points below the cost bound {} but no root met \
             tolerance {} (a = {}, c = {})",
            to_f64(bound),
            to_f64(opts.tol),
            to_f64(params.arrival),
            to_f64(params.cost)
        )));
    }

    roots.sort_by(|x, y| y[0].partial_cmp(&x[0]).unwrap());
    let primary = roots[0];
    let residuals = sys.residuals(primary);
    let threshold_high = existence_threshold_high(primary[1], params)?.0;
    Ok(HeterogeneousEquilibrium {
        s_h_star: primary[0],
        s_l_star: primary[1],
        residual_h: residuals[0].abs(),
        residual_l: residuals[1].abs(),
        exists: true,
        status: HeterogeneousStatus::Interior,
        threshold: bound,
        threshold_low: existence_threshold_low(primary[0], params),
        threshold_high,
        iterations,
        roots: roots.into_iter().map(|r| Profile::new(r[0], r[1])).collect(),
    })
}

fn insert_root<T: Scalar>(roots: &mut Vec<[T; 2]>, r: [T; 2]) {
    let same = |q: &[T; 2]| {
        let rel = |x: T, y: T| (x - y).abs() / x.abs().max(y.abs());
        rel(q[0], r[0]).max(rel(q[1], r[1])) < lit(1e-6)
    };
    if !roots.iter().any(same) {
        roots.push(r);
    }
}

fn stop_rel<T: Scalar>() -> T {
    lit::<T>(1e-8).max(T::epsilon() * lit(16.0))
}

/// Damped alternation of 1-D solves. Returns the iterate once it stops
/// moving, flagged as a fixed point. On stagnation (a 1-D solve without a
/// root, divergence or the iteration cap) the last iterate is returned
/// unflagged if its residual has become small, and `None` otherwise.
fn gauss_seidel<T: Scalar>(
    sys: &System<'_, T>,
    start: [T; 2],
    opts: &HeterogeneousOptions<T>,
) -> (Option<([T; 2], bool)>, usize) {
    let c = sys.params.cost;
    let w = opts.damping;
    let keep = T::one() - w;
    let [mut sh, mut sl] = start;
    for it in 1..=opts.max_iterations {
        let Some(bh) = nearest_root(|x| high_return(x, sl, sys.params) - c, sh) else {
            return (fallback(sys, [sh, sl]), it);
        };
        let sh_new = keep * sh + w * bh;
        let Some(bl) = nearest_root(|x| low_return(x, sh_new, sys.params) - c, sl) else {
            return (fallback(sys, [sh_new, sl]), it);
        };
        let sl_new = keep * sl + w * bl;
        let moved = ((sh_new - sh) / sh).abs().max(((sl_new - sl) / sl).abs());
        sh = sh_new;
        sl = sl_new;
        if !(sh.is_finite() && sl.is_finite()) {
            return (None, it);
        }
        if moved < stop_rel() {
            return (Some(([sh, sl], true)), it);
        }
    }
    (fallback(sys, [sh, sl]), opts.max_iterations)
}

fn fallback<T: Scalar>(sys: &System<'_, T>, at: [T; 2]) -> Option<([T; 2], bool)> {
    let ok = at[0] > T::zero() && at[1] > T::zero() && at[0].is_finite() && at[1].is_finite();
    // Only hand over iterates that are already in a root's neighbourhood.
    if ok && sys.max_residual(at) < sys.params.cost * lit(0.1) {
        Some((at, false))
    } else {
        None
    }
}

/// Root of `f` closest to `x0` on a geometric scale: brackets are sought
/// outward from `x0` in both directions, then bisected.
fn nearest_root<T: Scalar, F: Fn(T) -> T>(f: F, x0: T) -> Option<T> {
    let f0 = f(x0);
    if f0 == T::zero() {
        return Some(x0);
    }
    let growth = lit::<T>(1.5);
    let floor = lit::<T>(1e-12);
    let ceiling = lit::<T>(1e12);
    let (mut up, mut f_up) = (x0, f0);
    let (mut down, mut f_down) = (x0, f0);
    for _ in 0..80 {
        if down > floor {
            let next = down / growth;
            let f_next = f(next);
            if sign_change(f_next, f_down) {
                return bisect(&f, next, down, f_next);
            }
            down = next;
            f_down = f_next;
        }
        if up < ceiling {
            let next = up * growth;
            let f_next = f(next);
            if sign_change(f_up, f_next) {
                return bisect(&f, up, next, f_up);
            }
            up = next;
            f_up = f_next;
        }
    }
    None
}

fn sign_change<T: Scalar>(a: T, b: T) -> bool {
    (a <= T::zero() && b >= T::zero()) || (a >= T::zero() && b <= T::zero())
}

fn bisect<T: Scalar, F: Fn(T) -> T>(f: &F, mut lo: T, mut hi: T, mut f_lo: T) -> Option<T> {
    if !f_lo.is_finite() {
        return None;
    }
    let half = lit::<T>(0.5);
    for _ in 0..300 {
        let mid = (lo + hi) * half;
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if !f_mid.is_finite() {
            return None;
        }
        if f_mid == T::zero() {
            return Some(mid);
        }
        if sign_change(f_lo, f_mid) {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    Some((lo + hi) * half)
}

/// Newton's method in log-efforts with a central-difference Jacobian and
/// backtracking. Iterates until the residual stops improving and accepts
/// the result if it meets `tol`.
fn newton<T: Scalar>(sys: &System<'_, T>, start: [T; 2], tol: T) -> (Option<[T; 2]>, usize) {
    let c = sys.params.cost;
    let scaled = |x: [T; 2]| {
        let r = sys.residuals([x[0].exp(), x[1].exp()]);
        [r[0] / c, r[1] / c]
    };
    let norm = |r: [T; 2]| r[0].abs().max(r[1].abs());
    let step = T::epsilon().cbrt();
    let floor = T::epsilon() * lit(4.0);
    let mut x = [start[0].ln(), start[1].ln()];
    let mut r = scaled(x);
    let mut its = 0;
    for _ in 0..100 {
        its += 1;
        let current = norm(r);
        if !current.is_finite() || current <= floor {
            break;
        }
        let mut jac = [[T::zero(); 2]; 2];
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] = xp[k] + step;
            xm[k] = xm[k] - step;
            let (rp, rm) = (scaled(xp), scaled(xm));
            for i in 0..2 {
                jac[i][k] = (rp[i] - rm[i]) / (step + step);
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == T::zero() || !det.is_finite() {
            break;
        }
        let mut delta = [
            -(jac[1][1] * r[0] - jac[0][1] * r[1]) / det,
            -(-jac[1][0] * r[0] + jac[0][0] * r[1]) / det,
        ];
        let cap = lit::<T>(2.0);
        let size = delta[0].abs().max(delta[1].abs());
        if size > cap {
            delta = [delta[0] * cap / size, delta[1] * cap / size];
        }
        let mut t = T::one();
        let mut accepted = false;
        while t > lit(1e-4) {
            let trial = [x[0] + t * delta[0], x[1] + t * delta[1]];
            let rt = scaled(trial);
            if norm(rt) < current {
                x = trial;
                r = rt;
                accepted = true;
                break;
            }
            t = t * lit(0.5);
        }
        if !accepted {
            break;
        }
    }
    let s = [x[0].exp(), x[1].exp()];
    let ok = s[0] > T::zero()
        && s[1] > T::zero()
        && s[0].is_finite()
        && s[1].is_finite()
        && sys.max_residual(s) <= tol;
    (if ok { Some(s) } else { None }, its)
}

/// Cells of a log-spaced grid where both residuals change sign across the
/// corners. Each such cell yields a Newton seed at its centre.
fn scan_seeds<T: Scalar>(sys: &System<'_, T>, points: usize) -> Vec<[T; 2]> {
    if points < 2 {
        return Vec::new();
    }
    let p = sys.params;
    let one = T::one();
    let (a, d, h, c) = (p.arrival, p.divorce, p.high_share, p.cost);
    // Both returns decay like 1/s: beyond these efforts they stay below c.
    let scale = a * (one - a) * (one - d) / c;
    let hi_h = scale * p.high_gain * lit(1.05);
    let hi_l = scale * (p.high_gain * h / (one - h) + one) * lit(1.05);
    let lo = lit::<T>(1e-5);
    let axis = |hi: T| -> Vec<T> {
        let (l, u) = (lo.ln(), hi.max(lit(1.0)).ln());
        (0..points)
            .map(|i| (l + (u - l) * lit::<T>(i as f64) / lit((points - 1) as f64)).exp())
            .collect()
    };
    let (gh, gl) = (axis(hi_h), axis(hi_l));
    let mut fh = vec![T::zero(); points * points];
    let mut fl = vec![T::zero(); points * points];
    for (i, &sh) in gh.iter().enumerate() {
        for (j, &sl) in gl.iter().enumerate() {
            let r = sys.residuals([sh, sl]);
            fh[i * points + j] = r[0];
            fl[i * points + j] = r[1];
        }
    }
    let changes = |f: &[T], i: usize, j: usize| {
        let v = [
            f[i * points + j],
            f[(i + 1) * points + j],
            f[i * points + j + 1],
            f[(i + 1) * points + j + 1],
        ];
        if v.iter().any(|x| !x.is_finite()) {
            return false;
        }
        v.iter().any(|x| *x > T::zero()) && v.iter().any(|x| *x <= T::zero())
    };
    let mut seeds = Vec::new();
    for i in 0..points - 1 {
        for j in 0..points - 1 {
            if changes(&fh, i, j) && changes(&fl, i, j) {
                seeds.push([(gh[i] * gh[i + 1]).sqrt(), (gl[j] * gl[j + 1]).sqrt()]);
            }
        }
    }
    seeds
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fig5(a: f64) -> ModelParams<f64> {
        ModelParams::default()
            .with_arrival(a)
            .with_cost(0.005)
            .with_divorce(0.015)
            .with_marriage_value(2.0)
    }

    fn fig8(a: f64) -> ModelParams<f64> {
        ModelParams::default()
            .with_arrival(a)
            .with_cost(0.003)
            .with_divorce(0.015)
            .with_high_share(0.8)
            .with_high_gain(2.0)
    }

    #[test]
    fn threshold_examples() {
        let p = ModelParams::default().with_arrival(0.5).with_divorce(0.015);
        assert_relative_eq!(existence_threshold_homogeneous(&p), 0.00369375, max_relative = 1e-14);
        let mirrored = p.with_arrival(0.3);
        let other = p.with_arrival(0.7);
        assert_relative_eq!(
            existence_threshold_homogeneous(&mirrored),
            existence_threshold_homogeneous(&other),
            max_relative = 1e-14
        );
        let mut zero = p;
        zero.arrival = 0.0;
        assert_eq!(existence_threshold_homogeneous(&zero), 0.0);
    }

    #[test]
    fn homogeneous_lhs() {
        let p = fig5(0.5);
        assert_relative_eq!(
            foc_homogeneous_lhs(1.0, &p).unwrap(),
            0.0044972860193144854,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            foc_homogeneous_lhs(1e-12, &p).unwrap(),
            existence_threshold_homogeneous(&p),
            max_relative = 1e-10
        );
        assert!(foc_homogeneous_lhs(0.0, &p).is_err());
        assert!(foc_homogeneous_lhs(-1.0, &p).is_err());
    }

    #[test]
    fn homogeneous_solution() {
        let eq = solve_homogeneous(&fig5(0.5), 1e-10).unwrap();
        assert!(eq.exists);
        assert!(eq.residual < 1e-10);
        assert_relative_eq!(eq.s_star, 0.7852519544491616, max_relative = 1e-7);
        // Independent residual check.
        let lhs = foc_homogeneous_lhs(eq.s_star, &fig5(0.5)).unwrap();
        assert!((lhs - 0.005).abs() < 1e-10);

        let p = ModelParams::default()
            .with_arrival(0.5)
            .with_divorce(0.015)
            .with_cost(0.004);
        let eq = solve_homogeneous(&p, 1e-10).unwrap();
        assert!(!eq.exists);
        assert_eq!(eq.s_star, 0.0);
    }

    #[test]
    fn homogeneous_in_single_precision() {
        let p = fig5(0.5).cast::<f32>();
        let eq = solve_homogeneous(&p, default_tol_homogeneous()).unwrap();
        assert!(eq.exists);
        assert!((eq.s_star as f64 - 0.7852519544491616).abs() < 1e-3);
    }

    #[test]
    fn a_bar_examples() {
        assert_relative_eq!(a_bar(0.015, 0.78), 0.40777076227782004, max_relative = 1e-13);
        assert_relative_eq!(a_bar(0.015, 1e-300), 0.5, max_relative = 1e-12);
        let x = (1.0 - 0.015) * (-(-0.78f64 * 0.015).exp_m1()) / 0.015;
        let printed = (2.0 + x - (4.0 + x * x).sqrt()) / (2.0 * x);
        assert_relative_eq!(a_bar(0.015, 0.78), printed, max_relative = 1e-13);
        let ab = a_bar(0.015, 0.78);
        assert!((1.0 - 2.0 * ab - ab * (1.0 - ab) * x).abs() < 1e-12);
    }

    #[test]
    fn implicit_derivative_oracle() {
        for (a, s, slope) in [
            (0.35, 0.845674523405365, 1.41123615833742),
            (0.45, 0.849016209262237, -0.959141807970257),
            (0.55, 0.695979924885973, -1.99778022634796),
            (0.65, 0.458587879330247, -2.74941145475488),
        ] {
            let eq = solve_homogeneous(&fig5(a), 1e-300).unwrap();
            assert_relative_eq!(eq.s_star, s, max_relative = 1e-10);
            assert_relative_eq!(ds_da_implicit(eq.s_star, &fig5(a)).unwrap(), slope, max_relative = 1e-9);
        }
    }

    #[test]
    fn high_foc_limits() {
        let p = fig8(0.5).with_high_share(1.0 - 1e-12);
        let hom = fig5(0.5).with_marriage_value(1.0);
        let v = foc_high_lhs(0.9, 0.9, &p).unwrap();
        assert_relative_eq!(v, 2.0 * foc_homogeneous_lhs(0.9, &hom).unwrap(), max_relative = 1e-9);
        let p = fig8(0.5);
        assert!(foc_high_lhs(1e-10, 1.0, &p).unwrap() < 1e-9);
        assert!(foc_high_lhs(1e7, 1.0, &p).unwrap() < 1e-7);
    }

    #[test]
    fn low_foc_limit_and_forms() {
        let p = fig8(0.5);
        let s_h = 1.0;
        let limit = 0.5 * 0.5 * 0.985 * 2.0 * (-0.015f64).exp() * (0.015f64.exp() - 1.0) / s_h;
        // The printed form cancels badly as s_l -> 0; the factored one does not.
        assert_relative_eq!(foc_low_lhs(1e-5, s_h, &p).unwrap(), limit, max_relative = 1e-4);
        assert_relative_eq!(marginal_return_low(1e-12, s_h, &p).unwrap(), limit, max_relative = 1e-9);
        assert_relative_eq!(limit, existence_threshold_low(s_h, &p), max_relative = 1e-12);
        for (sh, sl) in [(0.3, 1.4), (1.7, 1.77), (4.0, 0.2)] {
            let printed = foc_low_lhs(sl, sh, &p).unwrap();
            let factored = marginal_return_low(sl, sh, &p).unwrap();
            assert_relative_eq!(printed, factored, max_relative = 1e-11);
            foc_low_lhs_checked(sl, sh, &p, TRANSCRIPTION_TOLERANCE).unwrap();
        }
    }

    #[test]
    fn low_threshold_example() {
        let p = fig8(0.5);
        assert_relative_eq!(existence_threshold_low(1.0, &p), 0.007332369745491639, max_relative = 1e-13);
        assert_relative_eq!(existence_threshold_low(0.0, &p), global_cost_bound(&p), max_relative = 1e-15);
    }

    #[test]
    fn high_threshold_is_a_maximum() {
        let p = fig8(0.5);
        let (v, at) = existence_threshold_high(1.5, &p).unwrap();
        assert!(v < global_cost_bound(&p));
        for x in [at * 0.9, at * 1.1, at * 0.5, at * 2.0] {
            assert!(foc_high_lhs(x, 1.5, &p).unwrap() <= v);
        }
    }

    #[test]
    fn heterogeneous_benchmark() {
        let eq = solve_heterogeneous(&fig8(0.5), &HeterogeneousOptions::default()).unwrap();
        assert!(eq.exists);
        assert!(eq.residual_h <= 1e-9 && eq.residual_l <= 1e-9);
        assert_relative_eq!(eq.s_h_star, 1.703015, max_relative = 1e-5);
        assert_relative_eq!(eq.s_l_star, 1.773328, max_relative = 1e-5);
        assert!(eq.s_l_star > eq.s_h_star);
        assert_eq!(eq.roots.len(), 2);
        let lower = eq.roots[1];
        assert_relative_eq!(lower.high, 0.270239, max_relative = 1e-5);
        assert_relative_eq!(lower.low, 1.427744, max_relative = 1e-5);
    }

    #[test]
    fn heterogeneous_above_bound() {
        let p = fig8(0.5).with_cost(0.01);
        let eq = solve_heterogeneous(&p, &HeterogeneousOptions::default()).unwrap();
        assert!(!eq.exists);
        assert_eq!(eq.status, HeterogeneousStatus::AboveCostBound);
        assert_eq!(eq.s_h_star, 0.0);
    }

    #[test]
    fn heterogeneous_rejects_degenerate_share() {
        assert!(solve_heterogeneous(&fig8(0.5).with_high_share(1.0), &HeterogeneousOptions::default()).is_err());
    }
}
