//! Numerical kernels shared by the physics modules: adaptive Gauss-Kronrod
//! quadrature on finite and semi-infinite intervals, bisection root finding,
//! Richardson differentiation, tail-bounded series summation and an adaptive
//! Dormand-Prince integrator.
//!
//! Everything here is deterministic: the same inputs give bit-identical
//! outputs, since no work is reordered by timing or hashing.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::Serialize;

/// Values a quadrature rule can accumulate.
pub trait QuadValue:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn magnitude(self) -> f64;
    fn finite(self) -> bool;
}

impl QuadValue for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn finite(self) -> bool {
        self.is_finite()
    }
}

impl QuadValue for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
    fn finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureResult<T = f64> {
    pub value: T,
    pub error_estimate: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuadError {
    #[error("quadrature did not converge: error estimate {error_estimate:e} after {evaluations} evaluations")]
    NoConvergence { error_estimate: f64, evaluations: usize },
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("integrand not finite at x = {x}")]
    NonFinite { x: f64 },
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("series tail bound {tail_bound:e} still above tolerance after {terms} terms")]
    SeriesNoConvergence { terms: usize, tail_bound: f64 },
    #[error("ODE step control failed at t = {t}: {reason}")]
    IntegratorDivergence { t: f64, reason: String },
}

/// Stopping rule for adaptive quadrature: converged once the summed error
/// estimate is below `max(abs, rel * |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub fn absolute(abs: f64) -> Self {
        Self { abs, rel: 0.0, max_intervals: 4000 }
    }

    pub fn relative(rel: f64) -> Self {
        Self { abs: 0.0, rel, max_intervals: 4000 }
    }

    pub fn with_abs(mut self, abs: f64) -> Self {
        self.abs = abs;
        self
    }

    pub fn with_budget(mut self, max_intervals: usize) -> Self {
        self.max_intervals = max_intervals;
        self
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::absolute(1e-10)
    }
}

// 21-point Kronrod abscissae and weights, with the embedded 10-point Gauss
// weights for the odd-indexed nodes.
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600525534766,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

struct Panel<T> {
    lo: f64,
    hi: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

fn gk21<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> Result<(T, f64), QuadError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut eval = |x: f64| -> Result<T, QuadError> {
        let v = f(x);
        if v.finite() {
            Ok(v)
        } else {
            Err(QuadError::NonFinite { x })
        }
    };
    let fc = eval(center)?;
    let mut resk = fc * WGK[10];
    let mut resg = T::default();
    let mut resabs = fc.magnitude() * WGK[10];
    let mut fv1 = [T::default(); 10];
    let mut fv2 = [T::default(); 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        resk = resk + (f1 + f2) * WGK[j];
        resabs += WGK[j] * (f1.magnitude() + f2.magnitude());
        if j % 2 == 1 {
            resg = resg + (f1 + f2) * WG[j / 2];
        }
    }
    let mean = resk * 0.5;
    let mut resasc = WGK[10] * (fc - mean).magnitude();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).magnitude() + (fv2[j] - mean).magnitude());
    }
    let scale = half.abs();
    let result = resk * half;
    resabs *= scale;
    resasc *= scale;
    let mut err = ((resk - resg) * half).magnitude();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    Ok((result, err))
}

/// Globally adaptive GK21 starting from the partition given by `breaks`
/// (sorted, at least two points). Returns the best estimate together with a
/// convergence flag instead of failing, so callers can report partial sums.
pub fn integrate_partition<T: QuadValue, F: FnMut(f64) -> T>(
    mut f: F,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<(QuadratureResult<T>, bool), QuadError> {
    if breaks.len() < 2 {
        return Err(QuadError::InvalidInterval { lo: f64::NAN, hi: f64::NAN });
    }
    for w in breaks.windows(2) {
        if !(w[0] < w[1]) || !w[0].is_finite() || !w[1].is_finite() {
            return Err(QuadError::InvalidInterval { lo: w[0], hi: w[1] });
        }
    }
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    let mut frozen_value = T::default();
    let mut frozen_error = 0.0;
    for w in breaks.windows(2) {
        let (value, error) = gk21(&mut f, w[0], w[1])?;
        evaluations += 21;
        heap.push(Panel { lo: w[0], hi: w[1], value, error });
    }
    let totals = |heap: &BinaryHeap<Panel<T>>, fv: T, fe: f64| {
        let mut v = fv;
        let mut e = fe;
        for p in heap.iter() {
            v = v + p.value;
            e += p.error;
        }
        (v, e)
    };
    let mut intervals = heap.len();
    loop {
        let (value, error) = totals(&heap, frozen_value, frozen_error);
        let target = tol.target(value.magnitude());
        if error <= target || heap.is_empty() {
            let ok = error <= target;
            return Ok((QuadratureResult { value, error_estimate: error, evaluations }, ok));
        }
        if intervals >= tol.max_intervals {
            return Ok((QuadratureResult { value, error_estimate: error, evaluations }, false));
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.lo + worst.hi);
        let resolvable = mid > worst.lo
            && mid < worst.hi
            && (worst.hi - worst.lo) > 1e3 * f64::EPSILON * worst.lo.abs().max(worst.hi.abs());
        if !resolvable {
            frozen_value = frozen_value + worst.value;
            frozen_error += worst.error;
            continue;
        }
        let (v1, e1) = gk21(&mut f, worst.lo, mid)?;
        let (v2, e2) = gk21(&mut f, mid, worst.hi)?;
        evaluations += 42;
        intervals += 1;
        heap.push(Panel { lo: worst.lo, hi: mid, value: v1, error: e1 });
        heap.push(Panel { lo: mid, hi: worst.hi, value: v2, error: e2 });
    }
}

fn checked<T>(r: (QuadratureResult<T>, bool)) -> Result<QuadratureResult<T>, QuadError> {
    let (res, ok) = r;
    if ok {
        Ok(res)
    } else {
        Err(QuadError::NoConvergence { error_estimate: res.error_estimate, evaluations: res.evaluations })
    }
}

/// Adaptive integral of `f` over `[lo, hi]` to absolute tolerance `tol`.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<QuadratureResult, QuadError> {
    integrate_with(f, lo, hi, Tolerance::absolute(tol))
}

pub fn integrate_with<T: QuadValue, F: FnMut(f64) -> T>(
    f: F,
    lo: f64,
    hi: f64,
    tol: Tolerance,
) -> Result<QuadratureResult<T>, QuadError> {
    checked(integrate_partition(f, &[lo, hi], tol)?)
}

/// Integral over a partition whose breakpoints mark known features
/// (oscillation zeros, kinks, integrable singularities).
pub fn integrate_panels<T: QuadValue, F: FnMut(f64) -> T>(
    f: F,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<QuadratureResult<T>, QuadError> {
    checked(integrate_partition(f, breaks, tol)?)
}

/// Integral over `[lo, inf)` via `x = lo + scale * t / (1 - t)`.
pub fn integrate_semi_infinite<F: FnMut(f64) -> f64>(
    f: F,
    lo: f64,
    decay_scale: f64,
    tol: f64,
) -> Result<QuadratureResult, QuadError> {
    semi_infinite_with(f, lo, decay_scale, Tolerance::absolute(tol))
}

pub fn semi_infinite_with<T: QuadValue, F: FnMut(f64) -> T>(
    f: F,
    lo: f64,
    decay_scale: f64,
    tol: Tolerance,
) -> Result<QuadratureResult<T>, QuadError> {
    checked(semi_infinite_partition(f, lo, decay_scale, tol)?)
}

pub fn semi_infinite_partition<T: QuadValue, F: FnMut(f64) -> T>(
    mut f: F,
    lo: f64,
    decay_scale: f64,
    tol: Tolerance,
) -> Result<(QuadratureResult<T>, bool), QuadError> {
    if !(decay_scale > 0.0) || !lo.is_finite() {
        return Err(QuadError::InvalidInterval { lo, hi: f64::INFINITY });
    }
    let mapped = |t: f64| {
        let s = 1.0 - t;
        let x = lo + decay_scale * t / s;
        if !x.is_finite() {
            return T::default();
        }
        let v = f(x);
        if v.magnitude() == 0.0 {
            return v;
        }
        v * (decay_scale / (s * s))
    };
    integrate_partition(mapped, &[0.0, 1.0], tol)
}

/// Bisection on a sign-changing bracket. `tol` is an absolute width target
/// for the bracket; zero means bisect down to floating-point resolution.
pub fn find_root_bracketed<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64, QuadError> {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(QuadError::NoSignChange { lo: a, hi: b, f_lo: fa, f_hi: fb });
    }
    let mut fb = fb;
    loop {
        let m = 0.5 * (a + b);
        if m <= a || m >= b || (b - a) <= tol {
            return Ok(if fa.abs() <= fb.abs() { a } else { b });
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Derivative {
    pub value: f64,
    pub error_estimate: f64,
    /// Smallest step used in the tableau.
    pub step: f64,
    /// True when the tableau stopped because roundoff or integrand noise
    /// began to dominate the truncation error.
    pub noise_limited: bool,
}

/// Central differences `(f(x+h) - f(x-h)) / 2h` with step halving and a
/// Neville tableau in h^2 (Ridders' scheme with ratio 2).
pub fn differentiate_richardson<F: FnMut(f64) -> f64>(mut f: F, x: f64, h0: f64) -> Derivative {
    const LEVELS: usize = 14;
    let mut table = [[0.0f64; LEVELS]; LEVELS];
    let mut h = h0;
    let mut best = Derivative { value: f64::NAN, error_estimate: f64::INFINITY, step: h0, noise_limited: false };
    for i in 0..LEVELS {
        table[i][0] = (f(x + h) - f(x - h)) / (2.0 * h);
        let mut fac = 1.0;
        for j in 1..=i {
            fac *= 4.0;
            table[i][j] = table[i][j - 1] + (table[i][j - 1] - table[i - 1][j - 1]) / (fac - 1.0);
            let err = (table[i][j] - table[i][j - 1])
                .abs()
                .max((table[i][j] - table[i - 1][j - 1]).abs());
            if err <= best.error_estimate {
                best.value = table[i][j];
                best.error_estimate = err;
                best.step = h;
            }
        }
        if i == 0 {
            best.value = table[0][0];
        } else if (table[i][i] - table[i - 1][i - 1]).abs() >= 2.0 * best.error_estimate {
            best.noise_limited = true;
            break;
        }
        h *= 0.5;
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesResult {
    pub value: f64,
    pub terms: usize,
    pub tail_bound: f64,
}

/// Sums `term(n)` for `n = start, start+1, ...` until `tail_bound(n)`, a bound
/// on the sum of all terms after `n`, drops below `tol`. Terms are added in
/// ascending magnitude so the result does not depend on evaluation order.
pub fn sum_series<F, B>(mut term: F, mut tail_bound: B, start: usize, tol: f64, max_terms: usize) -> Result<SeriesResult, QuadError>
where
    F: FnMut(usize) -> Result<f64, QuadError>,
    B: FnMut(usize) -> f64,
{
    let mut terms = Vec::new();
    let mut n = start;
    loop {
        terms.push(term(n)?);
        let bound = tail_bound(n);
        if bound < tol {
            return Ok(SeriesResult { value: sum_ascending(&mut terms), terms: terms.len(), tail_bound: bound });
        }
        if terms.len() >= max_terms {
            return Err(QuadError::SeriesNoConvergence { terms: terms.len(), tail_bound: bound });
        }
        n += 1;
    }
}

pub fn sum_ascending(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    values.iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-14, initial_step: 1e-3, max_steps: 2_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub states: Vec<Vec<Complex64>>,
    pub steps: usize,
    pub rejected: usize,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Dormand-Prince 5(4) with standard step control. The step is clipped to
/// land exactly on every requested output time (which must be ascending and
/// not before `t0`).
pub fn dopri5<F>(mut rhs: F, t0: f64, y0: &[Complex64], outputs: &[f64], opts: OdeOptions) -> Result<OdeSolution, QuadError>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut h = opts.initial_step;
    let mut k = vec![vec![Complex64::default(); n]; 7];
    let mut tmp = vec![Complex64::default(); n];
    let mut ynew = vec![Complex64::default(); n];
    let mut states = Vec::with_capacity(outputs.len());
    let mut steps = 0;
    let mut rejected = 0;
    rhs(t, &y, &mut k[0]);
    for &target in outputs {
        if target < t {
            return Err(QuadError::IntegratorDivergence { t, reason: "output times must be ascending".into() });
        }
        while t < target {
            if steps + rejected >= opts.max_steps {
                return Err(QuadError::IntegratorDivergence { t, reason: "step budget exhausted".into() });
            }
            let last = t + h >= target;
            let step = if last { target - t } else { h };
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, kj) in k.iter().enumerate().take(s) {
                        if A[s][j] != 0.0 {
                            acc += kj[i] * (step * A[s][j]);
                        }
                    }
                    tmp[i] = acc;
                }
                // The last row of A holds the fifth-order weights, so the
                // seventh stage is evaluated at the new solution.
                if s == 6 {
                    ynew.copy_from_slice(&tmp);
                }
                rhs(t + C[s] * step, &tmp, &mut k[s]);
            }
            let mut err = 0.0;
            for i in 0..n {
                let mut e = Complex64::default();
                for (j, kj) in k.iter().enumerate() {
                    if E[j] != 0.0 {
                        e += kj[i] * (step * E[j]);
                    }
                }
                let sc = opts.atol + opts.rtol * y[i].norm().max(ynew[i].norm());
                err += (e.norm() / sc).powi(2);
            }
            let err = (err / n.max(1) as f64).sqrt();
            if !err.is_finite() {
                return Err(QuadError::IntegratorDivergence { t, reason: "non-finite error norm".into() });
            }
            if err <= 1.0 {
                t = if last { target } else { t + step };
                y.copy_from_slice(&ynew);
                k.swap(0, 6);
                steps += 1;
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || grow < 1.0 {
                    h = step * grow;
                }
            } else {
                rejected += 1;
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(QuadError::IntegratorDivergence { t, reason: "step size underflow".into() });
                }
            }
        }
        states.push(y.clone());
    }
    Ok(OdeSolution { states, steps, rejected })
}
