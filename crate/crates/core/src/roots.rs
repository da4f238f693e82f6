//! Bracketed one-dimensional solvers.

use crate::error::{Error, Result};

const MAX_ITER: usize = 400;

/// Root of `f` in `[lo, hi]` where `f(lo)` and `f(hi)` differ in sign.
///
/// `f` returns the value and derivative. Newton steps are taken while they
/// stay inside the current bracket and shrink it fast enough; otherwise the
/// step falls back to bisection. Stops once the bracket or step is below
/// `tol`.
pub(crate) fn newton_bisect<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let (f_lo, _) = f(lo);
    let (f_hi, _) = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoSolution(format!(
            "no sign change on [{lo}, {hi}]: f = {f_lo}, {f_hi}"
        )));
    }
    // Orient so that f(lo) < 0 < f(hi).
    if f_lo > 0.0 {
        std::mem::swap(&mut lo, &mut hi);
    }
    let mut x = 0.5 * (lo + hi);
    let mut last_step = (hi - lo).abs();
    for _ in 0..MAX_ITER {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let in_bracket = dfx.is_finite()
            && dfx != 0.0
            && (newton - lo) * (newton - hi) < 0.0
            && (newton - x).abs() < 0.5 * last_step;
        let next = if in_bracket { newton } else { 0.5 * (lo + hi) };
        last_step = (next - x).abs();
        x = next;
        if last_step <= tol || (hi - lo).abs() <= tol {
            return Ok(x);
        }
    }
    Err(Error::NonConvergence(format!(
        "bracketed Newton did not reach tolerance {tol}; bracket [{lo}, {hi}]"
    )))
}

/// Pure bisection on a sign change; used where no derivative is available.
pub(crate) fn bisect<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo.signum() == f_hi.signum() && f_lo != 0.0 && f_hi != 0.0 {
        return Err(Error::NoSolution(format!("no sign change on [{lo}, {hi}]")));
    }
    if f_lo > 0.0 {
        std::mem::swap(&mut lo, &mut hi);
    }
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= tol || mid == lo || mid == hi {
            return Ok(mid);
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Maximizer of a unimodal `f` on `[lo, hi]` by golden-section search.
pub(crate) fn golden_max<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    for _ in 0..MAX_ITER {
        if (hi - lo).abs() <= tol {
            break;
        }
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a);
        }
    }
    0.5 * (lo + hi)
}
