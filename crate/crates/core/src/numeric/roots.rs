//! Bracketed scalar root finding.
//!
//! Brent's method: inverse quadratic interpolation and secant steps, guarded
//! by bisection so that the bracket always shrinks. Converges to machine
//! precision on `x` unless a coarser `xtol` is requested.

use crate::error::{Error, Result};

const MAX_ITER: usize = 300;

/// Finds a root of `f` in `[a, b]` given `f(a)` and `f(b)` of opposite sign
/// (or one of them exactly zero).
pub fn brent<F>(f: F, a: f64, b: f64, fa: f64, fb: f64, xtol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::Precondition(format!(
            "root not bracketed on [{a}, {b}]: f = ({fa}, {fb})"
        )));
    }

    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;

    for _ in 0..MAX_ITER {
        if fb.signum() == fc.signum() {
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
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITER,
        detail: format!("brent on bracket near {b}"),
    })
}

/// Expands `[lo, hi]` upward until `f(hi) >= 0`, for increasing `f` with `f(lo) < 0`.
pub fn expand_upper<F>(f: &F, lo: f64, mut hi: f64, max_doublings: usize) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let mut step = (hi - lo).abs().max(1.0);
    for _ in 0..max_doublings {
        let fh = f(hi);
        if fh >= 0.0 {
            return Ok((hi, fh));
        }
        hi += step;
        step *= 2.0;
    }
    Err(Error::NoConvergence {
        iterations: max_doublings,
        detail: "could not bracket root from above".into(),
    })
}
