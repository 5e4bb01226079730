//! Scalar root finding used by the curve and boundary solvers.

use crate::error::{numerical, Result};

/// Brent's method on a bracket [a, b] with f(a)·f(b) ≤ 0.
pub fn brent<F: FnMut(f64) -> Result<f64>>(mut f: F, a: f64, b: f64, xtol: f64) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return numerical(format!("root not bracketed on [{a}, {b}] ({fa}, {fb})"));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..300 {
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
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
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
        fb = f(b)?;
    }
    numerical("Brent iteration did not converge")
}

/// Walk from `x0` in steps of `step` (growing ×1.6) until f changes sign,
/// never crossing `limit`. Errors from f are treated as the end of the domain.
pub fn bracket<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    x0: f64,
    step: f64,
    limit: f64,
) -> Result<(f64, f64)> {
    let f0 = f(x0)?;
    if f0 == 0.0 {
        return Ok((x0, x0));
    }
    let dir = step.signum();
    let mut lo = x0;
    let mut h = step.abs();
    for _ in 0..200 {
        let mut x = lo + dir * h;
        if (x - limit) * dir >= 0.0 {
            x = lo + 0.5 * (limit - lo);
        }
        match f(x) {
            Ok(fx) if fx.signum() != f0.signum() => return Ok((lo, x)),
            Ok(_) => {
                lo = x;
                h *= 1.6;
            }
            Err(_) => {
                h = 0.5 * (x - lo).abs();
                if h < 1e-300 {
                    break;
                }
            }
        }
        if (limit - lo).abs() <= 1e-15 * limit.abs().max(1.0) {
            break;
        }
    }
    numerical("could not bracket root")
}
