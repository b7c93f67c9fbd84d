//! Sign-change bracketing on a uniform grid and Brent refinement.

use crate::error::{Error, Result};
use crate::exec::Execution;

/// Brent's method on a bracket with `f(a) * f(b) <= 0`.
pub fn brent(
    f: impl Fn(f64) -> Result<f64>,
    a: f64,
    b: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<f64> {
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
        return Err(Error::Numerical(format!("[{a}, {b}] does not bracket a root")));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
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
        let half = 0.5 * (c - b);
        if half.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * half * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * half * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * half * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = half;
                e = d;
            }
        } else {
            d = half;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(half) };
        fb = f(b)?;
    }
    Err(Error::Numerical("Brent iteration limit reached".into()))
}

/// Intervals of a uniform grid on `[lo, hi]` across which `f` changes sign.
pub fn sign_change_brackets(
    f: impl Fn(f64) -> Result<f64> + Sync + Send,
    lo: f64,
    hi: f64,
    step: f64,
    exec: Execution,
) -> Result<Vec<(f64, f64)>> {
    let n = ((hi - lo) / step).ceil().max(1.0) as usize;
    let h = (hi - lo) / n as f64;
    let values = exec.map_range(n + 1, |i| f(lo + h * i as f64));
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    let mut out = Vec::new();
    for i in 0..n {
        let (a, b) = (values[i], values[i + 1]);
        if a == 0.0 || a.signum() != b.signum() && b != 0.0 {
            out.push((lo + h * i as f64, lo + h * (i + 1) as f64));
        }
    }
    Ok(out)
}

/// All sign-change roots of `f` in `[lo, hi]`, sorted.
pub fn find_roots(
    f: impl Fn(f64) -> Result<f64> + Sync + Send,
    lo: f64,
    hi: f64,
    step: f64,
    xtol: f64,
    exec: Execution,
) -> Result<Vec<f64>> {
    let brackets = sign_change_brackets(&f, lo, hi, step, exec)?;
    let roots = exec.map(&brackets, |&(a, b)| brent(&f, a, b, xtol, 200));
    let mut roots: Vec<f64> = roots.into_iter().collect::<Result<_>>()?;
    roots.sort_by(|a, b| a.total_cmp(b));
    roots.dedup_by(|a, b| (*a - *b).abs() < 10.0 * xtol);
    Ok(roots)
}
