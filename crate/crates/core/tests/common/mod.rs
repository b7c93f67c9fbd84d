//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use rashba_ring::floquet::Drive;
use rashba_ring::specfun::cross_product_det;

/// Classical RK4 for `i dψ/dτ = (k² + k ω(τ) σx) ψ`, recording the state
/// at every `record_every`-th step.
pub fn rk4_two_level(
    k: f64,
    drive: &Drive,
    psi0: [Complex64; 2],
    t_end: f64,
    steps: usize,
    record_every: usize,
) -> Vec<(f64, [Complex64; 2])> {
    let h = t_end / steps as f64;
    let minus_i = Complex64::new(0.0, -1.0);
    let rhs = |t: f64, y: [Complex64; 2]| -> [Complex64; 2] {
        let w = k * drive.strength(t);
        [
            minus_i * (k * k * y[0] + w * y[1]),
            minus_i * (w * y[0] + k * k * y[1]),
        ]
    };
    let axpy = |y: [Complex64; 2], a: f64, d: [Complex64; 2]| [y[0] + d[0] * a, y[1] + d[1] * a];
    let mut y = psi0;
    let mut out = vec![(0.0, y)];
    for i in 0..steps {
        let t = i as f64 * h;
        let k1 = rhs(t, y);
        let k2 = rhs(t + 0.5 * h, axpy(y, 0.5 * h, k1));
        let k3 = rhs(t + 0.5 * h, axpy(y, 0.5 * h, k2));
        let k4 = rhs(t + h, axpy(y, h, k3));
        for c in 0..2 {
            y[c] += (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]) * (h / 6.0);
        }
        if (i + 1) % record_every == 0 {
            out.push(((i + 1) as f64 * h, y));
        }
    }
    out
}

/// Zeros of `f` on `[lo, hi]` from a dense sign scan plus bisection.
pub fn dense_scan(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).ceil() as usize;
    let mut out = Vec::new();
    let mut prev = f(lo);
    for i in 1..=n {
        let x = lo + step * i as f64;
        let v = f(x);
        if prev.signum() != v.signum() {
            let (mut a, mut b, mut fa) = (x - step, x, prev);
            for _ in 0..80 {
                let c = 0.5 * (a + b);
                let fc = f(c);
                if fc.signum() == fa.signum() {
                    a = c;
                    fa = fc;
                } else {
                    b = c;
                }
            }
            out.push(0.5 * (a + b));
        }
        prev = v;
    }
    out
}

/// Annulus Dirichlet wavenumbers of order `m` below `k_max`.
pub fn dirichlet_wavenumbers(m: i32, rho: f64, k_max: f64) -> Vec<f64> {
    dense_scan(|k| cross_product_det(m, k, rho, 1.0).unwrap(), 1e-3, k_max, 2e-3)
}

/// Second-order finite-difference residual of the constant-SOI radial
/// equations at `r`, relative to the local amplitude scale.
///
/// With `ψ = (u e^{imφ}, d e^{i(m+1)φ})` and `H = −∇² + γ` Rashba term the
/// radial equations read
///   `−u'' − u'/r + m²u/r² + γ(d' + (m+1)d/r) = ε u`
///   `−d'' − d'/r + (m+1)²d/r² − γ(u' − m u/r) = ε d`.
pub fn radial_residual(f: impl Fn(f64) -> (f64, f64), m: i32, gamma: f64, eps: f64, r: f64, h: f64) -> f64 {
    let (u0, d0) = f(r);
    let (up, dp) = f(r + h);
    let (um, dm) = f(r - h);
    let (u1, d1) = ((up - um) / (2.0 * h), (dp - dm) / (2.0 * h));
    let (u2, d2) = ((up - 2.0 * u0 + um) / (h * h), (dp - 2.0 * d0 + dm) / (h * h));
    let mf = m as f64;
    let ru = -u2 - u1 / r + mf * mf * u0 / (r * r) + gamma * (d1 + (mf + 1.0) * d0 / r) - eps * u0;
    let rd = -d2 - d1 / r + (mf + 1.0).powi(2) * d0 / (r * r) - gamma * (u1 - mf * u0 / r) - eps * d0;
    ru.abs().max(rd.abs())
}
