//! Integer-order cylindrical Bessel functions and Jacobi-Anger weights.
//!
//! `J` is evaluated by Miller's normalized backward recurrence (with a power
//! series fallback near the origin), `N` (a.k.a. `Y`) by forward recurrence
//! seeded from `N_0`, `N_1`. The seeds come from the Neumann series over the
//! backward-recurrence `J` values for `x < 25` and from Hankel's asymptotic
//! expansion above. Negative orders are always reduced by reflection.

use std::f64::consts::{FRAC_PI_4, PI};

use crate::error::{Error, Result};

/// Largest |order| accepted by [`bessel_j`] and [`bessel_n`].
pub const MAX_ORDER: i32 = 200;

/// Tail mass a [`HarmonicWeightTable`] may drop before truncation is an error.
pub const JACOBI_ANGER_TAIL_LIMIT: f64 = 1e-10;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const HANKEL_CROSSOVER: f64 = 25.0;
const RESCALE_ABOVE: f64 = 1e250;
const SERIES_BELOW: f64 = 1e-2;

/// Integer Bessel order; may be negative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BesselOrder(pub i32);

impl BesselOrder {
    /// `(|m|, sign)` such that `Z_m = sign * Z_|m|`.
    pub fn reflect(self) -> (usize, f64) {
        let a = self.0.unsigned_abs() as usize;
        let sign = if self.0 < 0 && a % 2 == 1 { -1.0 } else { 1.0 };
        (a, sign)
    }
}

impl From<i32> for BesselOrder {
    fn from(m: i32) -> Self {
        BesselOrder(m)
    }
}

fn check_order(m: i32) -> Result<()> {
    if m.abs() > MAX_ORDER {
        return Err(Error::Domain(format!(
            "Bessel order {m} outside supported range |m| <= {MAX_ORDER}"
        )));
    }
    Ok(())
}

fn miller_start(nmax: usize, x: f64) -> usize {
    let base = (nmax as f64).max(x);
    let n = (base + 30.0 + (160.0 * base).sqrt()).ceil() as usize;
    n + (n & 1)
}

/// `J_0(x) ..= J_nmax(x)` for `x > 0` by power series (small `x`) or
/// normalized backward recurrence. Valid for arbitrarily large `x`.
pub(crate) fn j_sequence(nmax: usize, x: f64) -> Vec<f64> {
    debug_assert!(x > 0.0 && x.is_finite());
    if x < SERIES_BELOW {
        return (0..=nmax).map(|n| j_series(n, x)).collect();
    }
    let start = miller_start(nmax, x);
    let mut out = vec![0.0; nmax + 1];
    let mut above = 0.0;
    let mut cur = 1e-30;
    let mut norm = 0.0;
    for n in (1..=start).rev() {
        if n <= nmax {
            out[n] = cur;
        }
        if n % 2 == 0 {
            norm += 2.0 * cur;
        }
        let below = (2.0 * n as f64 / x) * cur - above;
        above = cur;
        cur = below;
        if cur.abs() > RESCALE_ABOVE {
            let s = 1.0 / RESCALE_ABOVE;
            cur *= s;
            above *= s;
            norm *= s;
            for v in out.iter_mut().skip(n.min(nmax + 1)) {
                *v *= s;
            }
        }
    }
    out[0] = cur;
    norm += cur;
    for v in &mut out {
        *v /= norm;
    }
    out
}

/// Power series; accurate for `x` well below 1.
fn j_series(n: usize, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut lead = 1.0;
    for k in 1..=n {
        lead *= half / k as f64;
        if lead == 0.0 {
            return 0.0;
        }
    }
    let q = -half * half;
    let mut term = lead;
    let mut sum = lead;
    for k in 1..60 {
        term *= q / (k as f64 * (n + k) as f64);
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Hankel asymptotic `(P, Q)` for order `nu`.
fn hankel_pq(nu: f64, x: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term: f64 = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        let mag = term.abs();
        if mag > last {
            break;
        }
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if mag < 1e-17 {
            break;
        }
        last = mag;
    }
    (p, q)
}

fn y01(x: f64) -> (f64, f64) {
    if x >= HANKEL_CROSSOVER {
        let amp = (2.0 / (PI * x)).sqrt();
        let (p0, q0) = hankel_pq(0.0, x);
        let (p1, q1) = hankel_pq(1.0, x);
        let c0 = x - FRAC_PI_4;
        let c1 = x - 3.0 * FRAC_PI_4;
        (
            amp * (p0 * c0.sin() + q0 * c0.cos()),
            amp * (p1 * c1.sin() + q1 * c1.cos()),
        )
    } else {
        // Neumann series over J computed by backward recurrence
        let len = x.ceil() as usize + 60;
        let j = j_sequence(len, x);
        let lg = (0.5 * x).ln() + EULER_GAMMA;
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        let mut k = 1;
        while 2 * k < len {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            s0 += sign * j[2 * k] / k as f64;
            s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / k as f64;
            k += 1;
        }
        let y0 = (2.0 / PI) * (lg * j[0] - 2.0 * s0);
        let y1 = (2.0 / PI) * (lg * j[1] - j[0] / x + s1);
        (y0, y1)
    }
}

/// `N_0(x) ..= N_nmax(x)` for `x > 0` by forward recurrence.
pub(crate) fn n_sequence(nmax: usize, x: f64) -> Vec<f64> {
    let (y0, y1) = y01(x);
    let mut out = Vec::with_capacity(nmax + 1);
    out.push(y0);
    if nmax >= 1 {
        out.push(y1);
    }
    for n in 1..nmax {
        let next = (2.0 * n as f64 / x) * out[n] - out[n - 1];
        out.push(next);
    }
    out
}

/// Bessel function of the first kind `J_m(x)`, `x >= 0`.
pub fn bessel_j(m: impl Into<BesselOrder>, x: f64) -> Result<f64> {
    let order = m.into();
    check_order(order.0)?;
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain(format!("bessel_j requires finite x >= 0, got {x}")));
    }
    let (a, sign) = order.reflect();
    if x == 0.0 {
        return Ok(if a == 0 { 1.0 } else { 0.0 });
    }
    Ok(sign * j_sequence(a, x)[a])
}

/// Bessel function of the second kind `N_m(x)` (Neumann / `Y_m`), `x > 0`.
pub fn bessel_n(m: impl Into<BesselOrder>, x: f64) -> Result<f64> {
    let order = m.into();
    check_order(order.0)?;
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("bessel_n requires finite x > 0, got {x}")));
    }
    let (a, sign) = order.reflect();
    Ok(sign * n_sequence(a, x)[a])
}

/// `J` and `N` of orders `m` and `m + 1` at one argument.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CylinderPair {
    pub j: [f64; 2],
    pub n: [f64; 2],
}

/// Evaluate `J_m, J_{m+1}, N_m, N_{m+1}` at `x > 0` in one pass.
pub fn cylinder_pair(m: i32, x: f64) -> Result<CylinderPair> {
    check_order(m)?;
    check_order(m + 1)?;
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("cylinder functions require finite x > 0, got {x}")));
    }
    let top = m.unsigned_abs().max((m + 1).unsigned_abs()) as usize;
    let js = j_sequence(top, x);
    let ns = n_sequence(top, x);
    let pick = |seq: &[f64], o: i32| {
        let (a, s) = BesselOrder(o).reflect();
        s * seq[a]
    };
    Ok(CylinderPair {
        j: [pick(&js, m), pick(&js, m + 1)],
        n: [pick(&ns, m), pick(&ns, m + 1)],
    })
}

/// `J_m(k r0) N_m(k r1) - J_m(k r1) N_m(k r0)`.
///
/// Its zeros in `k` are the Dirichlet radial wavenumbers of the annulus
/// `r0 < r < r1` in angular-momentum channel `m`.
pub fn cross_product_det(m: impl Into<BesselOrder>, k: f64, r0: f64, r1: f64) -> Result<f64> {
    let m = m.into();
    if !(r0 > 0.0 && r1 > r0 && r1.is_finite()) {
        return Err(Error::Domain(format!("annulus radii must satisfy 0 < r0 < r1, got {r0}, {r1}")));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!("wavenumber must be positive, got {k}")));
    }
    let a = cylinder_pair(m.0, k * r0)?;
    let b = cylinder_pair(m.0, k * r1)?;
    Ok(a.j[0] * b.n[0] - b.j[0] * a.n[0])
}

/// Jacobi-Anger weights `J_α(z)` for `|α| <= cutoff`.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicWeightTable {
    pub z: f64,
    pub cutoff: usize,
    weights: Vec<f64>,
}

impl HarmonicWeightTable {
    /// Weight of harmonic `alpha`; zero outside the retained range.
    pub fn weight(&self, alpha: i64) -> f64 {
        if alpha.unsigned_abs() as usize > self.cutoff {
            0.0
        } else {
            self.weights[(alpha + self.cutoff as i64) as usize]
        }
    }

    /// `(α, J_α(z))` in increasing `α`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let c = self.cutoff as i64;
        self.weights.iter().enumerate().map(move |(i, &w)| (i as i64 - c, w))
    }

    /// `Σ_α J_α(z)²`, equal to 1 up to the dropped tail.
    pub fn parseval_sum(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    pub fn tail_mass(&self) -> f64 {
        (1.0 - self.parseval_sum()).max(0.0)
    }

    /// Effective number of harmonics `(Σw²)² / Σw⁴`.
    pub fn participation_number(&self) -> f64 {
        let s2 = self.parseval_sum();
        let s4: f64 = self.weights.iter().map(|w| w.powi(4)).sum();
        s2 * s2 / s4
    }
}

/// Cutoff that keeps the Jacobi-Anger tail well below
/// [`JACOBI_ANGER_TAIL_LIMIT`].
pub fn recommended_cutoff(z: f64) -> usize {
    let a = z.abs();
    (a + 25.0 + 8.0 * a.cbrt()).ceil() as usize
}

/// Coefficients of `exp(i z sin θ) = Σ_α J_α(z) exp(i α θ)`.
pub fn jacobi_anger_weights(z: f64, cutoff: usize) -> Result<HarmonicWeightTable> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("Jacobi-Anger argument must be finite, got {z}")));
    }
    let c = cutoff as i64;
    if z == 0.0 {
        let mut weights = vec![0.0; 2 * cutoff + 1];
        weights[cutoff] = 1.0;
        return Ok(HarmonicWeightTable { z, cutoff, weights });
    }
    let seq = j_sequence(cutoff, z.abs());
    let weights: Vec<f64> = (-c..=c)
        .map(|alpha| {
            let a = alpha.unsigned_abs() as usize;
            // J_{-α} = (-1)^α J_α and J_α(-z) = (-1)^α J_α(z)
            let flips = (alpha < 0) as u32 + (z < 0.0) as u32;
            let odd = a % 2 == 1 && flips % 2 == 1;
            if odd {
                -seq[a]
            } else {
                seq[a]
            }
        })
        .collect();
    let table = HarmonicWeightTable { z, cutoff, weights };
    let tail = table.tail_mass();
    if tail > JACOBI_ANGER_TAIL_LIMIT || (cutoff as f64) < z.abs().ceil() {
        return Err(Error::Truncation {
            z,
            cutoff,
            tail,
            limit: JACOBI_ANGER_TAIL_LIMIT,
        });
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series_j(m: usize, x: f64) -> f64 {
        // independent oracle: plain power series summed in long double style
        let mut term = 1.0;
        for k in 1..=m {
            term *= x / (2.0 * k as f64);
        }
        let mut sum = 0.0;
        let mut k = 0usize;
        loop {
            sum += term;
            k += 1;
            term *= -(x * x / 4.0) / (k as f64 * (m + k) as f64);
            if k > 200 || term.abs() < 1e-20 {
                break;
            }
        }
        sum
    }

    fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let mut fa = f(a);
        for _ in 0..200 {
            let c = 0.5 * (a + b);
            let fc = f(c);
            if fc == 0.0 {
                return c;
            }
            if (fc > 0.0) == (fa > 0.0) {
                a = c;
                fa = fc;
            } else {
                b = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn values_at_origin() {
        assert_eq!(bessel_j(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_j(3, 0.0).unwrap(), 0.0);
        assert_eq!(bessel_j(-3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn first_zero_of_j0_matches_series_oracle() {
        let x0 = bisect(|x| series_j(0, x), 2.0, 3.0);
        assert!((x0 - 2.404_825_557_695_773).abs() < 1e-12);
        assert!(bessel_j(0, x0).unwrap().abs() < 1e-14);
    }

    #[test]
    fn first_zero_of_n0_from_integral_oracle() {
        // N_0(x) = (4/π²) ∫_0^{π/2} cos(x cos t) (γ + ln(2x sin² t)) dt
        let oracle = |x: f64| {
            // t = (π/2) u² removes the logarithmic endpoint singularity
            let n = 200_000;
            let h = 1.0 / n as f64;
            let mut s = 0.0;
            for i in 0..n {
                let u = (i as f64 + 0.5) * h;
                let t = 0.5 * PI * u * u;
                s += PI * u * (x * t.cos()).cos() * (EULER_GAMMA + (2.0 * x * t.sin().powi(2)).ln());
            }
            4.0 / (PI * PI) * s * h
        };
        let y0 = bisect(oracle, 0.5, 1.5);
        assert!((y0 - 0.893_576_966_279_167_5).abs() < 1e-6, "{y0}");
        assert!(bessel_n(0, y0).unwrap().abs() < 1e-6);
    }

    #[test]
    fn reflection_is_exact() {
        for m in 1..30 {
            for &x in &[0.3, 2.0, 17.5, 60.0] {
                let s = if m % 2 == 1 { -1.0 } else { 1.0 };
                assert_eq!(bessel_j(-m, x).unwrap(), s * bessel_j(m, x).unwrap());
                assert_eq!(bessel_n(-m, x).unwrap(), s * bessel_n(m, x).unwrap());
            }
        }
        assert_eq!(bessel_n(-2, 3.3).unwrap(), bessel_n(2, 3.3).unwrap());
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(bessel_j(0, f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(bessel_j(0, f64::INFINITY), Err(Error::Domain(_))));
        assert!(matches!(bessel_n(0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(bessel_n(1, -1.0), Err(Error::Domain(_))));
        assert!(bessel_j(201, 1.0).is_err());
    }

    #[test]
    fn wronskian_on_grid() {
        for m in 0..=40 {
            for i in 0..50 {
                let x = 0.05 + (200.0 - 0.05) * i as f64 / 49.0;
                let p = cylinder_pair(m, x).unwrap();
                let w = p.j[1] * p.n[0] - p.j[0] * p.n[1];
                let rel = (w - 2.0 / (PI * x)).abs() * (PI * x / 2.0);
                assert!(rel < 1e-10, "m={m} x={x} rel={rel:e}");
            }
        }
    }

    #[test]
    fn jacobi_anger_at_zero_and_parseval() {
        let t = jacobi_anger_weights(0.0, 5).unwrap();
        assert_eq!(t.weight(0), 1.0);
        assert!(t.iter().filter(|&(a, _)| a != 0).all(|(_, w)| w == 0.0));
        for &z in &[0.5, 3.0, 10.0, 120.0, 1800.0, -7.5] {
            let t = jacobi_anger_weights(z, recommended_cutoff(z)).unwrap();
            assert!((t.parseval_sum() - 1.0).abs() < 1e-10, "z={z}");
            for (a, w) in t.iter() {
                let s = if a % 2 == 0 { 1.0 } else { -1.0 };
                assert_eq!(t.weight(-a), s * w);
            }
        }
    }

    #[test]
    fn jacobi_anger_truncation_error() {
        let e = jacobi_anger_weights(30.0, 20).unwrap_err();
        assert!(matches!(e, Error::Truncation { .. }));
    }

    #[test]
    fn cross_product_antisymmetric() {
        let a = cross_product_det(2, 7.3, 0.6, 1.0).unwrap();
        let x = cylinder_pair(2, 7.3 * 0.6).unwrap();
        let y = cylinder_pair(2, 7.3).unwrap();
        let swapped = y.j[0] * x.n[0] - x.j[0] * y.n[0];
        assert_eq!(a, -swapped);
        assert!(cross_product_det(2, 7.3, 1.0, 0.6).is_err());
    }
}
