//! Annulus geometry, dimensionless units, radial quadrature and the
//! spinor inner product.
//!
//! Lengths are measured in units of the outer radius `r1 = 1`, energies in
//! `ħΩ` with `Ω = ħ / (2 m* r1²)`, and time `τ` in units of `1/Ω`, so a
//! stationary state of energy `ε` evolves as `exp(-i ε τ)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Annulus `rho <= r <= 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingGeometry {
    rho: f64,
}

impl RingGeometry {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::param("rho", format!("inner/outer radius ratio must lie in (0, 1), got {rho}")));
        }
        Ok(RingGeometry { rho })
    }

    /// Inner radius `r0 / r1`.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn inner(&self) -> f64 {
        self.rho
    }

    pub fn outer(&self) -> f64 {
        1.0
    }

    pub fn width(&self) -> f64 {
        1.0 - self.rho
    }

    pub fn contains(&self, r: f64) -> bool {
        r >= self.rho && r <= 1.0
    }

    /// Thin-annulus estimate of the lowest radial wavenumber, `π / (r1 - r0)`.
    pub fn thin_ring_wavenumber(&self) -> f64 {
        PI / self.width()
    }
}

/// Dimensionless unit conventions. Only `ω/Ω = 2 m* α r1 / ħ²` is stored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    soi_ratio: f64,
}

impl UnitSystem {
    pub fn new(soi_ratio: f64) -> Result<Self> {
        if !soi_ratio.is_finite() {
            return Err(Error::param("omega_over_Omega", "must be finite"));
        }
        Ok(UnitSystem { soi_ratio })
    }

    /// From SI quantities: effective mass (kg), Rashba α (J·m), outer radius (m).
    pub fn from_physical(effective_mass: f64, rashba_alpha: f64, r1: f64) -> Result<Self> {
        Self::new(2.0 * effective_mass * rashba_alpha * r1 / (HBAR * HBAR))
    }

    pub fn soi_ratio(&self) -> f64 {
        self.soi_ratio
    }

    /// `Ω = ħ / (2 m* r1²)` in rad/s.
    pub fn omega_unit(effective_mass: f64, r1: f64) -> f64 {
        HBAR / (2.0 * effective_mass * r1 * r1)
    }
}

const HBAR: f64 = 1.054_571_817e-34;

/// Gauss-Legendre rule mapped to `[rho, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialQuadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub order: usize,
    rho: f64,
}

/// Default number of radial Gauss nodes.
pub const DEFAULT_QUADRATURE_ORDER: usize = 64;

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Gauss-Legendre quadrature of the given order on `[rho, 1]`.
pub fn make_quadrature(order: usize, geom: RingGeometry) -> Result<RadialQuadrature> {
    if order < 2 {
        return Err(Error::param("quadrature_order", format!("must be >= 2, got {order}")));
    }
    let (x, w) = gauss_legendre(order);
    let half = 0.5 * geom.width();
    let mid = 0.5 * (1.0 + geom.rho());
    Ok(RadialQuadrature {
        nodes: x.iter().map(|t| mid + half * t).collect(),
        weights: w.iter().map(|v| v * half).collect(),
        order,
        rho: geom.rho(),
    })
}

impl RadialQuadrature {
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `∫_rho^1 f(r) dr`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&r, &w)| w * f(r)).sum()
    }

    /// Double the order until `probe` changes by less than `tol`.
    pub fn refined(
        geom: RingGeometry,
        start: usize,
        tol: f64,
        max_order: usize,
        probe: impl Fn(&RadialQuadrature) -> f64,
    ) -> Result<RadialQuadrature> {
        let mut q = make_quadrature(start, geom)?;
        let mut last = probe(&q);
        while q.order * 2 <= max_order {
            let next = make_quadrature(q.order * 2, geom)?;
            let v = probe(&next);
            let converged = (v - last).abs() < tol;
            q = next;
            if converged {
                return Ok(q);
            }
            last = v;
        }
        Err(Error::Numerical(format!(
            "radial quadrature did not converge to {tol:e} by order {max_order}"
        )))
    }
}

/// Polar sampling: radial Gauss nodes times a uniform azimuthal grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarGrid {
    pub radial: RadialQuadrature,
    pub n_phi: usize,
}

impl PolarGrid {
    /// `n_phi` must be a power of two above `2 * max_abs_m + 1`.
    pub fn new(radial: RadialQuadrature, n_phi: usize, max_abs_m: usize) -> Result<Self> {
        if !n_phi.is_power_of_two() {
            return Err(Error::param("n_phi", format!("must be a power of two, got {n_phi}")));
        }
        // spinor components carry m and m + 1
        if n_phi <= 2 * (max_abs_m + 1) + 1 {
            return Err(Error::param(
                "n_phi",
                format!("{n_phi} azimuthal nodes cannot resolve |m| up to {max_abs_m}"),
            ));
        }
        Ok(PolarGrid { radial, n_phi })
    }

    /// Smallest admissible power of two for the sector range.
    pub fn for_sectors(radial: RadialQuadrature, max_abs_m: usize) -> Self {
        let n_phi = (2 * (max_abs_m + 1) + 2).next_power_of_two().max(8);
        PolarGrid { radial, n_phi }
    }

    pub fn phi(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_phi as f64
    }

    pub fn n_r(&self) -> usize {
        self.radial.len()
    }

    pub fn len(&self) -> usize {
        self.n_r() * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Azimuthal index of the `m`-th Fourier component (wrapped).
    pub fn fourier_index(&self, m: i32) -> usize {
        m.rem_euclid(self.n_phi as i32) as usize
    }
}

/// A spinor in a single `κ = m + 1/2` sector,
/// `(up(r) e^{imφ}, down(r) e^{i(m+1)φ})`, sampled at quadrature nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorSpinor {
    pub m: i32,
    pub up: Vec<Complex64>,
    pub down: Vec<Complex64>,
}

impl SectorSpinor {
    pub fn kappa(&self) -> f64 {
        self.m as f64 + 0.5
    }
}

/// `∫∫ ⟨f|g⟩ r dφ dr` with the azimuthal integral done analytically.
pub fn spinor_inner_product(f: &SectorSpinor, g: &SectorSpinor, q: &RadialQuadrature) -> Result<Complex64> {
    let n = q.len();
    if f.up.len() != n || f.down.len() != n || g.up.len() != n || g.down.len() != n {
        return Err(Error::Contract(format!(
            "sector spinors must be sampled at the {n} quadrature nodes"
        )));
    }
    if f.m != g.m {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let w = q.weights[i] * q.nodes[i];
        acc += w * (f.up[i].conj() * g.up[i] + f.down[i].conj() * g.down[i]);
    }
    Ok(2.0 * PI * acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_validation() {
        assert!(RingGeometry::new(0.6).is_ok());
        for bad in [0.0, 1.0, 1.2, -0.1, f64::NAN] {
            assert!(RingGeometry::new(bad).is_err());
        }
    }

    #[test]
    fn polynomial_exactness() {
        let g = RingGeometry::new(0.6).unwrap();
        let q = make_quadrature(8, g).unwrap();
        assert!((q.integrate(|r| r) - (1.0 - 0.36) / 2.0).abs() < 1e-14);
        assert!((q.integrate(|_| 1.0) - 0.4).abs() < 1e-14);
        // degree 15 = 2·8 − 1
        let exact = (1.0 - 0.6f64.powi(16)) / 16.0;
        assert!((q.integrate(|r| r.powi(15)) - exact).abs() < 1e-14);
        assert!(q.nodes.iter().all(|&r| r > 0.6 && r < 1.0));
        assert!(q.weights.iter().all(|&w| w > 0.0));
        assert!(make_quadrature(1, g).is_err());
    }

    #[test]
    fn polar_grid_rules() {
        let g = RingGeometry::new(0.6).unwrap();
        let q = make_quadrature(4, g).unwrap();
        assert!(PolarGrid::new(q.clone(), 24, 3).is_err());
        assert!(PolarGrid::new(q.clone(), 8, 3).is_err());
        assert!(PolarGrid::new(q.clone(), 16, 3).is_ok());
        let auto = PolarGrid::for_sectors(q, 10);
        assert!(PolarGrid::new(auto.radial.clone(), auto.n_phi, 10).is_ok());
    }

    #[test]
    fn units_roundtrip() {
        let u = UnitSystem::new(4.0).unwrap();
        assert_eq!(u.soi_ratio(), 4.0);
        // InGaAs-like numbers give an O(1) ratio
        let m = 0.041 * 9.109e-31;
        let u = UnitSystem::from_physical(m, 1e-11 * 1.602e-19, 250e-9).unwrap();
        assert!(u.soi_ratio() > 0.1 && u.soi_ratio() < 100.0);
    }
}
