//! Oscillating SOI `ω(τ)/Ω = B + A cos ντ`.
//!
//! At fixed `k` and `κ` the reduced Hamiltonian `k² + k ω(τ)/Ω σx` commutes
//! with itself at all times, so the propagator is a closed-form rotation
//! about `σx`. Boundary conditions are imposed with equal wavenumbers in all
//! four bulk spinors, giving the drive-independent determinant `D₂(k)`.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ring::{RadialQuadrature, RingGeometry};
use crate::roots::find_roots;
use crate::specfun::{cross_product_det, cylinder_pair, jacobi_anger_weights, HarmonicWeightTable};
use crate::spectrum::{
    boundary_matrix, finalize_profile, normalize_columns, null_vectors, AngularSector, Branch, ModeLabel,
    NormCertificate, RadialProfile,
};

/// Drive parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub a: f64,
    pub b: f64,
    pub nu: f64,
}

impl Drive {
    pub fn new(a: f64, b: f64, nu: f64) -> Result<Self> {
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::param("A", format!("drive amplitude must be finite and >= 0, got {a}")));
        }
        if !b.is_finite() {
            return Err(Error::param("B", format!("constant shift must be finite, got {b}")));
        }
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::param("nu", format!("drive frequency must be positive, got {nu}")));
        }
        Ok(Drive { a, b, nu })
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.nu
    }

    /// `ω(τ)/Ω`.
    pub fn strength(&self, tau: f64) -> f64 {
        self.b + self.a * (self.nu * tau).cos()
    }

    /// Rotation angle `θ = (Ak/ν) sin ντ + Bkτ`.
    pub fn theta(&self, k: f64, tau: f64) -> f64 {
        self.a * k / self.nu * (self.nu * tau).sin() + self.b * k * tau
    }

    /// Jacobi-Anger argument `z = Ak/ν`.
    pub fn sideband_argument(&self, k: f64) -> f64 {
        self.a * k / self.nu
    }
}

fn check_finite(k: f64, tau: f64) -> Result<()> {
    if !(k.is_finite() && k >= 0.0) {
        return Err(Error::Domain(format!("wavenumber must be finite and >= 0, got {k}")));
    }
    if !tau.is_finite() {
        return Err(Error::Domain(format!("time must be finite, got {tau}")));
    }
    Ok(())
}

/// `U(τ) = e^{−ik²τ}(cos θ − i sin θ σx)`.
pub fn propagator_2x2(k: f64, drive: &Drive, tau: f64) -> Result<Matrix2<Complex64>> {
    check_finite(k, tau)?;
    let theta = drive.theta(k, tau);
    let phase = Complex64::from_polar(1.0, -k * k * tau);
    let c = phase * theta.cos();
    let s = phase * Complex64::new(0.0, -theta.sin());
    Ok(Matrix2::new(c, s, s, c))
}

/// Propagators on a τ grid.
pub fn propagator_series(k: f64, drive: &Drive, taus: &[f64], exec: Execution) -> Result<Vec<Matrix2<Complex64>>> {
    exec.map(taus, |&t| propagator_2x2(k, drive, t)).into_iter().collect()
}

/// Floquet state `e^{−ik²τ}(±1, 1)/√2 · e^{∓iθ(τ)}`.
pub fn floquet_eigenpair(k: f64, branch: Branch, drive: &Drive, tau: f64) -> Result<[Complex64; 2]> {
    check_finite(k, tau)?;
    let s = branch.sign();
    let phase = Complex64::from_polar(
        std::f64::consts::FRAC_1_SQRT_2,
        -k * k * tau - s * drive.theta(k, tau),
    );
    Ok([phase * s, phase])
}

/// Unconditioned `D₂(k)`: the wall matrix with `k₊ = k₋ = k`.
pub fn raw_floquet_determinant(k: f64, m: i32, geom: RingGeometry) -> Result<f64> {
    check_k(k)?;
    Ok(boundary_matrix(m, k, k, geom.rho(), 1.0)?.determinant())
}

/// `D₂(k)` with columns scaled to unit norm.
pub fn floquet_boundary_determinant(k: f64, m: i32, geom: RingGeometry) -> Result<f64> {
    check_k(k)?;
    let raw = boundary_matrix(m, k, k, geom.rho(), 1.0)?;
    Ok(normalize_columns(&raw).0.determinant())
}

fn check_k(k: f64) -> Result<()> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!("wavenumber must be positive, got {k}")));
    }
    Ok(())
}

/// A root of `D₂` with its labels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloquetRoot {
    pub k: f64,
    pub label: ModeLabel,
    /// Bessel order whose cross product vanishes: `m` (spin up) or `m + 1`.
    pub order: i32,
    /// Multiplicity of the quasienergy `k²` in the 2×2 Floquet problem.
    pub degeneracy: u8,
}

impl FloquetRoot {
    pub fn quasienergy(&self) -> f64 {
        self.k * self.k
    }

    /// Quasienergy folded into `[0, ν)`.
    pub fn reduced_quasienergy(&self, nu: f64) -> f64 {
        self.quasienergy().rem_euclid(nu)
    }
}

/// Options for [`scan_floquet_spectrum`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FloquetScanOptions {
    /// Bracketing step in `k`; `None` derives it from the doublet gap at `k_max`.
    pub step: Option<f64>,
    pub root_tol: f64,
    pub execution: Execution,
}

impl Default for FloquetScanOptions {
    fn default() -> Self {
        FloquetScanOptions {
            step: None,
            root_tol: 1e-11,
            execution: Execution::Parallel,
        }
    }
}

/// Step small enough to split the closest pair of `X_m`, `X_{m+1}` roots.
pub fn default_k_step(m: i32, k_max: f64, geom: RingGeometry) -> f64 {
    let r_mid = 0.5 * (1.0 + geom.rho());
    let gap = ((2 * m + 1).abs() as f64) / (2.0 * k_max * r_mid * r_mid);
    (gap / 8.0).min(0.05)
}

/// Relative size of a cross product, for deciding which factor vanishes.
fn relative_cross(order: i32, k: f64, geom: RingGeometry) -> Result<f64> {
    let a = cylinder_pair(order, k * geom.rho())?;
    let b = cylinder_pair(order, k)?;
    let scale = (a.j[0] * b.n[0]).abs() + (b.j[0] * a.n[0]).abs();
    Ok(cross_product_det(order, k, geom.rho(), 1.0)?.abs() / scale)
}

/// All roots of `D₂` in `(0, k_max]`, labelled `(n, κ, ±)`.
///
/// Each root belongs to exactly one of the orders `m`, `m + 1`; the `n`-th
/// root of each order forms radial doublet `n`, lower `k` labelled `−`.
pub fn scan_floquet_spectrum(
    m: i32,
    k_max: f64,
    geom: RingGeometry,
    opts: &FloquetScanOptions,
) -> Result<Vec<FloquetRoot>> {
    if !(k_max > 0.0 && k_max.is_finite()) {
        return Err(Error::param("k_max", format!("must be positive, got {k_max}")));
    }
    let step = opts.step.unwrap_or_else(|| default_k_step(m, k_max, geom));
    let ks = find_roots(
        |k| floquet_boundary_determinant(k, m, geom),
        1e-3,
        k_max,
        step,
        opts.root_tol,
        opts.execution,
    )?;
    let mut by_order: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for &k in &ks {
        let up = relative_cross(m, k, geom)?;
        let down = relative_cross(m + 1, k, geom)?;
        by_order[(down < up) as usize].push(k);
    }
    let mut out = Vec::with_capacity(ks.len());
    for (slot, list) in by_order.iter().enumerate() {
        for (i, &k) in list.iter().enumerate() {
            let partner = by_order[1 - slot].get(i).copied();
            let branch = match partner {
                Some(p) if p < k => Branch::Plus,
                Some(_) => Branch::Minus,
                // the partner lies above k_max
                None => Branch::Minus,
            };
            out.push(FloquetRoot {
                k,
                label: ModeLabel {
                    sector: AngularSector::new(m),
                    n: i + 1,
                    branch,
                },
                order: m + slot as i32,
                degeneracy: 2,
            });
        }
    }
    out.sort_by(|a, b| a.k.total_cmp(&b.k));
    Ok(out)
}

/// Floquet roots for every sector in a range, sorted by `(m, k)`.
pub fn scan_floquet_sectors(
    ms: std::ops::RangeInclusive<i32>,
    k_max: f64,
    geom: RingGeometry,
    opts: &FloquetScanOptions,
) -> Result<Vec<FloquetRoot>> {
    let ms: Vec<i32> = ms.collect();
    let per = opts.execution.map(&ms, |&m| scan_floquet_spectrum(m, k_max, geom, opts));
    let mut out = Vec::new();
    for p in per {
        out.extend(p?);
    }
    Ok(out)
}

/// A boundary-satisfying time-dependent spinor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloquetMode {
    pub root: FloquetRoot,
    pub drive: Drive,
    /// Spatial profile with `k₊ = k₋ = k`, coefficients `α` from `M₊α = 0`.
    pub profile: RadialProfile,
    pub certificate: NormCertificate,
    /// `‖M₋α̃‖ / ‖α̃‖` for the sign-flipped vector.
    pub minus_residual: f64,
}

impl FloquetMode {
    pub fn k(&self) -> f64 {
        self.root.k
    }

    pub fn label(&self) -> ModeLabel {
        self.root.label
    }

    pub fn quasienergy(&self) -> f64 {
        self.root.quasienergy()
    }

    pub fn reduced_quasienergy(&self) -> f64 {
        self.root.reduced_quasienergy(self.drive.nu)
    }

    /// Scalar time factor `e^{−ik²τ} e^{∓iθ(τ)}`.
    pub fn phase(&self, tau: f64) -> Complex64 {
        let k = self.root.k;
        let s = self.root.label.branch.sign();
        Complex64::from_polar(1.0, -k * k * tau - s * self.drive.theta(k, tau))
    }

    /// Periodic factor `e^{∓i(Ak/ν) sin ντ}`, i.e. the phase with `k²τ`
    /// and the secular `Bkτ` term removed.
    pub fn periodic_phase(&self, tau: f64) -> Complex64 {
        let k = self.root.k;
        let s = self.root.label.branch.sign();
        Complex64::from_polar(1.0, -s * self.drive.sideband_argument(k) * (self.drive.nu * tau).sin())
    }

    pub fn spinor(&self, r: f64, phi: f64, tau: f64) -> Result<[Complex64; 2]> {
        let p = self.phase(tau);
        let [a, b] = self.profile.spinor(r, phi)?;
        Ok([p * a, p * b])
    }

    /// `u(r, φ, τ)`, periodic in `τ` with the drive period.
    pub fn periodic_part(&self, r: f64, phi: f64, tau: f64) -> Result<[Complex64; 2]> {
        let p = self.periodic_phase(tau);
        let [a, b] = self.profile.spinor(r, phi)?;
        Ok([p * a, p * b])
    }
}

/// Normalized Floquet mode at a root of `D₂`.
pub fn build_floquet_mode(
    root: &FloquetRoot,
    drive: Drive,
    geom: RingGeometry,
    q: &RadialQuadrature,
) -> Result<FloquetMode> {
    let k = root.k;
    let m = root.label.sector.m;
    let m_plus = boundary_matrix(m, k, k, geom.rho(), 1.0)?;
    let alpha = null_vectors(&m_plus)?[0];
    let mut m_minus = m_plus;
    for j in 2..4 {
        m_minus.column_mut(j).neg_mut();
    }
    let tilde = nalgebra::Vector4::new(alpha[0], alpha[1], -alpha[2], -alpha[3]);
    let col_norm: f64 = (0..4).map(|j| m_minus.column(j).norm() * tilde[j].abs()).sum();
    let minus_residual = (m_minus * tilde).norm() / col_norm;
    let profile = RadialProfile {
        m,
        k_plus: k,
        k_minus: k,
        coeffs: alpha,
    };
    let (profile, certificate) = finalize_profile(profile, geom, q)?;
    Ok(FloquetMode {
        root: *root,
        drive,
        profile,
        certificate,
        minus_residual,
    })
}

/// Jacobi-Anger table for `z = Ak/ν` of a mode.
pub fn sideband_weights(mode: &FloquetMode, cutoff: usize) -> Result<HarmonicWeightTable> {
    jacobi_anger_weights(mode.drive.sideband_argument(mode.root.k), cutoff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::make_quadrature;

    fn geom() -> RingGeometry {
        RingGeometry::new(0.6).unwrap()
    }

    #[test]
    fn drive_validation() {
        assert!(Drive::new(1.0, 0.0, 0.0).is_err());
        assert!(Drive::new(-1.0, 0.0, 1.0).is_err());
        assert!(Drive::new(1.0, f64::NAN, 1.0).is_err());
        let d = Drive::new(1.0, 0.5, 0.25).unwrap();
        assert!((d.period() * d.nu - 2.0 * PI).abs() < 1e-15);
    }

    #[test]
    fn propagator_identity_and_free_limit() {
        let d = Drive::new(1.3, 0.2, 0.7).unwrap();
        assert_eq!(propagator_2x2(3.0, &d, 0.0).unwrap(), Matrix2::identity());
        let free = Drive::new(0.0, 0.0, 1.0).unwrap();
        let u = propagator_2x2(2.0, &free, 0.37).unwrap();
        let e = Complex64::from_polar(1.0, -4.0 * 0.37);
        assert!((u[(0, 0)] - e).norm() < 1e-15 && u[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn eigenpair_branches_orthonormal() {
        let d = Drive::new(2.0, 0.3, 0.5).unwrap();
        for tau in [0.0, 0.4, 3.0, 11.0] {
            let p = floquet_eigenpair(4.0, Branch::Plus, &d, tau).unwrap();
            let m = floquet_eigenpair(4.0, Branch::Minus, &d, tau).unwrap();
            let overlap = p[0].conj() * m[0] + p[1].conj() * m[1];
            assert!(overlap.norm() < 1e-15);
            let n = p[0].norm_sqr() + p[1].norm_sqr();
            assert!((n - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn roots_split_by_order() {
        let roots = scan_floquet_spectrum(7, 20.0, geom(), &FloquetScanOptions::default()).unwrap();
        assert!(!roots.is_empty());
        for r in &roots {
            let x = cross_product_det(r.order, r.k, 0.6, 1.0).unwrap();
            assert!(x.abs() < 1e-9, "{r:?}");
            assert_eq!(r.degeneracy, 2);
        }
        let n1: Vec<_> = roots.iter().filter(|r| r.label.n == 1).collect();
        assert_eq!(n1.len(), 2);
        assert_eq!(n1[0].label.branch, Branch::Minus);
        assert_eq!(n1[1].label.branch, Branch::Plus);
        assert_eq!(n1[0].order, 7);
    }

    #[test]
    fn mode_is_single_spin_component() {
        let roots = scan_floquet_spectrum(7, 15.0, geom(), &FloquetScanOptions::default()).unwrap();
        let q = make_quadrature(64, geom()).unwrap();
        let d = Drive::new(3.0, 0.0, 0.01).unwrap();
        for r in &roots {
            let mode = build_floquet_mode(r, d, geom(), &q).unwrap();
            assert!(mode.certificate.boundary_residual < 1e-9);
            assert!(mode.minus_residual < 1e-12);
            let (u, dn) = mode.profile.eval(0.8).unwrap();
            let (big, small) = if r.order == 7 { (u, dn) } else { (dn, u) };
            assert!(small.abs() < 1e-9 * big.abs().max(1.0), "{u} {dn}");
        }
    }
}
