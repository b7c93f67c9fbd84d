mod common;

use proptest::prelude::*;
use rashba_ring::floquet::raw_floquet_determinant;
use rashba_ring::ring::{make_quadrature, spinor_inner_product, RingGeometry};
use rashba_ring::specfun::cross_product_det;
use rashba_ring::spectrum::{
    boundary_determinant, build_eigenmode, count_radial_nodes, scan_spectrum, solve_sector, solve_spectrum,
    wavenumbers_for_energy, BoundaryProblem, Branch, ModeBuild, ScanOptions, SoiConstant,
};
use rashba_ring::Error;

fn ring() -> RingGeometry {
    RingGeometry::new(0.6).unwrap()
}

fn soi(w: f64) -> SoiConstant {
    SoiConstant::new(w).unwrap()
}

proptest! {
    #[test]
    fn wavenumbers_invert_the_dispersion(eps in 0.0f64..5e3, w in 0.0f64..10.0) {
        let (kp, km) = wavenumbers_for_energy(eps, soi(w)).unwrap();
        prop_assert!(kp >= 0.0 && km >= kp);
        let scale = eps.max(1.0);
        prop_assert!((kp * kp + w * kp - eps).abs() < 1e-12 * scale);
        prop_assert!((km * km - w * km - eps).abs() < 1e-12 * scale);
    }
}

#[test]
fn zero_soi_determinant_is_the_cross_product_product() {
    // with k₊ = k₋ the wall matrix reduces to the D₂ structure
    for i in 0..100 {
        let eps = 1.0 + 37.3 * i as f64;
        let k = eps.sqrt();
        let raw = BoundaryProblem::new(ring(), soi(0.0)).matrix(3, k, k).unwrap().determinant();
        assert_eq!(raw, raw_floquet_determinant(k, 3, ring()).unwrap());
        let xx = cross_product_det(3, k, 0.6, 1.0).unwrap() * cross_product_det(4, k, 0.6, 1.0).unwrap();
        assert!((raw.abs() - 4.0 * xx.abs()).abs() <= 1e-9 * raw.abs().max(4.0 * xx.abs()) + 1e-12);
    }
}

#[test]
fn determinant_sign_changes_match_dense_scan() {
    let f = |e: f64| boundary_determinant(e, soi(4.0), 4, ring()).unwrap();
    let dense = common::dense_scan(f, 1e-3, 320.0, 1e-3);
    let stubs = scan_spectrum(4, 320.0, soi(4.0), ring(), &ScanOptions::default()).unwrap();
    assert_eq!(dense.len(), stubs.len());
    for (d, s) in dense.iter().zip(&stubs) {
        assert!((d - s.energy).abs() < 1e-9, "{d} vs {}", s.energy);
        assert!(f(s.energy - 1e-3).signum() != f(s.energy + 1e-3).signum());
    }
    // nothing below the lowest root
    let below = common::dense_scan(f, 1e-3, stubs[0].energy - 1e-3, 1e-3);
    assert!(below.is_empty());
}

#[test]
fn frozen_regression_values() {
    let s = solve_sector(4, 700.0, soi(4.0), ring(), &ScanOptions::default()).unwrap();
    let got: Vec<f64> = s.modes.iter().map(|m| m.energy).collect();
    let want = [66.893821, 112.500534, 253.920674, 298.583792, 562.595101, 607.063623];
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() < 1e-5);
    }
}

#[test]
fn small_soi_roots_approach_dirichlet_pairs() {
    let mut last = f64::INFINITY;
    for w in [1e-2, 1e-3, 1e-4] {
        let s = solve_sector(2, 400.0, soi(w), ring(), &ScanOptions::default()).unwrap();
        let mut oracle: Vec<f64> = common::dirichlet_wavenumbers(2, 0.6, 20.0)
            .into_iter()
            .chain(common::dirichlet_wavenumbers(3, 0.6, 20.0))
            .map(|k| k * k)
            .filter(|&e| e < 400.0)
            .collect();
        oracle.sort_by(f64::total_cmp);
        assert_eq!(s.modes.len(), oracle.len());
        let dev = s
            .modes
            .iter()
            .zip(&oracle)
            .map(|(m, o)| (m.energy - o).abs())
            .fold(0.0, f64::max);
        assert!(dev < 20.0 * w, "ω = {w}: displacement {dev}");
        assert!(dev < last);
        last = dev;
    }
}

#[test]
fn doublet_splitting_grows_with_soi() {
    let mut last = 0.0;
    for i in 0..=13 {
        let w = 0.1 + 0.3 * i as f64;
        let s = solve_sector(4, 200.0, soi(w), ring(), &ScanOptions::default()).unwrap();
        let get = |b| s.modes.iter().find(|m| m.label.n == 1 && m.label.branch == b).unwrap().energy;
        let split = get(Branch::Plus) - get(Branch::Minus);
        assert!(split > last, "ω = {w}: splitting {split} after {last}");
        last = split;
    }
}

#[test]
fn weak_soi_modes_are_scalar_annulus_modes() {
    let q = make_quadrature(128, ring()).unwrap();
    let s = solve_sector(2, 150.0, soi(1e-4), ring(), &ScanOptions::default()).unwrap();
    for mode in &s.modes {
        let ku = common::dirichlet_wavenumbers(2, 0.6, 13.0);
        let kd = common::dirichlet_wavenumbers(3, 0.6, 13.0);
        let up_like = ku.iter().any(|k| (k * k - mode.energy).abs() < 1e-3);
        let down_like = kd.iter().any(|k| (k * k - mode.energy).abs() < 1e-3);
        assert!(up_like ^ down_like);
        let (order, ks) = if up_like { (2, &ku) } else { (3, &kd) };
        let k = *ks.iter().find(|k| (*k * *k - mode.energy).abs() < 1e-3).unwrap();
        // scalar Dirichlet mode J(kr)N(kρ) − J(kρ)N(kr), normalized
        let scalar = |r: f64| {
            use rashba_ring::specfun::{bessel_j, bessel_n};
            bessel_j(order, k * r).unwrap() * bessel_n(order, k * 0.6).unwrap()
                - bessel_j(order, k * 0.6).unwrap() * bessel_n(order, k * r).unwrap()
        };
        let ss = q.integrate(|r| r * scalar(r).powi(2));
        let comp = |r: f64| {
            let (u, d) = mode.radial(r).unwrap();
            if up_like {
                u
            } else {
                d
            }
        };
        let cc = q.integrate(|r| r * comp(r).powi(2));
        let sc = q.integrate(|r| r * comp(r) * scalar(r));
        let overlap = sc.abs() / (ss * cc).sqrt();
        assert!(overlap > 0.9999, "overlap {overlap}");
        // the other component carries no weight in the limit
        assert!(cc * 2.0 * std::f64::consts::PI > 0.9999);
    }
}

#[test]
fn rejects_non_roots_and_bad_input() {
    let q = make_quadrature(64, ring()).unwrap();
    assert!(matches!(build_eigenmode(100.0, 4, soi(4.0), ring(), &q), Err(Error::NotARoot { .. })));
    assert!(scan_spectrum(0, -1.0, soi(1.0), ring(), &ScanOptions::default()).is_err());
    assert!(wavenumbers_for_energy(-10.0, soi(1.0)).is_err());
}

#[test]
fn node_counts_follow_radial_index() {
    for (rho, w, m) in [(0.6, 4.0, 4), (0.5, 1.0, -3), (0.7, 2.5, 0), (0.6, 0.0, 1)] {
        let g = RingGeometry::new(rho).unwrap();
        let s = solve_sector(m, 900.0, soi(w), g, &ScanOptions::default()).unwrap();
        assert!(s.modes.len() >= 4);
        for mode in &s.modes {
            assert_eq!(count_radial_nodes(mode).unwrap() + 1, mode.label.n, "{}", mode.label);
        }
    }
}

#[test]
fn zero_soi_nodes_match_scalar_modes() {
    let s = solve_sector(1, 600.0, soi(0.0), ring(), &ScanOptions::default()).unwrap();
    for mode in &s.modes {
        // the n-th Dirichlet mode of either order has n − 1 interior zeros
        let (u, d) = mode.radial(0.77).unwrap();
        let order = if u.abs() > d.abs() { 1 } else { 2 };
        let ks = common::dirichlet_wavenumbers(order, 0.6, 25.0);
        let idx = ks.iter().position(|k| (k * k - mode.energy).abs() < 1e-6).unwrap();
        assert_eq!(count_radial_nodes(mode).unwrap(), idx);
    }
}

#[test]
fn kappa_reflection_symmetry() {
    for m in 0..4 {
        let a = solve_sector(m, 600.0, soi(3.0), ring(), &ScanOptions::default()).unwrap();
        let b = solve_sector(-m - 1, 600.0, soi(3.0), ring(), &ScanOptions::default()).unwrap();
        assert_eq!(a.modes.len(), b.modes.len());
        for (x, y) in a.modes.iter().zip(&b.modes) {
            assert!((x.energy - y.energy).abs() < 1e-8);
            assert_eq!((x.label.n, x.label.branch), (y.label.n, y.label.branch));
        }
    }
}

#[test]
fn spectrum_is_scale_invariant() {
    // r → λr, ε → ε/λ², ω/Ω fixed (so the Rashba wavenumber scales as 1/λ)
    let base = BoundaryProblem::new(ring(), soi(2.0));
    let roots = common::dense_scan(|e| base.determinant(e, 2).unwrap(), 1.0, 300.0, 0.05);
    for lambda in [0.5, 3.0] {
        let scaled = BoundaryProblem {
            r0: 0.6 * lambda,
            r1: lambda,
            gamma: 2.0 / lambda,
        };
        let lo = 1.0 / (lambda * lambda);
        let hi = 300.0 / (lambda * lambda);
        let got = common::dense_scan(|e| scaled.determinant(e, 2).unwrap(), lo, hi, 0.05 / (lambda * lambda));
        assert_eq!(got.len(), roots.len());
        for (g, r) in got.iter().zip(&roots) {
            assert!((g * lambda * lambda - r).abs() < 1e-8 * r);
        }
    }
}

#[test]
fn branch_wavenumbers_are_consistent() {
    let s = solve_sector(3, 500.0, soi(2.5), ring(), &ScanOptions::default()).unwrap();
    for m in &s.modes {
        assert!((m.k_plus.powi(2) + 2.5 * m.k_plus - m.energy).abs() < 1e-9 * m.energy);
        assert!((m.k_minus.powi(2) - 2.5 * m.k_minus - m.energy).abs() < 1e-9 * m.energy);
    }
}

#[test]
fn modes_are_orthonormal_across_sectors() {
    let q = make_quadrature(128, ring()).unwrap();
    let sectors = solve_spectrum(-8..=8, 200.0, soi(4.0), ring(), &ScanOptions::default()).unwrap();
    let modes: Vec<_> = sectors.iter().flat_map(|s| s.modes.iter()).collect();
    assert!(modes.len() > 20);
    let samples: Vec<_> = modes.iter().map(|m| m.profile.sample(&q).unwrap()).collect();
    for (i, a) in samples.iter().enumerate() {
        for (j, b) in samples.iter().enumerate() {
            let g = spinor_inner_product(a, b, &q).unwrap();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((g.re - want).abs() < 1e-6 && g.im.abs() < 1e-12);
        }
    }
}

#[test]
fn modes_satisfy_the_radial_equations() {
    let s = solve_sector(-2, 800.0, soi(3.0), ring(), &ScanOptions::default()).unwrap();
    for mode in &s.modes {
        let peak = (0..200)
            .map(|i| {
                let (u, d) = mode.radial(0.6 + 0.4 * i as f64 / 199.0).unwrap();
                u.abs().max(d.abs())
            })
            .fold(0.0, f64::max);
        for i in 1..30 {
            let r = 0.6 + 0.4 * i as f64 / 30.0;
            let res = common::radial_residual(|x| mode.radial(x).unwrap(), -2, 3.0, mode.energy, r, 1e-4);
            assert!(res < 1e-5 * mode.energy * peak, "{} at r = {r}: {res}", mode.label);
        }
    }
}

#[test]
fn builds_are_reproducible_under_both_execution_modes() {
    use rashba_ring::Execution;
    let par = ScanOptions::default();
    let seq = ScanOptions {
        execution: Execution::Sequential,
        ..par
    };
    let a = solve_spectrum(-3..=3, 300.0, soi(1.5), ring(), &par).unwrap();
    let b = solve_spectrum(-3..=3, 300.0, soi(1.5), ring(), &seq).unwrap();
    assert_eq!(a, b);
    let q = make_quadrature(64, ring()).unwrap();
    let root = a[3].modes[0].energy;
    assert!(matches!(build_eigenmode(root, 0, soi(1.5), ring(), &q).unwrap(), ModeBuild::Single(_)));
}
