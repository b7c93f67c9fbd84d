//! Constant-SOI eigenproblem on the annulus.
//!
//! In a sector of conserved total angular momentum `κ = m + 1/2` an
//! eigenstate of energy `ε` is a combination of four bulk spinors built from
//! `J` and `N` of orders `m` (spin up) and `m + 1` (spin down), evaluated at
//! the two wavenumbers `k±` with `k₊² + (ω/Ω)k₊ = ε = k₋² − (ω/Ω)k₋`.
//! Hard walls at `r = rho` and `r = 1` give a 4×4 linear system whose
//! determinant `D(ε)` is scanned for sign changes.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix4, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ring::{make_quadrature, RadialQuadrature, RingGeometry, SectorSpinor, DEFAULT_QUADRATURE_ORDER};
use crate::roots::find_roots;
use crate::specfun::{cross_product_det, cylinder_pair};

/// Largest singular-value ratio accepted as "numerically singular".
pub const ROOT_RANK_TOLERANCE: f64 = 1e-7;
/// Second-smallest singular-value ratio below which a root is degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-5;

/// Constant Rashba strength `ω/Ω >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SoiConstant(f64);

impl SoiConstant {
    pub fn new(strength: f64) -> Result<Self> {
        if !(strength.is_finite() && strength >= 0.0) {
            return Err(Error::param(
                "omega_over_Omega",
                format!("constant SOI strength must be finite and >= 0, got {strength}"),
            ));
        }
        Ok(SoiConstant(strength))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Conserved `κ = m + 1/2` sector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AngularSector {
    pub m: i32,
}

impl AngularSector {
    pub fn new(m: i32) -> Self {
        AngularSector { m }
    }

    pub fn kappa(self) -> f64 {
        self.m as f64 + 0.5
    }

    /// `κ` as a fraction string, e.g. `9/2`.
    pub fn kappa_label(self) -> String {
        format!("{}/2", 2 * self.m + 1)
    }

    /// Sector for a half-integer `κ`.
    pub fn from_kappa(kappa: f64) -> Result<Self> {
        let m = kappa - 0.5;
        if (m - m.round()).abs() > 1e-9 {
            return Err(Error::Domain(format!("κ must be half-integer, got {kappa}")));
        }
        Ok(AngularSector { m: m.round() as i32 })
    }
}

/// Spin branch label `±`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Branch {
    Minus,
    Plus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "+" | "plus" => Ok(Branch::Plus),
            "-" | "minus" => Ok(Branch::Minus),
            other => Err(Error::param("branch", format!("expected + or -, got `{other}`"))),
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Plus => "+",
            Branch::Minus => "-",
        })
    }
}

/// `(n, κ, ±)` quantum numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeLabel {
    pub sector: AngularSector,
    pub n: usize,
    pub branch: Branch,
}

impl ModeLabel {
    /// Parses the `Display` form, e.g. `+1,15/2` or `-2,-3/2`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::param("mode label", format!("expected `±n,κ` such as `+1,15/2`, got `{s}`"));
        let branch = Branch::parse(s.get(..1).ok_or_else(bad)?)?;
        let (n, kappa) = s[1..].split_once(',').ok_or_else(bad)?;
        let n: usize = n.trim().parse().map_err(|_| bad())?;
        if n == 0 {
            return Err(bad());
        }
        let (num, den) = kappa.trim().split_once('/').ok_or_else(bad)?;
        let num: i32 = num.trim().parse().map_err(|_| bad())?;
        if den.trim() != "2" || num % 2 == 0 {
            return Err(bad());
        }
        Ok(ModeLabel {
            sector: AngularSector::new((num - 1).div_euclid(2)),
            n,
            branch,
        })
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{},{}", self.branch, self.n, self.sector.kappa_label())
    }
}

/// Radial profile `(up(r), down(r))` of a sector spinor written in the four
/// bulk basis spinors with coefficients `c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub m: i32,
    pub k_plus: f64,
    pub k_minus: f64,
    pub coeffs: [f64; 4],
}

impl RadialProfile {
    pub fn eval(&self, r: f64) -> Result<(f64, f64)> {
        let c = &self.coeffs;
        let p = cylinder_pair(self.m, self.k_plus * r)?;
        let q = if self.k_minus == self.k_plus {
            p
        } else {
            cylinder_pair(self.m, self.k_minus * r)?
        };
        let up = c[0] * p.j[0] + c[1] * p.n[0] - c[2] * q.j[0] - c[3] * q.n[0];
        let down = c[0] * p.j[1] + c[1] * p.n[1] + c[2] * q.j[1] + c[3] * q.n[1];
        Ok((up, down))
    }

    /// Samples at the quadrature nodes.
    pub fn sample(&self, q: &RadialQuadrature) -> Result<SectorSpinor> {
        let mut up = Vec::with_capacity(q.len());
        let mut down = Vec::with_capacity(q.len());
        for &r in &q.nodes {
            let (u, d) = self.eval(r)?;
            up.push(Complex64::new(u, 0.0));
            down.push(Complex64::new(d, 0.0));
        }
        Ok(SectorSpinor { m: self.m, up, down })
    }

    /// `2π ∫ (up² + down²) r dr`.
    pub fn norm_squared(&self, q: &RadialQuadrature) -> Result<f64> {
        let mut acc = 0.0;
        for (&r, &w) in q.nodes.iter().zip(&q.weights) {
            let (u, d) = self.eval(r)?;
            acc += w * r * (u * u + d * d);
        }
        Ok(2.0 * PI * acc)
    }

    fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for c in &mut out.coeffs {
            *c *= s;
        }
        out
    }

    /// Full spinor at `(r, φ)`.
    pub fn spinor(&self, r: f64, phi: f64) -> Result<[Complex64; 2]> {
        let (u, d) = self.eval(r)?;
        let m = self.m as f64;
        Ok([
            Complex64::from_polar(u, m * phi),
            Complex64::from_polar(d, (m + 1.0) * phi),
        ])
    }

    /// Uniform interior-inclusive sampling on `[rho, 1]`.
    fn uniform(&self, rho: f64, n: usize) -> Result<Vec<(f64, f64, f64)>> {
        (0..=n)
            .map(|i| {
                let r = rho + (1.0 - rho) * i as f64 / n as f64;
                self.eval(r).map(|(u, d)| (r, u, d))
            })
            .collect()
    }
}

/// Wall residual and norm deviation recorded when a mode is built.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormCertificate {
    /// `max(|up|, |down|)` at both walls over the peak amplitude.
    pub boundary_residual: f64,
    /// `|⟨⟨ψ|ψ⟩⟩ − 1|` under the radial quadrature.
    pub norm_deviation: f64,
}

/// One normalized constant-SOI eigenstate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigenmode {
    pub label: ModeLabel,
    pub energy: f64,
    pub soi: f64,
    /// Inner radius of the annulus the mode lives on.
    pub rho: f64,
    pub k_plus: f64,
    pub k_minus: f64,
    pub profile: RadialProfile,
    pub certificate: NormCertificate,
    /// Share of `∫|ψ|²` carried by the `k₊` family (columns 1, 2).
    pub plus_family_weight: f64,
}

impl Eigenmode {
    pub fn sector(&self) -> AngularSector {
        self.label.sector
    }

    pub fn kappa(&self) -> f64 {
        self.label.sector.kappa()
    }

    pub fn coeffs(&self) -> [f64; 4] {
        self.profile.coeffs
    }

    pub fn radial(&self, r: f64) -> Result<(f64, f64)> {
        self.profile.eval(r)
    }

    pub fn spinor(&self, r: f64, phi: f64) -> Result<[Complex64; 2]> {
        self.profile.spinor(r, phi)
    }
}

/// Wavenumbers `(k₊, k₋)` carrying energy `ε` at SOI strength `ω/Ω`.
pub fn wavenumbers_for_energy(eps: f64, soi: SoiConstant) -> Result<(f64, f64)> {
    let half = 0.5 * soi.value();
    if !eps.is_finite() || eps < -half * half {
        return Err(Error::Domain(format!(
            "energy {eps} below −(ω/2Ω)² gives complex wavenumbers"
        )));
    }
    if eps < 0.0 {
        return Err(Error::Domain(format!("negative energies are not supported, got {eps}")));
    }
    let s = (half * half + eps).sqrt();
    Ok(((s - half).max(0.0), s + half))
}

/// Annulus `r0 < r < r1` with Rashba wavenumber `gamma` in consistent
/// length units; energies are in units of `ħ²/(2m*)` per length².
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryProblem {
    pub r0: f64,
    pub r1: f64,
    pub gamma: f64,
}

impl BoundaryProblem {
    pub fn new(geom: RingGeometry, soi: SoiConstant) -> Self {
        BoundaryProblem {
            r0: geom.rho(),
            r1: 1.0,
            gamma: soi.value(),
        }
    }

    pub fn wavenumbers(&self, eps: f64) -> Result<(f64, f64)> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Domain(format!("energy must be positive, got {eps}")));
        }
        let half = 0.5 * self.gamma;
        let s = (half * half + eps).sqrt();
        Ok((s - half, s + half))
    }

    /// Raw 4×4 wall matrix; rows are (up, down) at `r0`, then at `r1`.
    pub fn matrix(&self, m: i32, k_plus: f64, k_minus: f64) -> Result<Matrix4<f64>> {
        boundary_matrix(m, k_plus, k_minus, self.r0, self.r1)
    }

    /// `D(ε)` with columns scaled to unit norm.
    pub fn determinant(&self, eps: f64, m: i32) -> Result<f64> {
        let (kp, km) = self.wavenumbers(eps)?;
        let raw = self.matrix(m, kp, km)?;
        Ok(normalize_columns(&raw).0.determinant())
    }
}

pub(crate) fn boundary_matrix(m: i32, kp: f64, km: f64, r0: f64, r1: f64) -> Result<Matrix4<f64>> {
    let mut out = Matrix4::zeros();
    for (row, r) in [(0, r0), (2, r1)] {
        let p = cylinder_pair(m, kp * r)?;
        let q = cylinder_pair(m, km * r)?;
        out[(row, 0)] = p.j[0];
        out[(row, 1)] = p.n[0];
        out[(row, 2)] = -q.j[0];
        out[(row, 3)] = -q.n[0];
        out[(row + 1, 0)] = p.j[1];
        out[(row + 1, 1)] = p.n[1];
        out[(row + 1, 2)] = q.j[1];
        out[(row + 1, 3)] = q.n[1];
    }
    Ok(out)
}

pub(crate) fn normalize_columns(m: &Matrix4<f64>) -> (Matrix4<f64>, [f64; 4]) {
    let mut out = *m;
    let mut norms = [0.0; 4];
    for (j, nrm) in norms.iter_mut().enumerate() {
        *nrm = m.column(j).norm();
        out.column_mut(j).scale_mut(1.0 / *nrm);
    }
    (out, norms)
}

/// Conditioned boundary determinant `D(ε, ω/Ω)` for sector `m`.
pub fn boundary_determinant(eps: f64, soi: SoiConstant, m: i32, geom: RingGeometry) -> Result<f64> {
    BoundaryProblem::new(geom, soi).determinant(eps, m)
}

/// Options for [`scan_spectrum`] and [`solve_sector`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanOptions {
    /// Bracketing step in ε; `None` picks it from the level-spacing estimate.
    pub step: Option<f64>,
    /// Absolute tolerance on refined roots.
    pub root_tol: f64,
    /// Number of step halvings tried when a doublet looks incomplete.
    pub max_refinements: usize,
    pub quadrature_order: usize,
    pub execution: Execution,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            step: None,
            root_tol: 1e-10,
            max_refinements: 3,
            quadrature_order: DEFAULT_QUADRATURE_ORDER,
            execution: Execution::Parallel,
        }
    }
}

/// A refined root of `D` with provisional labels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelStub {
    pub energy: f64,
    pub label: ModeLabel,
}

/// Bracketing step from the thin-annulus level-spacing estimate.
pub fn default_energy_step(m: i32, geom: RingGeometry) -> f64 {
    let r_mid = 0.5 * (1.0 + geom.rho());
    let doublet_gap = ((2 * m + 1).abs() as f64) / (r_mid * r_mid);
    let radial_gap = 3.0 * geom.thin_ring_wavenumber().powi(2);
    (doublet_gap.min(radial_gap) / 8.0).min(0.25)
}

const SCAN_FLOOR: f64 = 1e-3;

fn scan_roots(m: i32, eps_max: f64, soi: SoiConstant, geom: RingGeometry, step: f64, opts: &ScanOptions) -> Result<Vec<f64>> {
    if soi.value() == 0.0 {
        // decoupled scalar problems of orders m (spin up) and m + 1 (spin down)
        let kmax = eps_max.sqrt();
        let kstep = step / (2.0 * kmax);
        let mut all = Vec::new();
        for order in [m, m + 1] {
            let ks = find_roots(
                |k| cross_product_det(order, k, geom.rho(), 1.0),
                SCAN_FLOOR,
                kmax,
                kstep,
                opts.root_tol / (2.0 * kmax),
                opts.execution,
            )?;
            all.extend(ks.into_iter().map(|k| k * k));
        }
        all.sort_by(|a, b| a.total_cmp(b));
        return Ok(all);
    }
    let problem = BoundaryProblem::new(geom, soi);
    find_roots(
        |e| problem.determinant(e, m),
        SCAN_FLOOR,
        eps_max,
        step,
        opts.root_tol * 0.1,
        opts.execution,
    )
}

fn validate_scan(eps_max: f64) -> Result<()> {
    if !(eps_max > 0.0 && eps_max.is_finite()) {
        return Err(Error::param("eps_max", format!("must be positive, got {eps_max}")));
    }
    Ok(())
}

/// Roots of `D` in `(0, eps_max]` for sector `m`, labelled provisionally by
/// pairing consecutive roots into doublets (lower member `−`).
pub fn scan_spectrum(
    m: i32,
    eps_max: f64,
    soi: SoiConstant,
    geom: RingGeometry,
    opts: &ScanOptions,
) -> Result<Vec<LevelStub>> {
    validate_scan(eps_max)?;
    let step = opts.step.unwrap_or_else(|| default_energy_step(m, geom));
    let roots = scan_roots(m, eps_max, soi, geom, step, opts)?;
    Ok(roots
        .iter()
        .enumerate()
        .map(|(i, &energy)| LevelStub {
            energy,
            label: ModeLabel {
                sector: AngularSector::new(m),
                n: i / 2 + 1,
                branch: if i % 2 == 0 { Branch::Minus } else { Branch::Plus },
            },
        })
        .collect())
}

/// Result of [`build_eigenmode`].
#[derive(Clone, Debug, PartialEq)]
pub enum ModeBuild {
    Single(Eigenmode),
    /// Accidental degeneracy: two independent null vectors.
    Degenerate(Eigenmode, Eigenmode),
}

impl ModeBuild {
    pub fn into_modes(self) -> Vec<Eigenmode> {
        match self {
            ModeBuild::Single(a) => vec![a],
            ModeBuild::Degenerate(a, b) => vec![a, b],
        }
    }
}

/// Null directions of the conditioned wall matrix, in raw coefficients.
pub(crate) fn null_vectors(raw: &Matrix4<f64>) -> Result<Vec<[f64; 4]>> {
    let (scaled, norms) = normalize_columns(raw);
    let svd = SVD::new(scaled, false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Numerical("SVD failed".into()))?;
    let mut order: Vec<usize> = (0..4).collect();
    let sv = svd.singular_values;
    order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    let smax = sv[order[3]];
    let ratio = sv[order[0]] / smax;
    if ratio > ROOT_RANK_TOLERANCE {
        return Err(Error::NotARoot { ratio });
    }
    let take = if sv[order[1]] / smax < DEGENERACY_TOLERANCE { 2 } else { 1 };
    Ok(order[..take]
        .iter()
        .map(|&i| {
            let row = v_t.row(i);
            [row[0] / norms[0], row[1] / norms[1], row[2] / norms[2], row[3] / norms[3]]
        })
        .collect())
}

/// Normalize, fix the sign, and certify a profile.
pub(crate) fn finalize_profile(
    profile: RadialProfile,
    geom: RingGeometry,
    q: &RadialQuadrature,
) -> Result<(RadialProfile, NormCertificate)> {
    let n2 = profile.norm_squared(q)?;
    if !(n2 > 0.0 && n2.is_finite()) {
        return Err(Error::Numerical("mode has zero norm".into()));
    }
    let mut profile = profile.scaled(1.0 / n2.sqrt());
    let samples = profile.uniform(geom.rho(), 512)?;
    let (su, sd) = samples
        .iter()
        .fold((0.0, 0.0), |(a, b), &(_, u, d)| (a + u * u, b + d * d));
    let dominant = |s: &(f64, f64, f64)| if su >= sd { s.1 } else { s.2 };
    let peak_sample = samples
        .iter()
        .max_by(|a, b| dominant(a).abs().total_cmp(&dominant(b).abs()))
        .copied()
        .unwrap_or((0.0, 0.0, 0.0));
    if dominant(&peak_sample) < 0.0 {
        profile = profile.scaled(-1.0);
    }
    let peak = samples
        .iter()
        .map(|&(_, u, d)| u.abs().max(d.abs()))
        .fold(0.0, f64::max);
    let (u0, d0) = profile.eval(geom.rho())?;
    let (u1, d1) = profile.eval(1.0)?;
    let wall = u0.abs().max(d0.abs()).max(u1.abs()).max(d1.abs());
    let norm_deviation = (profile.norm_squared(q)? - 1.0).abs();
    Ok((
        profile,
        NormCertificate {
            boundary_residual: wall / peak,
            norm_deviation,
        },
    ))
}

fn plus_family_weight(profile: &RadialProfile, q: &RadialQuadrature) -> Result<f64> {
    let c = profile.coeffs;
    let plus = RadialProfile {
        coeffs: [c[0], c[1], 0.0, 0.0],
        ..profile.clone()
    };
    let minus = RadialProfile {
        coeffs: [0.0, 0.0, c[2], c[3]],
        ..profile.clone()
    };
    let a = plus.norm_squared(q)?;
    let b = minus.norm_squared(q)?;
    Ok(a / (a + b))
}

/// Normalized eigenmode(s) at a root of `D`; labels are provisional until
/// [`label_sector`] assigns them from node counts.
pub fn build_eigenmode(
    eps_root: f64,
    m: i32,
    soi: SoiConstant,
    geom: RingGeometry,
    q: &RadialQuadrature,
) -> Result<ModeBuild> {
    let (kp, km) = wavenumbers_for_energy(eps_root, soi)?;
    let raw = boundary_matrix(m, kp, km, geom.rho(), 1.0)?;
    let nulls = null_vectors(&raw)?;
    let mut modes = Vec::with_capacity(nulls.len());
    for coeffs in nulls {
        let profile = RadialProfile {
            m,
            k_plus: kp,
            k_minus: km,
            coeffs,
        };
        let (profile, certificate) = finalize_profile(profile, geom, q)?;
        let plus_family_weight = plus_family_weight(&profile, q)?;
        modes.push(Eigenmode {
            label: ModeLabel {
                sector: AngularSector::new(m),
                n: 0,
                branch: Branch::Minus,
            },
            energy: eps_root,
            soi: soi.value(),
            rho: geom.rho(),
            k_plus: kp,
            k_minus: km,
            profile,
            certificate,
            plus_family_weight,
        });
    }
    if modes.len() == 2 {
        // Gram-Schmidt the degenerate pair
        let b = modes.pop().unwrap_or_else(|| unreachable!());
        let a = modes.pop().unwrap_or_else(|| unreachable!());
        let (a, b) = orthonormalize_pair(a, b, geom, q)?;
        return Ok(ModeBuild::Degenerate(a, b));
    }
    Ok(ModeBuild::Single(modes.pop().ok_or_else(|| Error::Numerical("no null vector".into()))?))
}

fn orthonormalize_pair(
    a: Eigenmode,
    mut b: Eigenmode,
    geom: RingGeometry,
    q: &RadialQuadrature,
) -> Result<(Eigenmode, Eigenmode)> {
    let sa = a.profile.sample(q)?;
    let sb = b.profile.sample(q)?;
    let overlap = crate::ring::spinor_inner_product(&sa, &sb, q)?.re;
    for (cb, ca) in b.profile.coeffs.iter_mut().zip(a.profile.coeffs) {
        *cb -= overlap * ca;
    }
    let (profile, certificate) = finalize_profile(b.profile.clone(), geom, q)?;
    b.profile = profile;
    b.certificate = certificate;
    Ok((a, b))
}

/// Interior radii where the dominant component changes sign.
pub fn count_radial_nodes(mode: &Eigenmode) -> Result<usize> {
    let rho = mode.rho;
    let samples = mode.profile.uniform(rho, 4096)?;
    let interior = &samples[1..samples.len() - 1];
    let (su, sd) = interior
        .iter()
        .fold((0.0, 0.0), |(a, b), &(_, u, d)| (a + u * u, b + d * d));
    let dom: Vec<(f64, f64)> = interior
        .iter()
        .map(|&(r, u, d)| (r, if su >= sd { u } else { d }))
        .collect();
    let peak = dom.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    let mut nodes = 0;
    for w in dom.windows(2) {
        if w[0].1.signum() != w[1].1.signum() && w[0].1 != 0.0 {
            nodes += 1;
        }
    }
    for w in dom.windows(3) {
        let (a, b, c) = (w[0].1.abs(), w[1].1.abs(), w[2].1.abs());
        if b < a && b < c && b < 1e-8 * peak && w[0].1.signum() == w[2].1.signum() {
            return Err(Error::AmbiguousNode { radius: w[1].0 });
        }
    }
    Ok(nodes)
}

/// All eigenmodes of one sector, labelled and sorted by energy.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorSpectrum {
    pub sector: AngularSector,
    pub modes: Vec<Eigenmode>,
    pub warnings: Vec<String>,
}

/// Assign `(n, ±)`: `n` from node counts, `±` by energy order inside a
/// radial doublet (lower is `−`); a lone member uses family dominance.
pub fn label_sector(modes: &mut [Eigenmode]) -> Result<Vec<String>> {
    let mut warnings = Vec::new();
    modes.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    let mut nodes = Vec::with_capacity(modes.len());
    for mode in modes.iter() {
        nodes.push(count_radial_nodes(mode)?);
    }
    let max_n = nodes.iter().copied().max().map_or(0, |n| n + 1);
    for n in 1..=max_n {
        let idx: Vec<usize> = (0..modes.len()).filter(|&i| nodes[i] + 1 == n).collect();
        match idx.len() {
            2 => {
                modes[idx[0]].label.branch = Branch::Minus;
                modes[idx[1]].label.branch = Branch::Plus;
            }
            1 => {
                let mode = &mut modes[idx[0]];
                mode.label.branch = if mode.plus_family_weight > 0.5 { Branch::Plus } else { Branch::Minus };
                if n < max_n {
                    warnings.push(format!("radial level n = {n} has a single member at ε = {}", mode.energy));
                }
            }
            0 => warnings.push(format!("no mode with n = {n}; rescan suggested")),
            k => {
                warnings.push(format!("{k} modes share n = {n}; labelling by energy order"));
                for (j, &i) in idx.iter().enumerate() {
                    modes[i].label.branch = if j % 2 == 0 { Branch::Minus } else { Branch::Plus };
                }
            }
        }
        for &i in &idx {
            modes[i].label.n = n;
        }
    }
    Ok(warnings)
}

fn incomplete_doublets(modes: &[Eigenmode]) -> bool {
    let max_n = modes.iter().map(|m| m.label.n).max().unwrap_or(0);
    (1..max_n).any(|n| modes.iter().filter(|m| m.label.n == n).count() != 2)
}

/// Scan, build, and label every mode of sector `m` below `eps_max`.
pub fn solve_sector(
    m: i32,
    eps_max: f64,
    soi: SoiConstant,
    geom: RingGeometry,
    opts: &ScanOptions,
) -> Result<SectorSpectrum> {
    validate_scan(eps_max)?;
    let mut step = opts.step.unwrap_or_else(|| default_energy_step(m, geom));
    let mut refinements = 0;
    loop {
        let roots = scan_roots(m, eps_max, soi, geom, step, opts)?;
        let highest = roots.last().copied();
        let q = choose_quadrature(highest, m, soi, geom, opts)?;
        let builds = opts
            .execution
            .map(&roots, |&e| build_eigenmode(e, m, soi, geom, &q).map(|b| b.into_modes()));
        let mut modes = Vec::new();
        for b in builds {
            modes.extend(b?);
        }
        let mut warnings = label_sector(&mut modes)?;
        if incomplete_doublets(&modes) && refinements < opts.max_refinements {
            refinements += 1;
            step *= 0.5;
            continue;
        }
        if incomplete_doublets(&modes) {
            warnings.push(format!("sector m = {m}: incomplete doublets after {refinements} step halvings"));
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        return Ok(SectorSpectrum {
            sector: AngularSector::new(m),
            modes,
            warnings,
        });
    }
}

/// Quadrature order doubled until the norm of the highest mode is stable.
fn choose_quadrature(
    highest: Option<f64>,
    m: i32,
    soi: SoiConstant,
    geom: RingGeometry,
    opts: &ScanOptions,
) -> Result<RadialQuadrature> {
    let Some(eps) = highest else {
        return make_quadrature(opts.quadrature_order, geom);
    };
    let (kp, km) = wavenumbers_for_energy(eps, soi)?;
    let raw = boundary_matrix(m, kp, km, geom.rho(), 1.0)?;
    let coeffs = null_vectors(&raw)?[0];
    let profile = RadialProfile {
        m,
        k_plus: kp,
        k_minus: km,
        coeffs,
    };
    let base = profile.norm_squared(&make_quadrature(opts.quadrature_order, geom)?)?;
    RadialQuadrature::refined(geom, opts.quadrature_order, 1e-10, 1024, |q| {
        profile.norm_squared(q).map(|v| v / base).unwrap_or(f64::NAN)
    })
    .or_else(|_| make_quadrature(1024, geom))
}

/// Modes of every sector in `m_range`, merged and sorted by `(m, energy)`.
pub fn solve_spectrum(
    m_range: std::ops::RangeInclusive<i32>,
    eps_max: f64,
    soi: SoiConstant,
    geom: RingGeometry,
    opts: &ScanOptions,
) -> Result<Vec<SectorSpectrum>> {
    let ms: Vec<i32> = m_range.collect();
    let out = opts.execution.map(&ms, |&m| solve_sector(m, eps_max, soi, geom, opts));
    let mut out: Vec<SectorSpectrum> = out.into_iter().collect::<Result<_>>()?;
    out.sort_by_key(|s| s.sector);
    Ok(out)
}

/// Energy ordering helper for merged spectra.
pub fn by_energy(a: &Eigenmode, b: &Eigenmode) -> Ordering {
    a.energy.total_cmp(&b.energy).then(a.label.cmp(&b.label))
}
