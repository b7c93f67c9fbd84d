//! State preparation, expansion in static or Floquet modes, time evolution
//! and observables.
//!
//! A basis element is a real radial profile in one `κ` sector times a
//! scalar phase law: `e^{−iετ}` for static modes, `e^{−ik²τ}e^{∓iθ(τ)}` for
//! Floquet modes. Expansion coefficients therefore stay constant and all time
//! dependence lives in the phases.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::floquet::{Drive, FloquetMode};
use crate::ring::{PolarGrid, RingGeometry};
use crate::spectrum::{Branch, Eigenmode, ModeLabel, RadialProfile};

/// Spinor samples on a [`PolarGrid`], index `ir * n_phi + jphi`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinorField {
    pub grid: PolarGrid,
    pub up: Vec<Complex64>,
    pub down: Vec<Complex64>,
    pub tau: f64,
}

impl SpinorField {
    pub fn zeros(grid: PolarGrid, tau: f64) -> Self {
        let n = grid.len();
        SpinorField {
            grid,
            up: vec![Complex64::new(0.0, 0.0); n],
            down: vec![Complex64::new(0.0, 0.0); n],
            tau,
        }
    }

    pub fn index(&self, ir: usize, jphi: usize) -> usize {
        ir * self.grid.n_phi + jphi
    }

    /// `∫∫ (|a|² + |b|²) r dr dφ` with the trapezoid rule in `φ`.
    pub fn norm_squared(&self) -> f64 {
        let dphi = 2.0 * PI / self.grid.n_phi as f64;
        let q = &self.grid.radial;
        let mut acc = 0.0;
        for ir in 0..q.len() {
            let w = q.weights[ir] * q.nodes[ir] * dphi;
            let row = ir * self.grid.n_phi..(ir + 1) * self.grid.n_phi;
            let s: f64 = self.up[row.clone()]
                .iter()
                .zip(&self.down[row])
                .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
                .sum();
            acc += w * s;
        }
        acc
    }

    fn scale(&mut self, s: f64) {
        for v in self.up.iter_mut().chain(self.down.iter_mut()) {
            *v *= s;
        }
    }

    /// Azimuthal Fourier amplitudes `(â_m(r), b̂_m(r))`, normalized so that
    /// `a(r, φ) = Σ_m â_m(r) e^{imφ}`.
    pub fn azimuthal_modes(&self) -> (Vec<Vec<Complex64>>, Vec<Vec<Complex64>>) {
        let n = self.grid.n_phi;
        let fft = FftPlanner::new().plan_fft_forward(n);
        let inv = 1.0 / n as f64;
        let transform = |data: &[Complex64]| -> Vec<Vec<Complex64>> {
            data.chunks(n)
                .map(|row| {
                    let mut buf = row.to_vec();
                    fft.process(&mut buf);
                    buf.iter().map(|v| v * inv).collect()
                })
                .collect()
        };
        (transform(&self.up), transform(&self.down))
    }

    /// Weight of each `κ` sector, keyed by `m`.
    pub fn sector_weights(&self) -> BTreeMap<i32, f64> {
        let (a, b) = self.azimuthal_modes();
        let n = self.grid.n_phi as i32;
        let q = &self.grid.radial;
        let mut out = BTreeMap::new();
        for idx in 0..n {
            // m in the symmetric range (-n/2, n/2]
            let m = if idx > n / 2 { idx - n } else { idx };
            let ia = m.rem_euclid(n) as usize;
            let ib = (m + 1).rem_euclid(n) as usize;
            let mut w = 0.0;
            for ir in 0..q.len() {
                w += q.weights[ir] * q.nodes[ir] * (a[ir][ia].norm_sqr() + b[ir][ib].norm_sqr());
            }
            out.insert(m, 2.0 * PI * w);
        }
        out
    }

    /// `∫ ρ(r, φ) r dr` at each azimuthal node.
    pub fn angular_density(&self) -> Vec<f64> {
        let q = &self.grid.radial;
        (0..self.grid.n_phi)
            .map(|j| {
                (0..q.len())
                    .map(|ir| {
                        let i = self.index(ir, j);
                        q.weights[ir] * q.nodes[ir] * (self.up[i].norm_sqr() + self.down[i].norm_sqr())
                    })
                    .sum()
            })
            .collect()
    }
}

/// Initial wave packet with its diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct Packet {
    pub field: SpinorField,
    pub warnings: Vec<String>,
}

/// Parameters of a masked Gaussian packet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub r_c: f64,
    pub phi_c: f64,
    pub sigma_r: f64,
    pub sigma_phi: f64,
    /// Spin state `(a, b)`; normalized internally.
    pub spin: [Complex64; 2],
}

fn wrapped_distance(phi: f64, phi_c: f64) -> f64 {
    (phi - phi_c + PI).rem_euclid(2.0 * PI) - PI
}

/// Gaussian in `r` and wrapped `φ`, times `sin(π(r − ρ)/(1 − ρ))`, times a
/// fixed spinor, normalized on the grid.
pub fn gaussian_packet(spec: &GaussianSpec, geom: RingGeometry, grid: &PolarGrid) -> Result<Packet> {
    if !(spec.r_c > geom.rho() && spec.r_c < 1.0) {
        return Err(Error::param("r_c", format!("packet centre must lie inside ({}, 1), got {}", geom.rho(), spec.r_c)));
    }
    if !(spec.sigma_r > 0.0 && spec.sigma_phi > 0.0) {
        return Err(Error::param("sigma", "packet widths must be positive"));
    }
    let sn = (spec.spin[0].norm_sqr() + spec.spin[1].norm_sqr()).sqrt();
    if !(sn > 0.0 && sn.is_finite()) {
        return Err(Error::param("spin", "spin state must be non-zero"));
    }
    let spin = [spec.spin[0] / sn, spec.spin[1] / sn];
    let mut field = SpinorField::zeros(grid.clone(), 0.0);
    let width = geom.width();
    for (ir, &r) in grid.radial.nodes.iter().enumerate() {
        let radial = (-(r - spec.r_c).powi(2) / (4.0 * spec.sigma_r.powi(2))).exp()
            * (PI * (r - geom.rho()) / width).sin();
        for j in 0..grid.n_phi {
            let d = wrapped_distance(grid.phi(j), spec.phi_c);
            let g = radial * (-d * d / (4.0 * spec.sigma_phi.powi(2))).exp();
            let i = field.index(ir, j);
            field.up[i] = spin[0] * g;
            field.down[i] = spin[1] * g;
        }
    }
    let n2 = field.norm_squared();
    if n2.is_nan() || n2 <= 0.0 {
        return Err(Error::Numerical("packet has zero norm on the grid".into()));
    }
    field.scale(1.0 / n2.sqrt());
    let mut warnings = Vec::new();
    let outside = radial_mass_outside(spec, geom);
    if outside > 1e-6 {
        warnings.push(format!(
            "{outside:.3e} of the unmasked radial Gaussian lies outside the annulus; the wall mask reshapes the packet"
        ));
    }
    Ok(Packet { field, warnings })
}

/// Fraction of `∫ exp(−(r − r_c)²/2σ²) r dr` outside `[ρ, 1]`.
fn radial_mass_outside(spec: &GaussianSpec, geom: RingGeometry) -> f64 {
    let lo = (spec.r_c - 12.0 * spec.sigma_r).max(0.0);
    let hi = spec.r_c + 12.0 * spec.sigma_r;
    let n = 20_000;
    let h = (hi - lo) / n as f64;
    let (mut total, mut inside) = (0.0, 0.0);
    for i in 0..=n {
        let r = lo + h * i as f64;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        let v = w * r * (-(r - spec.r_c).powi(2) / (2.0 * spec.sigma_r.powi(2))).exp();
        total += v;
        if geom.contains(r) {
            inside += v;
        }
    }
    1.0 - inside / total
}

/// Time dependence of a basis element.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PhaseLaw {
    Static { energy: f64 },
    Floquet { k: f64, branch: Branch, drive: Drive },
}

impl PhaseLaw {
    pub fn phase(&self, tau: f64) -> Complex64 {
        match *self {
            PhaseLaw::Static { energy } => Complex64::from_polar(1.0, -energy * tau),
            PhaseLaw::Floquet { k, branch, drive } => {
                Complex64::from_polar(1.0, -k * k * tau - branch.sign() * drive.theta(k, tau))
            }
        }
    }

    /// `ε` or `k²`.
    pub fn energy(&self) -> f64 {
        match *self {
            PhaseLaw::Static { energy } => energy,
            PhaseLaw::Floquet { k, .. } => k * k,
        }
    }
}

/// A normalized mode with its phase law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisElement {
    pub label: ModeLabel,
    pub profile: RadialProfile,
    pub law: PhaseLaw,
}

impl BasisElement {
    pub fn m(&self) -> i32 {
        self.profile.m
    }
}

impl From<&Eigenmode> for BasisElement {
    fn from(mode: &Eigenmode) -> Self {
        BasisElement {
            label: mode.label,
            profile: mode.profile.clone(),
            law: PhaseLaw::Static { energy: mode.energy },
        }
    }
}

impl From<&FloquetMode> for BasisElement {
    fn from(mode: &FloquetMode) -> Self {
        BasisElement {
            label: mode.root.label,
            profile: mode.profile.clone(),
            law: PhaseLaw::Floquet {
                k: mode.root.k,
                branch: mode.root.label.branch,
                drive: mode.drive,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Static,
    Floquet,
}

/// Extent of the retained basis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub m_min: i32,
    pub m_max: i32,
    pub n_max: usize,
}

impl Truncation {
    fn of(elements: &[BasisElement]) -> Self {
        Truncation {
            m_min: elements.iter().map(|e| e.m()).min().unwrap_or(0),
            m_max: elements.iter().map(|e| e.m()).max().unwrap_or(0),
            n_max: elements.iter().map(|e| e.label.n).max().unwrap_or(0),
        }
    }
}

/// Coefficients `β` of a state in a mode basis, with cached radial samples.
#[derive(Clone, Debug)]
pub struct StateExpansion {
    pub basis_kind: BasisKind,
    pub elements: Vec<BasisElement>,
    pub coefficients: Vec<Complex64>,
    pub captured_norm: f64,
    pub truncation: Truncation,
    pub warnings: Vec<String>,
    pub grid: PolarGrid,
    radial: Vec<(Vec<f64>, Vec<f64>)>,
}

fn sample_elements(elements: &[BasisElement], grid: &PolarGrid, exec: Execution) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    exec.map(elements, |e| {
        let mut up = Vec::with_capacity(grid.n_r());
        let mut down = Vec::with_capacity(grid.n_r());
        for &r in &grid.radial.nodes {
            let (u, d) = e.profile.eval(r)?;
            up.push(u);
            down.push(d);
        }
        Ok((up, down))
    })
    .into_iter()
    .collect()
}

fn check_grid(elements: &[BasisElement], grid: &PolarGrid) -> Result<()> {
    let max_abs = elements
        .iter()
        .map(|e| e.m().unsigned_abs().max((e.m() + 1).unsigned_abs()))
        .max()
        .unwrap_or(0) as usize;
    if 2 * max_abs + 1 >= grid.n_phi {
        return Err(Error::Contract(format!(
            "{} azimuthal nodes cannot represent angular momentum {max_abs}",
            grid.n_phi
        )));
    }
    Ok(())
}

impl StateExpansion {
    /// Expansion with prescribed coefficients.
    pub fn from_coefficients(
        basis_kind: BasisKind,
        elements: Vec<BasisElement>,
        coefficients: Vec<Complex64>,
        grid: PolarGrid,
    ) -> Result<Self> {
        if elements.len() != coefficients.len() {
            return Err(Error::Contract("one coefficient per basis element required".into()));
        }
        check_grid(&elements, &grid)?;
        let radial = sample_elements(&elements, &grid, Execution::Sequential)?;
        let captured_norm = coefficients.iter().map(|c| c.norm_sqr()).sum();
        Ok(StateExpansion {
            basis_kind,
            truncation: Truncation::of(&elements),
            elements,
            coefficients,
            captured_norm,
            warnings: Vec::new(),
            grid,
            radial,
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Coefficient of the element with this label, if present.
    pub fn coefficient(&self, label: &ModeLabel) -> Option<Complex64> {
        self.elements
            .iter()
            .position(|e| &e.label == label)
            .map(|i| self.coefficients[i])
    }

    /// `Σ|β|²` grouped by sector.
    pub fn sector_weights(&self) -> BTreeMap<i32, f64> {
        let mut out = BTreeMap::new();
        for (e, c) in self.elements.iter().zip(&self.coefficients) {
            *out.entry(e.m()).or_insert(0.0) += c.norm_sqr();
        }
        out
    }
}

/// Options for [`expand_state`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpandOptions {
    /// Warn when `captured_norm < 1 − norm_tolerance`.
    pub norm_tolerance: f64,
    pub execution: Execution,
}

impl Default for ExpandOptions {
    fn default() -> Self {
        ExpandOptions {
            norm_tolerance: 1e-3,
            execution: Execution::Parallel,
        }
    }
}

/// `β_i = ⟨ψ_i|ψ₀⟩` for every basis element.
pub fn expand_state(
    psi0: &SpinorField,
    basis_kind: BasisKind,
    elements: Vec<BasisElement>,
    opts: &ExpandOptions,
) -> Result<StateExpansion> {
    let grid = psi0.grid.clone();
    check_grid(&elements, &grid)?;
    let radial = sample_elements(&elements, &grid, opts.execution)?;
    let (a, b) = psi0.azimuthal_modes();
    let q = &grid.radial;
    let coefficients: Vec<Complex64> = opts.execution.map_range(elements.len(), |i| {
        let m = elements[i].m();
        let ia = grid.fourier_index(m);
        let ib = grid.fourier_index(m + 1);
        let (u, d) = &radial[i];
        let mut acc = Complex64::new(0.0, 0.0);
        for ir in 0..q.len() {
            acc += q.weights[ir] * q.nodes[ir] * (u[ir] * a[ir][ia] + d[ir] * b[ir][ib]);
        }
        2.0 * PI * acc
    });
    let captured_norm: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
    let truncation = Truncation::of(&elements);
    let mut warnings = Vec::new();
    if captured_norm < 1.0 - opts.norm_tolerance {
        warnings.push(format!(
            "basis captures only {captured_norm:.6} of the state norm; widen the sector range beyond m = {}..{} or raise the energy cutoff above n = {}",
            truncation.m_min, truncation.m_max, truncation.n_max
        ));
    }
    if captured_norm > 1.0 + 1e-9 * psi0.norm_squared().max(1.0) {
        warnings.push(format!("captured norm {captured_norm} exceeds the state norm; basis is not orthonormal on this grid"));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(StateExpansion {
        basis_kind,
        elements,
        coefficients,
        captured_norm,
        truncation,
        warnings,
        grid,
        radial,
    })
}

/// `Ψ(τ)` on the expansion grid.
pub fn evolve(exp: &StateExpansion, tau: f64) -> SpinorField {
    let grid = &exp.grid;
    let n = grid.n_phi;
    let nr = grid.n_r();
    let zero = Complex64::new(0.0, 0.0);
    let mut a_hat = vec![vec![zero; n]; nr];
    let mut b_hat = vec![vec![zero; n]; nr];
    for (i, e) in exp.elements.iter().enumerate() {
        let c = exp.coefficients[i] * e.law.phase(tau);
        let ia = grid.fourier_index(e.m());
        let ib = grid.fourier_index(e.m() + 1);
        let (u, d) = &exp.radial[i];
        for ir in 0..nr {
            a_hat[ir][ia] += c * u[ir];
            b_hat[ir][ib] += c * d[ir];
        }
    }
    let ifft = FftPlanner::new().plan_fft_inverse(n);
    let mut field = SpinorField::zeros(grid.clone(), tau);
    for ir in 0..nr {
        ifft.process(&mut a_hat[ir]);
        ifft.process(&mut b_hat[ir]);
        let row = ir * n;
        field.up[row..row + n].copy_from_slice(&a_hat[ir]);
        field.down[row..row + n].copy_from_slice(&b_hat[ir]);
    }
    field
}

/// Pointwise density and spin field, `S = σ/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Observables {
    pub density: Vec<f64>,
    pub sx: Vec<f64>,
    pub sy: Vec<f64>,
    pub sz: Vec<f64>,
}

/// `(ρ, Sx, Sy, Sz)` of a single spinor `(a, b)`.
pub fn local_observables(a: Complex64, b: Complex64) -> [f64; 4] {
    let ab = a.conj() * b;
    [
        a.norm_sqr() + b.norm_sqr(),
        ab.re,
        ab.im,
        0.5 * (a.norm_sqr() - b.norm_sqr()),
    ]
}

pub fn observables(psi: &SpinorField) -> Observables {
    let n = psi.up.len();
    let mut out = Observables {
        density: Vec::with_capacity(n),
        sx: Vec::with_capacity(n),
        sy: Vec::with_capacity(n),
        sz: Vec::with_capacity(n),
    };
    for (&a, &b) in psi.up.iter().zip(&psi.down) {
        let [rho, sx, sy, sz] = local_observables(a, b);
        out.density.push(rho);
        out.sx.push(sx);
        out.sy.push(sy);
        out.sz.push(sz);
    }
    out
}

/// Which observable a time series records.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Observable {
    Density,
    Sx,
    Sy,
    Sz,
}

impl Observable {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "density" | "rho" => Ok(Observable::Density),
            "sx" => Ok(Observable::Sx),
            "sy" => Ok(Observable::Sy),
            "sz" => Ok(Observable::Sz),
            other => Err(Error::param("observable", format!("unknown observable `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Observable::Density => "density",
            Observable::Sx => "sx",
            Observable::Sy => "sy",
            Observable::Sz => "sz",
        }
    }

    fn pick(self, v: [f64; 4]) -> f64 {
        v[self as usize]
    }
}

/// Spinor `Ψ(r, φ, τ)` at a single point.
pub fn point_spinor(exp: &StateExpansion, r: f64, phi: f64, tau: f64) -> Result<[Complex64; 2]> {
    let mut out = [Complex64::new(0.0, 0.0); 2];
    for (e, c) in exp.elements.iter().zip(&exp.coefficients) {
        let [a, b] = e.profile.spinor(r, phi)?;
        let p = c * e.law.phase(tau);
        out[0] += p * a;
        out[1] += p * b;
    }
    Ok(out)
}

/// Observable at a probe point sampled on `taus`.
pub fn time_series(
    exp: &StateExpansion,
    probe: (f64, f64),
    observable: Observable,
    taus: &[f64],
    geom: RingGeometry,
    exec: Execution,
) -> Result<Vec<f64>> {
    let (r, phi) = probe;
    if !geom.contains(r) || !phi.is_finite() {
        return Err(Error::Domain(format!("probe ({r}, {phi}) lies outside the annulus")));
    }
    let spatial: Vec<[Complex64; 2]> = exp
        .elements
        .iter()
        .map(|e| e.profile.spinor(r, phi))
        .collect::<Result<_>>()?;
    Ok(exec.map(taus, |&t| {
        let mut a = Complex64::new(0.0, 0.0);
        let mut b = Complex64::new(0.0, 0.0);
        for ((e, c), s) in exp.elements.iter().zip(&exp.coefficients).zip(&spatial) {
            let p = c * e.law.phase(t);
            a += p * s[0];
            b += p * s[1];
        }
        observable.pick(local_observables(a, b))
    }))
}

/// `|⟨Ψ(0)|Ψ(τ)⟩|` from coefficients and phases.
pub fn autocorrelation(exp: &StateExpansion, taus: &[f64], exec: Execution) -> Vec<f64> {
    exec.map(taus, |&t| {
        exp.elements
            .iter()
            .zip(&exp.coefficients)
            .map(|(e, c)| c.norm_sqr() * e.law.phase(t))
            .sum::<Complex64>()
            .norm()
    })
}

/// Uniform grid `0, dt, …, (n − 1)dt`.
pub fn uniform_times(dt: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 * dt).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rect,
    Hann,
}

/// Options for [`fourier_spectrum`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierOptions {
    pub window: Window,
    pub remove_mean: bool,
    /// Highest angular frequency the series is expected to carry.
    pub max_frequency: Option<f64>,
    /// Slowest beat period the series must resolve (≥ 8 periods required).
    pub beat_period: Option<f64>,
}

impl Default for FourierOptions {
    fn default() -> Self {
        FourierOptions {
            window: Window::Rect,
            remove_mean: true,
            max_frequency: None,
            beat_period: None,
        }
    }
}

/// One-sided magnitude spectrum, peak-normalized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencySpectrum {
    /// Angular frequencies in units of `Ω`.
    pub frequencies: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub window: Window,
    pub dt: f64,
    pub samples: usize,
}

/// A local maximum of a spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub bin: usize,
    pub frequency: f64,
    pub magnitude: f64,
}

impl FrequencySpectrum {
    /// Bin spacing in angular frequency.
    pub fn resolution(&self) -> f64 {
        2.0 * PI / (self.samples as f64 * self.dt)
    }

    /// Local maxima with normalized magnitude above `threshold`.
    pub fn peaks(&self, threshold: f64) -> Vec<Peak> {
        let m = &self.magnitudes;
        (0..m.len())
            .filter(|&i| {
                let left = if i == 0 { 0.0 } else { m[i - 1] };
                let right = m.get(i + 1).copied().unwrap_or(0.0);
                m[i] > threshold && m[i] >= left && m[i] >= right
            })
            .map(|i| Peak {
                bin: i,
                frequency: self.frequencies[i],
                magnitude: m[i],
            })
            .collect()
    }
}

/// FFT magnitude spectrum of a uniformly sampled real series.
pub fn fourier_spectrum(series: &[f64], dt: f64, opts: &FourierOptions) -> Result<FrequencySpectrum> {
    let n = series.len();
    if n < 2 {
        return Err(Error::Sampling("need at least two samples".into()));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("sampling step must be positive, got {dt}")));
    }
    let nyquist = PI / dt;
    if let Some(f) = opts.max_frequency {
        if f >= nyquist {
            return Err(Error::Sampling(format!(
                "expected content up to {f} exceeds the Nyquist frequency {nyquist} of step {dt}"
            )));
        }
    }
    if let Some(p) = opts.beat_period {
        let duration = n as f64 * dt;
        if duration < 8.0 * p {
            return Err(Error::Sampling(format!(
                "series of length {duration} covers fewer than 8 beat periods of {p}"
            )));
        }
    }
    let mean = if opts.remove_mean {
        series.iter().sum::<f64>() / n as f64
    } else {
        0.0
    };
    let mut buf: Vec<Complex64> = series
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let w = match opts.window {
                Window::Rect => 1.0,
                Window::Hann => 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos(),
            };
            Complex64::new((v - mean) * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2 + 1;
    let mut magnitudes: Vec<f64> = buf[..half].iter().map(|c| c.norm()).collect();
    let peak = magnitudes.iter().copied().fold(0.0, f64::max);
    // roundoff-level residue of a removed constant is not a spectrum
    let scale = series.iter().map(|v| v.abs()).fold(0.0, f64::max) * n as f64;
    if peak > 1e-13 * scale {
        for m in &mut magnitudes {
            *m /= peak;
        }
    } else {
        magnitudes.iter_mut().for_each(|m| *m = 0.0);
    }
    let df = 2.0 * PI / (n as f64 * dt);
    Ok(FrequencySpectrum {
        frequencies: (0..half).map(|i| i as f64 * df).collect(),
        magnitudes,
        window: opts.window,
        dt,
        samples: n,
    })
}

/// Centered boxcar average over `window` (time units), with symmetric
/// reflection at both ends so the output has the input length.
pub fn moving_average(series: &[f64], dt: f64, window: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && window > 0.0) {
        return Err(Error::param("window", "window and step must be positive"));
    }
    let half = ((window / dt - 1.0) / 2.0).round().max(0.0) as usize;
    let width = 2 * half + 1;
    if half == 0 || width > series.len() {
        return Err(Error::param(
            "window",
            format!("window {window} spans {width} samples; need 3..={}", series.len()),
        ));
    }
    let n = series.len() as isize;
    let at = |i: isize| -> f64 {
        let j = if i < 0 {
            -i
        } else if i >= n {
            2 * (n - 1) - i
        } else {
            i
        };
        series[j as usize]
    };
    Ok((0..n)
        .map(|i| {
            let s: f64 = (i - half as isize..=i + half as isize).map(at).sum();
            s / width as f64
        })
        .collect())
}

/// Share of AC power in each harmonic `j ν` (j = 1, 2, …) of a series
/// sampled over an integer number of drive periods.
pub fn harmonic_power_fractions(series: &[f64], dt: f64, nu: f64, harmonics: usize) -> Result<Vec<f64>> {
    let n = series.len();
    let duration = n as f64 * dt;
    let periods = duration * nu / (2.0 * PI);
    if (periods - periods.round()).abs() > 1e-6 || periods.round() < 1.0 {
        return Err(Error::Sampling(format!(
            "series spans {periods} drive periods; an integer number is required"
        )));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = series.iter().map(|&v| Complex64::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let total: f64 = buf[1..].iter().map(|c| c.norm_sqr()).sum();
    if total == 0.0 {
        return Ok(vec![0.0; harmonics]);
    }
    let p = periods.round() as usize;
    Ok((1..=harmonics)
        .map(|j| {
            let bin = j * p;
            if bin >= n / 2 {
                0.0
            } else {
                2.0 * buf[bin].norm_sqr() / total
            }
        })
        .collect())
}

/// How a revival time was estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RevivalMethod {
    /// Weighted curvature of the level families `E(κ)`.
    Curvature,
    /// Twice the weighted RMS spread of the populated energies.
    RmsWidth,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevivalEstimate {
    pub t_r: f64,
    pub delta_omega: f64,
    pub method: RevivalMethod,
}

/// `T_r ≈ 2π/Δω`.
///
/// Where the packet populates at least three consecutive `κ` in some
/// `(n, ±)` family, `Δω = |E''|/2` with `E''` the weight-averaged second
/// difference of the family energies in `κ`; the quadratic term of the
/// energies then rephases after `T_r`. Otherwise `Δω` is twice the weighted
/// RMS spread of the energies, which gives `2π/Δ` for two equal modes.
pub fn revival_estimate(exp: &StateExpansion) -> Result<RevivalEstimate> {
    let weights: Vec<f64> = exp.coefficients.iter().map(|c| c.norm_sqr()).collect();
    let energies: Vec<f64> = exp.elements.iter().map(|e| e.law.energy()).collect();
    let distinct = energies
        .iter()
        .zip(&weights)
        .filter(|(_, &w)| w > 1e-12)
        .any(|(e, _)| (e - energies[0]).abs() > 1e-12 * e.abs().max(1.0));
    if !distinct {
        return Err(Error::Domain("revival time needs at least two distinct populated frequencies".into()));
    }
    let mut families: BTreeMap<(usize, Branch), BTreeMap<i32, (f64, f64)>> = BTreeMap::new();
    for ((e, &w), &en) in exp.elements.iter().zip(&weights).zip(&energies) {
        families
            .entry((e.label.n, e.label.branch))
            .or_default()
            .insert(e.m(), (en, w));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for fam in families.values() {
        for (&m, &(e0, w0)) in fam {
            if let (Some(&(el, wl)), Some(&(er, wr))) = (fam.get(&(m - 1)), fam.get(&(m + 1))) {
                let w = w0.min(wl).min(wr);
                num += w * (er - 2.0 * e0 + el);
                den += w;
            }
        }
    }
    let total: f64 = weights.iter().sum();
    if den > 1e-6 * total && num != 0.0 {
        let delta_omega = (num / den).abs() / 2.0;
        return Ok(RevivalEstimate {
            t_r: 2.0 * PI / delta_omega,
            delta_omega,
            method: RevivalMethod::Curvature,
        });
    }
    let mean = energies.iter().zip(&weights).map(|(e, w)| e * w).sum::<f64>() / total;
    let var = energies
        .iter()
        .zip(&weights)
        .map(|(e, w)| w * (e - mean).powi(2))
        .sum::<f64>()
        / total;
    let delta_omega = 2.0 * var.sqrt();
    Ok(RevivalEstimate {
        t_r: 2.0 * PI / delta_omega,
        delta_omega,
        method: RevivalMethod::RmsWidth,
    })
}

/// Number of circular runs where `values >= frac · max`.
pub fn count_lobes(values: &[f64], frac: f64) -> usize {
    let max = values.iter().copied().fold(f64::MIN, f64::max);
    if values.is_empty() || max <= 0.0 {
        return 0;
    }
    let above: Vec<bool> = values.iter().map(|&v| v >= frac * max).collect();
    if above.iter().all(|&a| a) {
        return 1;
    }
    let n = above.len();
    (0..n).filter(|&i| above[i] && !above[(i + n - 1) % n]).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::make_quadrature;

    #[test]
    fn observables_of_simple_spinors() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let [rho, sx, sy, sz] = local_observables(Complex64::new(s, 0.0), Complex64::new(s, 0.0));
        assert!((rho - 1.0).abs() < 1e-15 && (sx - 0.5).abs() < 1e-15 && sy.abs() < 1e-15 && sz.abs() < 1e-15);
        let [rho, sx, sy, sz] = local_observables(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        assert_eq!([rho, sx, sy, sz], [1.0, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn fourier_of_constant_and_cosine() {
        let c = vec![2.0; 64];
        let opts = FourierOptions {
            remove_mean: false,
            ..Default::default()
        };
        let s = fourier_spectrum(&c, 0.1, &opts).unwrap();
        assert_eq!(s.peaks(1e-12).len(), 1);
        assert_eq!(s.peaks(1e-12)[0].bin, 0);
        let dt = 0.05;
        let w = 2.0 * PI * 5.0 / (256.0 * dt);
        let x: Vec<f64> = (0..256).map(|i| 1.0 + (w * i as f64 * dt).cos()).collect();
        let s = fourier_spectrum(&x, dt, &FourierOptions::default()).unwrap();
        let p = s.peaks(1e-9);
        assert_eq!(p.len(), 1);
        assert!((p[0].frequency - w).abs() < 1e-12);
        let bad = FourierOptions {
            max_frequency: Some(100.0),
            ..Default::default()
        };
        assert!(matches!(fourier_spectrum(&x, dt, &bad), Err(Error::Sampling(_))));
    }

    #[test]
    fn moving_average_kills_full_periods() {
        let dt = 0.01;
        let width = 101;
        let w = 2.0 * PI / (width as f64 * dt);
        let x: Vec<f64> = (0..2000).map(|i| (w * i as f64 * dt).cos()).collect();
        let y = moving_average(&x, dt, width as f64 * dt).unwrap();
        assert_eq!(y.len(), x.len());
        for v in &y[60..1940] {
            assert!(v.abs() < 1e-12);
        }
        let c = moving_average(&[3.0; 50], 0.1, 0.5).unwrap();
        assert!(c.iter().all(|&v| (v - 3.0).abs() < 1e-15));
        assert!(moving_average(&x, dt, 0.001).is_err());
    }

    #[test]
    fn lobes_are_circular() {
        assert_eq!(count_lobes(&[1.0, 0.0, 0.0, 1.0], 0.5), 1);
        assert_eq!(count_lobes(&[1.0, 0.0, 1.0, 0.0], 0.5), 2);
        assert_eq!(count_lobes(&[1.0; 8], 0.5), 1);
    }

    #[test]
    fn packet_vanishes_at_walls_and_is_normalized() {
        let geom = RingGeometry::new(0.6).unwrap();
        let grid = PolarGrid::new(make_quadrature(48, geom).unwrap(), 64, 10).unwrap();
        let spec = GaussianSpec {
            r_c: 0.8,
            phi_c: 0.3,
            sigma_r: 0.03,
            sigma_phi: 0.3,
            spin: [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)],
        };
        let p = gaussian_packet(&spec, geom, &grid).unwrap();
        assert!((p.field.norm_squared() - 1.0).abs() < 1e-12);
        assert!(p.warnings.is_empty());
        let wide = GaussianSpec { sigma_r: 0.3, ..spec };
        assert!(!gaussian_packet(&wide, geom, &grid).unwrap().warnings.is_empty());
        assert!(gaussian_packet(&GaussianSpec { r_c: 0.5, ..spec }, geom, &grid).is_err());
    }
}
