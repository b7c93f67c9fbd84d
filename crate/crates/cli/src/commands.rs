use std::collections::BTreeSet;
use std::path::Path;

use anyhow::Context;
use num_complex::Complex64;
use rashba_ring::config::{BasisChoice, RunConfig, RunMode, StateChoice};
use rashba_ring::dynamics::{
    autocorrelation, count_lobes, evolve, expand_state, fourier_spectrum, gaussian_packet, harmonic_power_fractions,
    local_observables, moving_average, observables, revival_estimate, time_series, BasisElement, BasisKind,
    ExpandOptions, FourierOptions, GaussianSpec, Observable, PhaseLaw, StateExpansion, Window,
};
use rashba_ring::floquet::{build_floquet_mode, scan_floquet_sectors, sideband_weights, Drive, FloquetScanOptions};
use rashba_ring::io::{write_json, Cell, Table, TableKind};
use rashba_ring::ring::{make_quadrature, PolarGrid, RingGeometry};
use rashba_ring::specfun::{cylinder_pair, recommended_cutoff};
use rashba_ring::spectrum::{solve_sector, solve_spectrum, ModeLabel, ScanOptions, SoiConstant};
use rashba_ring::{Error, Execution};
use serde_json::{json, Map, Value};

use crate::Failure;

/// Output directory plus the files written so far.
struct Sink {
    dir: std::path::PathBuf,
    config: Value,
    files: Vec<String>,
}

impl Sink {
    fn new(cfg: &RunConfig) -> Result<Self, Failure> {
        std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
        Ok(Sink {
            dir: cfg.out.clone(),
            config: serde_json::to_value(cfg).expect("config serializes"),
            files: Vec::new(),
        })
    }

    fn save(&mut self, table: Table) -> Result<(), Failure> {
        let table = table.with_meta("config", self.config.clone());
        let path = table
            .save(&self.dir, None)
            .with_context(|| format!("writing {} table", table.kind.name()))?;
        self.files.push(file_name(&path));
        Ok(())
    }

    fn finish(mut self, command: &str, mut summary: Map<String, Value>) -> Result<Value, Failure> {
        summary.insert("command".into(), command.into());
        summary.insert("config".into(), self.config.clone());
        let created = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        summary.insert("created_unix".into(), created.into());
        self.files.push("summary.json".into());
        summary.insert("files".into(), self.files.clone().into());
        let value = Value::Object(summary);
        write_json(&self.dir.join("summary.json"), &value).context("writing summary.json")?;
        Ok(value)
    }
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn dispatch(cfg: &RunConfig, exec: Execution) -> Result<Value, Failure> {
    match cfg.mode {
        RunMode::Static => cmd_spectrum(cfg, exec),
        RunMode::Floquet => cmd_floquet(cfg, exec),
        RunMode::Evolve => cmd_evolve(cfg, exec),
        RunMode::Fourier => cmd_fourier(cfg, exec),
        RunMode::Revival => cmd_revival(cfg, exec),
        RunMode::BesselDebug => cmd_bessel(cfg),
    }
}

fn scan_options(cfg: &RunConfig, exec: Execution) -> ScanOptions {
    ScanOptions {
        root_tol: cfg.root_tol,
        quadrature_order: cfg.quadrature_order,
        execution: exec,
        ..ScanOptions::default()
    }
}

fn floquet_options(cfg: &RunConfig, exec: Execution) -> FloquetScanOptions {
    FloquetScanOptions {
        root_tol: cfg.root_tol.min(FloquetScanOptions::default().root_tol),
        execution: exec,
        ..FloquetScanOptions::default()
    }
}

fn drive(cfg: &RunConfig) -> Result<Drive, Error> {
    Drive::new(cfg.a, cfg.b, cfg.require_nu()?)
}

fn cmd_spectrum(cfg: &RunConfig, exec: Execution) -> Result<Value, Failure> {
    let geom = cfg.geometry()?;
    let w = cfg.soi.expect("validated");
    let soi = SoiConstant::new(w)?;
    let sectors = solve_spectrum(cfg.m_min..=cfg.m_max, cfg.eps_max.expect("validated"), soi, geom, &scan_options(cfg, exec))?;
    let degeneracy: i64 = if w == 0.0 { 2 } else { 1 };
    let mut sink = Sink::new(cfg)?;
    let mut table = Table::new(TableKind::Spectrum).with_meta("soi", w).with_meta("rho", cfg.rho);
    let mut profiles = Table::new(TableKind::Profiles).with_meta("soi", w).with_meta("rho", cfg.rho);
    let mut warnings = Vec::new();
    let mut counts = Map::new();
    for s in &sectors {
        warnings.extend(s.warnings.iter().cloned());
        counts.insert(s.sector.m.to_string(), s.modes.len().into());
        let mut modes: Vec<_> = s.modes.iter().collect();
        modes.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.label.cmp(&b.label)));
        for mode in modes {
            let l = mode.label;
            table.push(vec![
                l.sector.m.into(),
                mode.kappa().into(),
                l.n.into(),
                l.branch.to_string().into(),
                mode.energy.into(),
                mode.k_plus.into(),
                mode.k_minus.into(),
                degeneracy.into(),
                mode.certificate.boundary_residual.into(),
                mode.certificate.norm_deviation.into(),
            ]);
            if cfg.profiles {
                let n = 201;
                for i in 0..n {
                    let r = geom.inner() + geom.width() * i as f64 / (n - 1) as f64;
                    let (u, d) = mode.radial(r)?;
                    let [rho, sx, sy, sz] = local_observables(Complex64::new(u, 0.0), Complex64::new(d, 0.0));
                    profiles.push(vec![
                        l.sector.m.into(),
                        l.n.into(),
                        l.branch.to_string().into(),
                        r.into(),
                        u.into(),
                        d.into(),
                        rho.into(),
                        sx.into(),
                        sy.into(),
                        sz.into(),
                    ]);
                }
            }
        }
    }
    let levels = table.rows.len();
    sink.save(table)?;
    if cfg.profiles {
        sink.save(profiles)?;
    }
    let mut summary = Map::new();
    summary.insert("levels".into(), levels.into());
    summary.insert("levels_per_sector".into(), Value::Object(counts));
    summary.insert("scalar_path".into(), (w == 0.0).into());
    summary.insert("warnings".into(), warnings.into());
    sink.finish("spectrum", summary)
}

fn cmd_floquet(cfg: &RunConfig, exec: Execution) -> Result<Value, Failure> {
    let geom = cfg.geometry()?;
    let drive = drive(cfg)?;
    let roots = scan_floquet_sectors(cfg.m_min..=cfg.m_max, cfg.k_max.expect("validated"), geom, &floquet_options(cfg, exec))?;
    let q = make_quadrature(cfg.quadrature_order, geom)?;
    let modes = exec.map(&roots, |r| build_floquet_mode(r, drive, geom, &q));
    let mut sink = Sink::new(cfg)?;
    let meta = |t: Table| t.with_meta("rho", cfg.rho).with_meta("a", drive.a).with_meta("b", drive.b).with_meta("nu", drive.nu);
    let mut table = meta(Table::new(TableKind::Floquet));
    let mut sidebands = meta(Table::new(TableKind::Sidebands));
    let mut max_z: f64 = 0.0;
    for (root, mode) in roots.iter().zip(modes) {
        let mode = mode?;
        let l = root.label;
        table.push(vec![
            l.sector.m.into(),
            l.sector.kappa().into(),
            l.n.into(),
            l.branch.to_string().into(),
            root.order.into(),
            root.k.into(),
            root.quasienergy().into(),
            root.reduced_quasienergy(drive.nu).into(),
            (root.degeneracy as i64).into(),
        ]);
        let z = drive.sideband_argument(root.k);
        max_z = max_z.max(z.abs());
        let cutoff = cfg.sideband_cutoff.unwrap_or_else(|| recommended_cutoff(z));
        let weights = sideband_weights(&mode, cutoff)?;
        for (alpha, w) in weights.iter() {
            sidebands.push(vec![
                l.sector.m.into(),
                l.n.into(),
                l.branch.to_string().into(),
                root.k.into(),
                z.into(),
                alpha.into(),
                (w * w).into(),
            ]);
        }
    }
    let n = table.rows.len();
    sink.save(table)?;
    sink.save(sidebands)?;
    let mut summary = Map::new();
    summary.insert("roots".into(), n.into());
    summary.insert("max_sideband_argument".into(), max_z.into());
    sink.finish("floquet", summary)
}

/// Basis, expansion and the drive (for Floquet bases).
struct Prepared {
    exp: StateExpansion,
    drive: Option<Drive>,
    geom: RingGeometry,
}

fn grid(cfg: &RunConfig, geom: RingGeometry) -> Result<PolarGrid, Error> {
    let q = make_quadrature(cfg.quadrature_order, geom)?;
    let max_abs = cfg.m_min.unsigned_abs().max((cfg.m_max + 1).unsigned_abs()) as usize;
    match cfg.n_phi {
        Some(n) => PolarGrid::new(q, n, max_abs),
        None => Ok(PolarGrid::for_sectors(q, max_abs)),
    }
}

/// Basis elements for every sector in range, or only for `wanted` labels.
fn basis(cfg: &RunConfig, geom: RingGeometry, exec: Execution, wanted: Option<&[ModeLabel]>) -> Result<Vec<BasisElement>, Error> {
    let sectors: Vec<i32> = match wanted {
        Some(ls) => ls.iter().map(|l| l.sector.m).collect::<BTreeSet<_>>().into_iter().collect(),
        None => (cfg.m_min..=cfg.m_max).collect(),
    };
    let keep = |l: &ModeLabel| wanted.is_none_or(|w| w.contains(l));
    let mut out = Vec::new();
    match cfg.basis {
        BasisChoice::Static => {
            let soi = SoiConstant::new(cfg.soi.expect("validated"))?;
            let eps_max = cfg.eps_max.expect("validated");
            let opts = scan_options(cfg, exec);
            for m in sectors {
                let s = solve_sector(m, eps_max, soi, geom, &opts)?;
                out.extend(s.modes.iter().filter(|e| keep(&e.label)).map(BasisElement::from));
            }
        }
        BasisChoice::Floquet => {
            let drive = drive(cfg)?;
            let k_max = cfg.k_max.expect("validated");
            let opts = floquet_options(cfg, exec);
            let q = make_quadrature(cfg.quadrature_order, geom)?;
            let mut roots = Vec::new();
            for m in sectors {
                roots.extend(
                    rashba_ring::floquet::scan_floquet_spectrum(m, k_max, geom, &opts)?
                        .into_iter()
                        .filter(|r| keep(&r.label)),
                );
            }
            for mode in exec.map(&roots, |r| build_floquet_mode(r, drive, geom, &q)) {
                out.push(BasisElement::from(&mode?));
            }
        }
    }
    Ok(out)
}

fn prepare(cfg: &RunConfig, exec: Execution) -> Result<(Prepared, Vec<String>), Failure> {
    let geom = cfg.geometry()?;
    let grid = grid(cfg, geom)?;
    let kind = match cfg.basis {
        BasisChoice::Static => BasisKind::Static,
        BasisChoice::Floquet => BasisKind::Floquet,
    };
    let drive = match cfg.basis {
        BasisChoice::Floquet => Some(drive(cfg)?),
        BasisChoice::Static => None,
    };
    let (exp, warnings) = match cfg.state {
        StateChoice::Modes => {
            let labels = cfg.mode_labels()?;
            let elements = basis(cfg, geom, exec, Some(&labels))?;
            let amps = if cfg.amplitudes.is_empty() {
                vec![1.0; labels.len()]
            } else {
                cfg.amplitudes.clone()
            };
            let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
            let mut ordered = Vec::new();
            let mut coeffs = Vec::new();
            for (l, a) in labels.iter().zip(&amps) {
                let e = elements.iter().find(|e| e.label == *l).ok_or_else(|| {
                    let limit = match cfg.basis {
                        BasisChoice::Static => "eps_max",
                        BasisChoice::Floquet => "k_max",
                    };
                    Error::Parameter {
                        name: "modes",
                        reason: format!("mode {l} not found below {limit}"),
                    }
                })?;
                ordered.push(e.clone());
                coeffs.push(Complex64::new(a / norm, 0.0));
            }
            (StateExpansion::from_coefficients(kind, ordered, coeffs, grid)?, Vec::new())
        }
        StateChoice::Gaussian => {
            let spin_norm = cfg.spin_up.hypot(cfg.spin_down);
            let spec = GaussianSpec {
                r_c: cfg.r_c,
                phi_c: cfg.phi_c,
                sigma_r: cfg.sigma_r,
                sigma_phi: cfg.sigma_phi,
                spin: [
                    Complex64::new(cfg.spin_up / spin_norm, 0.0),
                    Complex64::new(cfg.spin_down / spin_norm, 0.0),
                ],
            };
            let packet = gaussian_packet(&spec, geom, &grid)?;
            let elements = basis(cfg, geom, exec, None)?;
            let exp = expand_state(
                &packet.field,
                kind,
                elements,
                &ExpandOptions {
                    norm_tolerance: cfg.norm_tolerance,
                    execution: exec,
                },
            )?;
            let mut w = packet.warnings;
            w.extend(exp.warnings.iter().cloned());
            (exp, w)
        }
    };
    if exp.captured_norm < cfg.norm_floor {
        return Err(Error::Numerical(format!(
            "captured norm {} below norm_floor {}; enlarge the basis (m range, eps_max or k_max)",
            exp.captured_norm, cfg.norm_floor
        ))
        .into());
    }
    Ok((Prepared { exp, drive, geom }, warnings))
}

/// Upper bound on the angular frequencies carried by observables of `exp`.
fn predicted_max_frequency(exp: &StateExpansion) -> f64 {
    let total: f64 = exp.coefficients.iter().map(|c| c.norm_sqr()).sum();
    let live: Vec<&PhaseLaw> = exp
        .elements
        .iter()
        .zip(&exp.coefficients)
        .filter(|(_, c)| c.norm_sqr() > 1e-6 * total)
        .map(|(e, _)| &e.law)
        .collect();
    let mut best: f64 = 0.0;
    for (i, a) in live.iter().enumerate() {
        for b in &live[i + 1..] {
            let f = match (a, b) {
                (PhaseLaw::Static { energy: ea }, PhaseLaw::Static { energy: eb }) => (ea - eb).abs(),
                (
                    PhaseLaw::Floquet { k: ka, branch: sa, drive },
                    PhaseLaw::Floquet { k: kb, branch: sb, .. },
                ) => {
                    // instantaneous frequency range plus the Jacobi-Anger tail
                    let delta = sa.sign() * ka - sb.sign() * kb;
                    let swing = delta.abs() * drive.a;
                    (ka * ka - kb * kb + delta * drive.b).abs() + swing + (25.0 + 8.0 * (swing / drive.nu).cbrt()) * drive.nu
                }
                _ => 0.0,
            };
            best = best.max(f);
        }
    }
    best
}

/// `τ = 0, dt, …` strictly below `tau_end` when it is a multiple of `dt`,
/// otherwise up to the last step not beyond it.
fn time_grid(cfg: &RunConfig) -> Vec<f64> {
    let ratio = cfg.tau_end / cfg.dt;
    let n = if (ratio - ratio.round()).abs() < 1e-9 * ratio {
        ratio.round() as usize
    } else {
        ratio.floor() as usize + 1
    };
    (0..n).map(|i| i as f64 * cfg.dt).collect()
}

fn check_sampling(cfg: &RunConfig, exp: &StateExpansion) -> Result<f64, Error> {
    let f = predicted_max_frequency(exp);
    let nyquist = std::f64::consts::PI / cfg.dt;
    if f >= nyquist {
        return Err(Error::Sampling(format!(
            "predicted content up to ω = {f:.4} exceeds the Nyquist frequency {nyquist:.4} of dt = {}; use dt < {:.6}",
            cfg.dt,
            std::f64::consts::PI / f
        )));
    }
    Ok(f)
}

fn expansion_summary(p: &Prepared, warnings: &[String], f_max: f64) -> Map<String, Value> {
    let mut s = Map::new();
    s.insert("captured_norm".into(), p.exp.captured_norm.into());
    s.insert("basis_size".into(), p.exp.len().into());
    s.insert("predicted_max_frequency".into(), f_max.into());
    let mut w = warnings.to_vec();
    w.extend(p.exp.warnings.iter().cloned());
    w.sort();
    w.dedup();
    s.insert("warnings".into(), w.into());
    s
}

fn series_table(cfg: &RunConfig, taus: &[f64], raw: &[f64], avg: &[f64], captured: f64) -> Table {
    let mut t = Table::new(TableKind::TimeSeries)
        .with_meta("observable", cfg.observable.as_str())
        .with_meta("probe", json!([cfg.probe_r, cfg.probe_phi]))
        .with_meta("dt", cfg.dt)
        .with_meta("captured_norm", captured);
    for i in 0..taus.len() {
        t.push(vec![taus[i].into(), raw[i].into(), avg[i].into()]);
    }
    t
}

fn probe_series(cfg: &RunConfig, p: &Prepared, taus: &[f64], exec: Execution) -> Result<(Vec<f64>, Vec<f64>), Error> {
    let obs = Observable::parse(&cfg.observable)?;
    let raw = time_series(&p.exp, (cfg.probe_r, cfg.probe_phi), obs, taus, p.geom, exec)?;
    let avg = match cfg.average_window {
        Some(w) => moving_average(&raw, cfg.dt, w)?,
        None => raw.clone(),
    };
    Ok((raw, avg))
}

fn snapshots(cfg: &RunConfig, p: &Prepared, exec: Execution) -> Table {
    let mut t = Table::new(TableKind::Snapshots).with_meta("captured_norm", p.exp.captured_norm);
    let fields = exec.map(&cfg.snapshots, |&tau| (tau, observables(&evolve(&p.exp, tau))));
    let grid = &p.exp.grid;
    for (tau, obs) in fields {
        for ir in 0..grid.n_r() {
            let r = grid.radial.nodes[ir];
            for j in 0..grid.n_phi {
                let i = ir * grid.n_phi + j;
                t.push(vec![
                    tau.into(),
                    r.into(),
                    grid.phi(j).into(),
                    obs.density[i].into(),
                    obs.sx[i].into(),
                    obs.sy[i].into(),
                    obs.sz[i].into(),
                ]);
            }
        }
    }
    t
}

fn autocorrelation_table(p: &Prepared, taus: &[f64], values: &[f64]) -> Table {
    let mut t = Table::new(TableKind::Autocorrelation).with_meta("captured_norm", p.exp.captured_norm);
    for (tau, v) in taus.iter().zip(values) {
        t.push(vec![Cell::from(*tau), Cell::from(*v)]);
    }
    t
}

fn cmd_evolve(cfg: &RunConfig, exec: Execution) -> Result<Value, Failure> {
    let (p, warnings) = prepare(cfg, exec)?;
    let f_max = check_sampling(cfg, &p.exp)?;
    let taus = time_grid(cfg);
    let (raw, avg) = probe_series(cfg, &p, &taus, exec)?;
    let mut sink = Sink::new(cfg)?;
    sink.save(series_table(cfg, &taus, &raw, &avg, p.exp.captured_norm))?;
    if !cfg.snapshots.is_empty() {
        sink.save(snapshots(cfg, &p, exec))?;
    }
    let mut summary = expansion_summary(&p, &warnings, f_max);
    if cfg.autocorrelation {
        let ac = autocorrelation(&p.exp, &taus, exec);
        sink.save(autocorrelation_table(&p, &taus, &ac))?;
        if let Ok(est) = revival_estimate(&p.exp) {
            summary.insert("revival_estimate".into(), serde_json::to_value(est).expect("serializes"));
        }
    }
    if let (Some(d), Some(_)) = (p.drive, cfg.average_window) {
        if let Ok(fr) = harmonic_power_fractions(&avg, cfg.dt, d.nu, cfg.harmonics) {
            summary.insert("averaged_harmonic_fractions".into(), fr.into());
        }
    }
    sink.finish("evolve", summary)
}

fn cmd_fourier(cfg: &RunConfig, exec: Execution) -> Result<Value, Failure> {
    let (p, warnings) = prepare(cfg, exec)?;
    let f_max = check_sampling(cfg, &p.exp)?;
    let taus = time_grid(cfg);
    let (raw, avg) = probe_series(cfg, &p, &taus, exec)?;
    let window = match cfg.window.as_str() {
        "hann" => Window::Hann,
        _ => Window::Rect,
    };
    let opts = FourierOptions {
        window,
        remove_mean: true,
        max_frequency: Some(cfg.max_frequency.unwrap_or(f_max)),
        beat_period: None,
    };
    let spec = fourier_spectrum(&avg, cfg.dt, &opts)?;
    let keep = cfg.max_frequency.unwrap_or(f_max * 1.05).max(spec.resolution());
    let mut sink = Sink::new(cfg)?;
    sink.save(series_table(cfg, &taus, &raw, &avg, p.exp.captured_norm))?;
    let mut st = Table::new(TableKind::FrequencySpectrum)
        .with_meta("dt", cfg.dt)
        .with_meta("samples", spec.samples)
        .with_meta("window", cfg.window.as_str())
        .with_meta("resolution", spec.resolution());
    for (f, m) in spec.frequencies.iter().zip(&spec.magnitudes) {
        if *f <= keep {
            st.push(vec![(*f).into(), (*m).into()]);
        }
    }
    sink.save(st)?;
    let peaks = spec.peaks(cfg.peak_threshold);
    let mut pt = Table::new(TableKind::Peaks).with_meta("threshold", cfg.peak_threshold);
    for pk in &peaks {
        pt.push(vec![pk.bin.into(), pk.frequency.into(), pk.magnitude.into()]);
    }
    sink.save(pt)?;
    let mut summary = expansion_summary(&p, &warnings, f_max);
    summary.insert("peaks".into(), peaks.len().into());
    summary.insert("resolution".into(), spec.resolution().into());
    if let Some(d) = p.drive {
        match harmonic_power_fractions(&avg, cfg.dt, d.nu, cfg.harmonics) {
            Ok(fr) => {
                let mut ht = Table::new(TableKind::Harmonics).with_meta("nu", d.nu);
                for (j, f) in fr.iter().enumerate() {
                    ht.push(vec![(j + 1).into(), (*f).into()]);
                }
                sink.save(ht)?;
            }
            Err(e) => {
                summary.insert("harmonics_skipped".into(), e.to_string().into());
            }
        }
    }
    sink.finish("fourier", summary)
}

fn cmd_revival(cfg: &RunConfig, exec: Execution) -> Result<Value, Failure> {
    let (p, warnings) = prepare(cfg, exec)?;
    let f_max = check_sampling(cfg, &p.exp)?;
    let est = revival_estimate(&p.exp)?;
    let taus = time_grid(cfg);
    let ac = autocorrelation(&p.exp, &taus, exec);
    let cap = p.exp.captured_norm;
    let mut summary = expansion_summary(&p, &warnings, f_max);
    summary.insert("revival_estimate".into(), serde_json::to_value(est).expect("serializes"));
    let collapse = ac.iter().position(|&v| v < 0.2 * cap);
    summary.insert("collapse_tau".into(), collapse.map(|i| taus[i]).into());
    if let Some(c) = collapse {
        let (imax, vmax) = ac[c..]
            .iter()
            .enumerate()
            .fold((c, 0.0), |acc, (i, &v)| if v > acc.1 { (i + c, v) } else { acc });
        summary.insert("revival_tau".into(), taus[imax].into());
        summary.insert("revival_value".into(), vmax.into());
        // azimuthal two-lobe states near simple fractions of the revival time
        let mut lobes = Vec::new();
        for (num, den) in [(1, 2), (1, 3), (2, 3), (1, 4), (3, 4)] {
            let centre = taus[imax] * num as f64 / den as f64;
            let hit = (-20..=20)
                .map(|j| centre * (1.0 + 0.005 * j as f64))
                .find(|&t| count_lobes(&evolve(&p.exp, t).angular_density(), 0.5) == 2);
            if let Some(t) = hit {
                lobes.push(json!({ "fraction": format!("{num}/{den}"), "tau": t }));
            }
        }
        summary.insert("two_lobe_times".into(), lobes.into());
    }
    let mut sink = Sink::new(cfg)?;
    sink.save(autocorrelation_table(&p, &taus, &ac))?;
    if !cfg.snapshots.is_empty() {
        sink.save(snapshots(cfg, &p, exec))?;
    }
    sink.finish("revival", summary)
}

fn cmd_bessel(cfg: &RunConfig) -> Result<Value, Failure> {
    let mut t = Table::new(TableKind::Bessel);
    let mut worst: f64 = 0.0;
    for m in cfg.m_min..=cfg.m_max {
        for i in 0..cfg.samples {
            let x = cfg.x_min + (cfg.x_max - cfg.x_min) * i as f64 / (cfg.samples - 1) as f64;
            let p = cylinder_pair(m, x)?;
            let wr = ((p.j[1] * p.n[0] - p.j[0] * p.n[1]) * std::f64::consts::PI * x / 2.0 - 1.0).abs();
            worst = worst.max(wr);
            t.push(vec![m.into(), x.into(), p.j[0].into(), p.n[0].into(), wr.into()]);
        }
    }
    let mut sink = Sink::new(cfg)?;
    sink.save(t)?;
    let mut summary = Map::new();
    summary.insert("max_wronskian_residual".into(), worst.into());
    sink.finish("bessel-debug", summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn time_grid_excludes_whole_endpoint() {
        let mut cfg = RunConfig {
            dt: 0.25,
            tau_end: 1.0,
            ..RunConfig::default()
        };
        assert_eq!(time_grid(&cfg), vec![0.0, 0.25, 0.5, 0.75]);
        cfg.tau_end = 1.1;
        assert_eq!(time_grid(&cfg).len(), 5);
        cfg.dt = TAU / 7.0;
        cfg.tau_end = TAU;
        assert_eq!(time_grid(&cfg).len(), 7);
    }
}
