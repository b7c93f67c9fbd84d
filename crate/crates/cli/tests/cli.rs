use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use rashba_ring::io::{read_table_file, ParsedTable, TableKind};
use rashba_ring::specfun::{cross_product_det, jacobi_anger_weights, recommended_cutoff};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rashba-ring"));
    c.env("RUST_LOG", "error");
    c
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn ok(args: &[&str], out: &Path) -> Value {
    let o = run(args, out);
    assert!(
        o.status.success(),
        "{args:?} failed: {}\n{}",
        o.status,
        String::from_utf8_lossy(&o.stderr)
    );
    serde_json::from_slice(&o.stdout).expect("summary JSON on stdout")
}

fn fails(args: &[&str], out: &Path) -> (i32, Value) {
    let o = run(args, out);
    let code = o.status.code().expect("exit code");
    let err: Value = serde_json::from_slice(&o.stderr)
        .unwrap_or_else(|_| panic!("stderr is not JSON: {}", String::from_utf8_lossy(&o.stderr)));
    (code, err["error"].clone())
}

/// Every table listed in the summary reads back and validates.
fn tables(dir: &Path, summary: &Value) -> BTreeMap<String, ParsedTable> {
    let mut out = BTreeMap::new();
    for f in summary["files"].as_array().unwrap() {
        let name = f.as_str().unwrap();
        if let Some(stem) = name.strip_suffix(".csv") {
            let t = read_table_file(&dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
            out.insert(stem.to_owned(), t);
        }
    }
    let on_disk: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(&on_disk, summary);
    out
}

fn zeros(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut x = lo;
    let mut prev = f(x);
    while x < hi {
        let y = (x + step).min(hi);
        let v = f(y);
        if prev.signum() != v.signum() {
            let (mut a, mut b, mut fa) = (x, y, prev);
            for _ in 0..100 {
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
        x = y;
    }
    out
}

fn dirichlet(order: i32, k_max: f64) -> Vec<f64> {
    zeros(|k| cross_product_det(order, k, 0.6, 1.0).unwrap(), 1e-3, k_max, 2e-3)
}

#[test]
fn spectrum_matches_frozen_scan() {
    let dir = TempDir::new().unwrap();
    let s = ok(
        &["spectrum", "--rho", "0.6", "--soi", "4.0", "--m-min", "-8", "--m-max", "8", "--eps-max", "60"],
        dir.path(),
    );
    let t = &tables(dir.path(), &s)["spectrum"];
    let frozen = include_str!("data/spectrum_rho0.6_soi4_eps60.csv");
    let want: Vec<(i64, f64)> = frozen
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('m'))
        .map(|l| {
            let (m, e) = l.split_once(',').unwrap();
            (m.parse().unwrap(), e.parse().unwrap())
        })
        .collect();
    let (m, e) = (t.ints("m").unwrap(), t.floats("energy").unwrap());
    assert_eq!(m.len(), want.len());
    for (i, (wm, we)) in want.iter().enumerate() {
        assert_eq!(m[i], *wm);
        assert!((e[i] - we).abs() < 1e-8 * we, "m = {wm}: {} vs {we}", e[i]);
    }
    // the window holds the lower member of each lowest doublet only
    assert!(t.texts("branch").unwrap().iter().all(|b| *b == "-"));
    assert!(t.ints("n").unwrap().iter().all(|n| *n == 1));
    // κ → -κ reflection
    for i in 0..m.len() {
        let j = m.iter().position(|x| *x == -m[i] - 1).unwrap();
        assert_eq!(e[i], e[j]);
    }
}

#[test]
fn zero_soi_takes_scalar_path() {
    let dir = TempDir::new().unwrap();
    let s = ok(&["spectrum", "--soi", "0", "--m-min", "0", "--m-max", "2", "--eps-max", "260"], dir.path());
    assert_eq!(s["scalar_path"], true);
    let t = &tables(dir.path(), &s)["spectrum"];
    assert!(t.ints("degeneracy").unwrap().iter().all(|d| *d == 2));
    let (m, e) = (t.ints("m").unwrap(), t.floats("energy").unwrap());
    for (mi, ei) in m.iter().zip(&e) {
        let k = ei.sqrt();
        let hit = [*mi as i32, *mi as i32 + 1]
            .iter()
            .flat_map(|&o| dirichlet(o, 17.0))
            .any(|z| (z - k).abs() < 1e-6);
        assert!(hit, "m = {mi}, ε = {ei}");
    }
}

#[test]
fn invalid_rho_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let (code, err) = fails(&["spectrum", "--rho", "1.2", "--soi", "1", "--eps-max", "10"], dir.path());
    assert_eq!(code, 2);
    assert_eq!(err["kind"], "parameter");
    assert_eq!(err["parameter"], "rho");
    assert!(err["invariant"].as_str().unwrap().contains("(0, 1)"));
    assert!(!dir.path().join("spectrum.csv").exists());
}

#[test]
fn floquet_roots_factorize() {
    let dir = TempDir::new().unwrap();
    let s = ok(
        &["floquet", "--rho", "0.6", "--m-min", "-10", "--m-max", "10", "--k-max", "12", "--nu", "0.5", "--a", "0.2"],
        dir.path(),
    );
    let tabs = tables(dir.path(), &s);
    let t = &tabs["floquet"];
    let (m, order, k) = (t.ints("m").unwrap(), t.ints("order").unwrap(), t.floats("k").unwrap());
    let mut by_sector: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for i in 0..m.len() {
        by_sector.entry(m[i]).or_default().push(k[i]);
        let oracle = dirichlet(order[i] as i32, 12.5);
        assert!(oracle.iter().any(|z| (z - k[i]).abs() < 1e-8), "m = {}, k = {}", m[i], k[i]);
    }
    for mm in -10..=10 {
        let mut want: Vec<f64> = [mm, mm + 1].iter().flat_map(|&o| dirichlet(o as i32, 12.0)).collect();
        want.sort_by(f64::total_cmp);
        assert_eq!(by_sector.get(&mm).map_or(0, Vec::len), want.len(), "sector {mm}");
    }
    assert!(tabs.contains_key("sidebands"));
}

#[test]
fn sideband_table_matches_jacobi_anger() {
    let dir = TempDir::new().unwrap();
    let s = ok(
        &["floquet", "--m-min", "7", "--m-max", "7", "--k-max", "13", "--a", "3", "--nu", "0.01"],
        dir.path(),
    );
    let t = &tables(dir.path(), &s)["sidebands"];
    let (k, alpha, w) = (t.floats("k").unwrap(), t.ints("alpha").unwrap(), t.floats("weight").unwrap());
    let first = k[0];
    let z = 3.0 * first / 0.01;
    let table = jacobi_anger_weights(z, recommended_cutoff(z)).unwrap();
    let rows: Vec<usize> = (0..k.len()).filter(|&i| k[i] == first).collect();
    assert_eq!(rows.len(), 2 * recommended_cutoff(z) + 1);
    for i in rows {
        let want = table.weight(alpha[i]).powi(2);
        assert!((w[i] - want).abs() < 1e-14, "α = {}", alpha[i]);
    }
}

#[test]
fn floquet_without_nu_is_rejected() {
    let dir = TempDir::new().unwrap();
    let (code, err) = fails(&["floquet", "--k-max", "12"], dir.path());
    assert_eq!(code, 2);
    assert_eq!(err["parameter"], "nu");
}

#[test]
fn fig5a_preset_runs() {
    let dir = TempDir::new().unwrap();
    let s = ok(&["evolve", "--preset", "fig5a"], dir.path());
    let cfg = &s["config"];
    assert_eq!(cfg["a"], 0.1);
    assert_eq!(cfg["nu"], 0.01);
    assert_eq!(cfg["rho"], 0.6);
    assert_eq!(cfg["observable"], "sy");
    assert_eq!(cfg["modes"], serde_json::json!(["+1,15/2", "-1,15/2"]));
    assert!((s["captured_norm"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let tabs = tables(dir.path(), &s);
    let ts = &tabs["time_series"];
    assert_eq!(ts.meta["observable"], "sy");
    assert!(ts.meta_f64("captured_norm").is_some());
    assert_eq!(ts.rows.len(), 1 << 15);
    assert!(tabs.contains_key("snapshots"));
}

#[test]
fn fig7_preset_has_autocorrelation() {
    let dir = TempDir::new().unwrap();
    let s = ok(&["evolve", "--preset", "fig7", "--set", "snapshots=none", "--tau-end", "2"], dir.path());
    assert_eq!(s["config"]["state"], "gaussian");
    assert_eq!(s["config"]["soi"], 3.0);
    let tabs = tables(dir.path(), &s);
    let ac = tabs["autocorrelation"].floats("autocorrelation").unwrap();
    let cap = s["captured_norm"].as_f64().unwrap();
    assert!(cap > 0.999);
    assert!((ac[0] - cap).abs() < 1e-12);
    assert!(ac.iter().any(|v| *v < 0.2), "packet collapses within τ = 2");
}

#[test]
fn coarse_time_grid_is_a_sampling_error() {
    let dir = TempDir::new().unwrap();
    let (code, err) = fails(&["evolve", "--preset", "fig5b", "--dt", "0.05"], dir.path());
    assert_eq!(code, 2);
    assert_eq!(err["kind"], "sampling");
}

#[test]
fn small_basis_escalates_to_numerical_failure() {
    let dir = TempDir::new().unwrap();
    let (code, err) = fails(&["evolve", "--preset", "fig7", "--eps-max", "300"], dir.path());
    assert_eq!(code, 3);
    assert_eq!(err["kind"], "numerical");
}

#[test]
fn bad_overrides_are_rejected() {
    let dir = TempDir::new().unwrap();
    for args in [
        &["spectrum", "--set", "bogus=1"][..],
        &["spectrum", "--set", "no_equals_sign"][..],
        &["spectrum", "--preset", "fig99"][..],
        &["spectrum", "--soi", "1"][..],
        &["spectrum", "--soi", "1", "--eps-max", "10", "--m-min", "3", "--m-max", "1"][..],
        &["spectrum", "--soi", "1", "--eps-max", "10", "--threads", "0"][..],
    ] {
        let (code, _) = fails(args, dir.path());
        assert_eq!(code, 2, "{args:?}");
    }
}

#[test]
fn output_is_deterministic() {
    let runs: Vec<TempDir> = (0..2).map(|_| TempDir::new().unwrap()).collect();
    let spectrum = ["spectrum", "--soi", "2", "--m-min", "-3", "--m-max", "3", "--eps-max", "200"];
    ok(&[&spectrum[..], &["--threads", "1"]].concat(), runs[0].path());
    ok(&[&spectrum[..], &["--threads", "3"]].concat(), runs[1].path());
    let read = |d: &TempDir| std::fs::read(d.path().join("spectrum.csv")).unwrap();
    assert_eq!(read(&runs[0]), read(&runs[1]));

    let fourier = ["fourier", "--preset", "fig6", "--tau-end", "62.83185307179586"];
    ok(&fourier, runs[0].path());
    ok(&[&fourier[..], &["--threads", "1"]].concat(), runs[1].path());
    for f in ["time_series.csv", "frequency_spectrum.csv", "peaks.csv"] {
        let a = std::fs::read(runs[0].path().join(f)).unwrap();
        let b = std::fs::read(runs[1].path().join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn every_command_round_trips() {
    let dir = TempDir::new().unwrap();
    let cases: &[(&[&str], &[TableKind])] = &[
        (&["spectrum", "--preset", "fig3"], &[TableKind::Spectrum, TableKind::Profiles]),
        (&["floquet", "--preset", "fig4"], &[TableKind::Floquet, TableKind::Sidebands]),
        (
            &["fourier", "--preset", "fig6", "--tau-end", "62.83185307179586"],
            &[TableKind::TimeSeries, TableKind::FrequencySpectrum, TableKind::Peaks],
        ),
        (
            &["revival", "--preset", "fig7", "--tau-end", "9", "--set", "snapshots=0 1"],
            &[TableKind::Autocorrelation, TableKind::Snapshots],
        ),
        (&["bessel-debug", "--m-min", "-3", "--m-max", "3"], &[TableKind::Bessel]),
    ];
    for (i, (args, kinds)) in cases.iter().enumerate() {
        let out = dir.path().join(i.to_string());
        let s = ok(args, &out);
        let tabs = tables(&out, &s);
        for k in *kinds {
            assert!(tabs.contains_key(k.name()), "{args:?} lacks {}", k.name());
        }
    }
}

#[test]
fn presets_are_listed() {
    let o = bin().arg("presets").output().unwrap();
    assert!(o.status.success());
    let names = String::from_utf8(o.stdout).unwrap();
    for p in ["fig2a", "fig2b", "fig2c", "fig2d", "fig3", "fig4", "fig5a", "fig5b", "fig6", "fig7"] {
        assert!(names.lines().any(|l| l == p), "{p}");
    }
}
