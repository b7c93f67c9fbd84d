//! CSV output with a one-line JSON metadata header, and a reader that
//! re-checks the invariants of each table kind.
//!
//! Layout of every file:
//!
//! ```text
//! # {"columns":[...],"kind":"spectrum",...}
//! m,kappa,n,...
//! 4,4.5,1,...
//! ```
//!
//! Floats use the shortest representation that parses back to the same
//! `f64` (`{:e}`), which is locale independent and bit-stable.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableKind {
    Spectrum,
    Profiles,
    Floquet,
    Sidebands,
    TimeSeries,
    Snapshots,
    FrequencySpectrum,
    Peaks,
    Harmonics,
    Autocorrelation,
    Bessel,
}

const ALL_KINDS: [TableKind; 11] = [
    TableKind::Spectrum,
    TableKind::Profiles,
    TableKind::Floquet,
    TableKind::Sidebands,
    TableKind::TimeSeries,
    TableKind::Snapshots,
    TableKind::FrequencySpectrum,
    TableKind::Peaks,
    TableKind::Harmonics,
    TableKind::Autocorrelation,
    TableKind::Bessel,
];

impl TableKind {
    pub fn name(self) -> &'static str {
        match self {
            TableKind::Spectrum => "spectrum",
            TableKind::Profiles => "profiles",
            TableKind::Floquet => "floquet",
            TableKind::Sidebands => "sidebands",
            TableKind::TimeSeries => "time_series",
            TableKind::Snapshots => "snapshots",
            TableKind::FrequencySpectrum => "frequency_spectrum",
            TableKind::Peaks => "peaks",
            TableKind::Harmonics => "harmonics",
            TableKind::Autocorrelation => "autocorrelation",
            TableKind::Bessel => "bessel",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        ALL_KINDS
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Contract(format!("unknown table kind `{s}`")))
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            TableKind::Spectrum => &[
                "m",
                "kappa",
                "n",
                "branch",
                "energy",
                "k_plus",
                "k_minus",
                "degeneracy",
                "boundary_residual",
                "norm_deviation",
            ],
            TableKind::Profiles => &["m", "n", "branch", "r", "up", "down", "density", "sx", "sy", "sz"],
            TableKind::Floquet => &[
                "m",
                "kappa",
                "n",
                "branch",
                "order",
                "k",
                "quasienergy",
                "reduced_quasienergy",
                "degeneracy",
            ],
            TableKind::Sidebands => &["m", "n", "branch", "k", "z", "alpha", "weight"],
            TableKind::TimeSeries => &["tau", "value", "averaged"],
            TableKind::Snapshots => &["tau", "r", "phi", "density", "sx", "sy", "sz"],
            TableKind::FrequencySpectrum => &["frequency", "magnitude"],
            TableKind::Peaks => &["bin", "frequency", "magnitude"],
            TableKind::Harmonics => &["harmonic", "fraction"],
            TableKind::Autocorrelation => &["tau", "autocorrelation"],
            TableKind::Bessel => &["m", "x", "j", "n", "wronskian_residual"],
        }
    }

    /// Conventional file name.
    pub fn file_name(self) -> String {
        format!("{}.csv", self.name())
    }
}

/// Shortest round-trip text for `x`.
pub fn format_float(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(i) => write!(f, "{i}"),
            Cell::Float(x) => f.write_str(&format_float(*x)),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<i32> for Cell {
    fn from(x: i32) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_owned())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// An output table under construction.
#[derive(Clone, Debug)]
pub struct Table {
    pub kind: TableKind,
    pub meta: Map<String, Value>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(kind: TableKind) -> Self {
        Table {
            kind,
            meta: Map::new(),
            rows: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.meta.insert(key.to_owned(), value.into());
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.kind.columns().len(),
            "row width does not match {} columns",
            self.kind.name()
        );
        self.rows.push(row);
    }

    fn header_json(&self) -> String {
        let mut meta = self.meta.clone();
        meta.insert("kind".into(), self.kind.name().into());
        meta.insert("columns".into(), self.kind.columns().into());
        Value::Object(meta).to_string()
    }

    pub fn write_to(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "# {}", self.header_json())?;
        writeln!(w, "{}", self.kind.columns().join(","))?;
        let mut line = String::new();
        for row in &self.rows {
            line.clear();
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                line.push_str(&c.to_string());
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("tables are UTF-8")
    }

    /// Writes `dir/<kind>.csv` (or `dir/<stem>.csv`) and returns the path.
    pub fn save(&self, dir: &Path, stem: Option<&str>) -> io::Result<PathBuf> {
        let path = match stem {
            Some(s) => dir.join(format!("{s}.csv")),
            None => dir.join(self.kind.file_name()),
        };
        let file = std::fs::File::create(&path)?;
        let mut w = io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(path)
    }
}

/// A table read back from text, already validated.
#[derive(Clone, Debug)]
pub struct ParsedTable {
    pub kind: TableKind,
    pub meta: Map<String, Value>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ParsedTable {
    fn index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Contract(format!("{} table has no column `{name}`", self.kind.name())))
    }

    pub fn floats(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                row[i]
                    .parse::<f64>()
                    .map_err(|_| Error::Contract(format!("row {r}, column {name}: `{}` is not a number", row[i])))
            })
            .collect()
    }

    pub fn ints(&self, name: &str) -> Result<Vec<i64>> {
        let i = self.index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                row[i]
                    .parse::<i64>()
                    .map_err(|_| Error::Contract(format!("row {r}, column {name}: `{}` is not an integer", row[i])))
            })
            .collect()
    }

    pub fn texts(&self, name: &str) -> Result<Vec<&str>> {
        let i = self.index(name)?;
        Ok(self.rows.iter().map(|row| row[i].as_str()).collect())
    }

    pub fn meta_f64(&self, key: &str) -> Option<f64> {
        self.meta.get(key).and_then(Value::as_f64)
    }

    /// Body without the metadata line, for determinism checks.
    pub fn body(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// Parses and validates a table.
pub fn read_table(text: &str) -> Result<ParsedTable> {
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| Error::Contract("empty table".into()))?;
    let json = first
        .strip_prefix("# ")
        .ok_or_else(|| Error::Contract("first line must be `# {metadata}`".into()))?;
    let meta = match serde_json::from_str::<Value>(json) {
        Ok(Value::Object(m)) => m,
        _ => return Err(Error::Contract("metadata line is not a JSON object".into())),
    };
    let kind = TableKind::parse(meta.get("kind").and_then(Value::as_str).unwrap_or(""))?;
    let header = lines.next().ok_or_else(|| Error::Contract("missing column header".into()))?;
    let columns: Vec<String> = header.split(',').map(str::to_owned).collect();
    if columns != kind.columns() {
        return Err(Error::Contract(format!("{} columns do not match: {header}", kind.name())));
    }
    let declared: Vec<&str> = meta
        .get("columns")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_str).collect())
        .unwrap_or_default();
    if declared != kind.columns() {
        return Err(Error::Contract("metadata columns disagree with the header".into()));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row: Vec<String> = line.split(',').map(str::to_owned).collect();
        if row.len() != columns.len() {
            return Err(Error::Contract(format!("row {i} has {} fields, expected {}", row.len(), columns.len())));
        }
        rows.push(row);
    }
    let table = ParsedTable {
        kind,
        meta,
        columns,
        rows,
    };
    validate(&table)?;
    Ok(table)
}

pub fn read_table_file(path: &Path) -> Result<ParsedTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Contract(format!("{}: {e}", path.display())))?;
    read_table(&text)
}

fn check(cond: bool, kind: TableKind, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Contract(format!("{} table: {}", kind.name(), msg())))
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

fn uniform(v: &[f64]) -> bool {
    if v.len() < 3 {
        return true;
    }
    let h = v[1] - v[0];
    v.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(v[v.len() - 1].abs() * 1e-6))
}

/// Re-checks the invariants of the data in `t`.
pub fn validate(t: &ParsedTable) -> Result<()> {
    let k = t.kind;
    for row in &t.rows {
        for cell in row {
            if let Ok(x) = cell.parse::<f64>() {
                check(x.is_finite(), k, || format!("non-finite value `{cell}`"))?;
            }
        }
    }
    match k {
        TableKind::Spectrum => validate_spectrum(t),
        TableKind::Profiles => {
            let (up, down, rho) = (t.floats("up")?, t.floats("down")?, t.floats("density")?);
            let (sx, sy, sz) = (t.floats("sx")?, t.floats("sy")?, t.floats("sz")?);
            t.texts("branch")?.iter().try_for_each(|b| check(matches!(*b, "+" | "-"), k, || format!("branch `{b}`")))?;
            if let Some(inner) = t.meta_f64("rho") {
                for r in t.floats("r")? {
                    check((inner - 1e-12..=1.0 + 1e-12).contains(&r), k, || format!("r = {r} outside the ring"))?;
                }
            }
            for i in 0..up.len() {
                check(close(rho[i], up[i] * up[i] + down[i] * down[i], 1e-12), k, || format!("row {i}: density"))?;
                let s = (sx[i] * sx[i] + sy[i] * sy[i] + sz[i] * sz[i]).sqrt();
                check(close(s, rho[i] / 2.0, 1e-9), k, || format!("row {i}: spin length"))?;
            }
            Ok(())
        }
        TableKind::Floquet => validate_floquet(t),
        TableKind::Sidebands => validate_sidebands(t),
        TableKind::TimeSeries => {
            let tau = t.floats("tau")?;
            check(strictly_increasing(&tau) && uniform(&tau), k, || "τ grid not uniform".into())?;
            let values = t.floats("value")?;
            if t.meta.get("observable").and_then(Value::as_str) == Some("density") {
                check(values.iter().all(|v| *v >= -1e-12), k, || "negative density".into())?;
            }
            t.floats("averaged").map(|_| ())
        }
        TableKind::Snapshots => {
            let (rho, sx, sy, sz) = (t.floats("density")?, t.floats("sx")?, t.floats("sy")?, t.floats("sz")?);
            for i in 0..rho.len() {
                check(rho[i] >= 0.0, k, || format!("row {i}: negative density"))?;
                let s = (sx[i] * sx[i] + sy[i] * sy[i] + sz[i] * sz[i]).sqrt();
                check(s <= rho[i] / 2.0 * (1.0 + 1e-9) + 1e-300, k, || format!("row {i}: |S| exceeds ρ/2"))?;
            }
            for phi in t.floats("phi")? {
                check((0.0..std::f64::consts::TAU).contains(&phi), k, || format!("φ = {phi} outside [0, 2π)"))?;
            }
            Ok(())
        }
        TableKind::FrequencySpectrum => {
            let f = t.floats("frequency")?;
            check(f.first().is_none_or(|x| *x >= 0.0) && strictly_increasing(&f), k, || "frequencies not increasing".into())?;
            check(t.floats("magnitude")?.iter().all(|m| *m >= 0.0), k, || "negative magnitude".into())
        }
        TableKind::Peaks => {
            let mag = t.floats("magnitude")?;
            check(mag.iter().all(|r| (0.0..=1.0 + 1e-12).contains(r)), k, || "normalized magnitude outside [0, 1]".into())?;
            check(t.floats("frequency")?.iter().all(|f| *f >= 0.0), k, || "negative frequency".into())?;
            t.ints("bin").map(|_| ())
        }
        TableKind::Harmonics => {
            let f = t.floats("fraction")?;
            check(f.iter().all(|x| *x >= 0.0), k, || "negative power fraction".into())?;
            check(f.iter().sum::<f64>() <= 1.0 + 1e-9, k, || "power fractions exceed 1".into())?;
            t.ints("harmonic").map(|_| ())
        }
        TableKind::Autocorrelation => {
            let tau = t.floats("tau")?;
            check(strictly_increasing(&tau), k, || "τ not increasing".into())?;
            let a = t.floats("autocorrelation")?;
            let cap = t.meta_f64("captured_norm").unwrap_or(1.0);
            check(a.iter().all(|v| *v >= 0.0 && *v <= cap * (1.0 + 1e-9)), k, || "autocorrelation outside [0, captured_norm]".into())?;
            if tau.first() == Some(&0.0) {
                check(close(a[0], cap, 1e-9), k, || "autocorrelation at τ = 0 differs from the captured norm".into())?;
            }
            Ok(())
        }
        TableKind::Bessel => {
            let x = t.floats("x")?;
            check(x.iter().all(|x| *x > 0.0), k, || "non-positive argument".into())?;
            let w = t.floats("wronskian_residual")?;
            check(w.iter().all(|w| *w < 1e-8), k, || "Wronskian residual above 1e-8".into())
        }
    }
}

fn validate_spectrum(t: &ParsedTable) -> Result<()> {
    let k = TableKind::Spectrum;
    let m = t.ints("m")?;
    let kappa = t.floats("kappa")?;
    let n = t.ints("n")?;
    let branch = t.texts("branch")?;
    let energy = t.floats("energy")?;
    let (kp, km) = (t.floats("k_plus")?, t.floats("k_minus")?);
    let deg = t.ints("degeneracy")?;
    let res = t.floats("boundary_residual")?;
    let dev = t.floats("norm_deviation")?;
    let soi = t.meta_f64("soi");
    let mut seen = BTreeMap::new();
    for i in 0..m.len() {
        check(kappa[i] == m[i] as f64 + 0.5, k, || format!("row {i}: κ ≠ m + 1/2"))?;
        check(n[i] >= 1, k, || format!("row {i}: n < 1"))?;
        check(matches!(branch[i], "+" | "-"), k, || format!("row {i}: branch `{}`", branch[i]))?;
        check(matches!(deg[i], 1 | 2), k, || format!("row {i}: degeneracy {}", deg[i]))?;
        check(res[i] < 1e-6 && dev[i] < 1e-6, k, || format!("row {i}: certificate {:e}, {:e}", res[i], dev[i]))?;
        if let Some(w) = soi {
            let root = (w * w / 4.0 + energy[i]).sqrt();
            check(close(kp[i], -w / 2.0 + root, 1e-9) && close(km[i], w / 2.0 + root, 1e-9), k, || {
                format!("row {i}: wavenumbers inconsistent with energy")
            })?;
            check((deg[i] == 2) == (w == 0.0), k, || format!("row {i}: degeneracy {} at soi {w}", deg[i]))?;
        }
        check(seen.insert((m[i], n[i], branch[i]), energy[i]).is_none(), k, || format!("row {i}: duplicate label"))?;
        if i > 0 && m[i] == m[i - 1] {
            check(energy[i] >= energy[i - 1], k, || format!("row {i}: energies not sorted within a sector"))?;
        }
        if i > 0 {
            check(m[i] >= m[i - 1], k, || format!("row {i}: sectors not sorted"))?;
        }
    }
    // n counts upward within each (m, branch)
    for ((mm, nn, b), e) in &seen {
        if *nn > 1 {
            let prev = seen.get(&(*mm, nn - 1, *b));
            check(prev.is_some_and(|p| p < e), k, || format!("label ({nn}, {b}) in sector {mm} out of order"))?;
        }
    }
    Ok(())
}

fn validate_floquet(t: &ParsedTable) -> Result<()> {
    let k = TableKind::Floquet;
    let m = t.ints("m")?;
    let kappa = t.floats("kappa")?;
    let order = t.ints("order")?;
    let wk = t.floats("k")?;
    let qe = t.floats("quasienergy")?;
    let red = t.floats("reduced_quasienergy")?;
    let deg = t.ints("degeneracy")?;
    let branch = t.texts("branch")?;
    let nu = t.meta_f64("nu");
    for i in 0..m.len() {
        check(kappa[i] == m[i] as f64 + 0.5, k, || format!("row {i}: κ ≠ m + 1/2"))?;
        check(order[i] == m[i] || order[i] == m[i] + 1, k, || format!("row {i}: order {}", order[i]))?;
        check(wk[i] > 0.0 && qe[i] == wk[i] * wk[i], k, || format!("row {i}: quasienergy ≠ k²"))?;
        check(deg[i] == 2, k, || format!("row {i}: degeneracy {}", deg[i]))?;
        check(matches!(branch[i], "+" | "-"), k, || format!("row {i}: branch"))?;
        if let Some(nu) = nu {
            check(red[i] >= 0.0 && red[i] < nu, k, || format!("row {i}: reduced quasienergy outside the zone"))?;
            let shift = (qe[i] - red[i]) / nu;
            check((shift - shift.round()).abs() < 1e-6 * shift.abs().max(1.0), k, || format!("row {i}: reduction not a multiple of ν"))?;
        }
        if i > 0 {
            check(m[i] > m[i - 1] || (m[i] == m[i - 1] && wk[i] >= wk[i - 1]), k, || format!("row {i}: not sorted"))?;
        }
    }
    Ok(())
}

fn validate_sidebands(t: &ParsedTable) -> Result<()> {
    let k = TableKind::Sidebands;
    let m = t.ints("m")?;
    let n = t.ints("n")?;
    let branch = t.texts("branch")?;
    let wk = t.floats("k")?;
    let z = t.floats("z")?;
    let alpha = t.ints("alpha")?;
    let w = t.floats("weight")?;
    let ratio = match (t.meta_f64("a"), t.meta_f64("nu")) {
        (Some(a), Some(nu)) => Some(a / nu),
        _ => None,
    };
    let mut groups: BTreeMap<(i64, i64, &str), BTreeMap<i64, f64>> = BTreeMap::new();
    for i in 0..m.len() {
        check((0.0..=1.0 + 1e-12).contains(&w[i]), k, || format!("row {i}: weight {}", w[i]))?;
        if let Some(r) = ratio {
            check(close(z[i], r * wk[i], 1e-12), k, || format!("row {i}: z ≠ a k / ν"))?;
        }
        groups.entry((m[i], n[i], branch[i])).or_default().insert(alpha[i], w[i]);
    }
    for ((mm, nn, b), weights) in &groups {
        let total: f64 = weights.values().sum();
        check((total - 1.0).abs() < 1e-9, k, || format!("({mm}, {nn}, {b}): weights sum to {total}"))?;
        for (a, wa) in weights {
            let mirror = weights.get(&-a).copied().unwrap_or(0.0);
            check((wa - mirror).abs() < 1e-12, k, || format!("({mm}, {nn}, {b}): weights not symmetric at α = {a}"))?;
        }
    }
    Ok(())
}

/// Pretty JSON with a trailing newline; keys come out sorted.
pub fn write_json(path: &Path, value: &Value) -> io::Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    s.push('\n');
    std::fs::write(path, s)
}
