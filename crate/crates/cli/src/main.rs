use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rashba_ring::config::{RunConfig, RunMode};
use rashba_ring::{Error, Execution};
use serde_json::json;

mod commands;
mod presets;

/// Spectra, Floquet states and wave-packet dynamics of a 2D quantum ring
/// with Rashba spin-orbit coupling.
#[derive(Parser, Debug)]
#[command(name = "rashba-ring", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Built-in figure preset, applied before --config.
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Override any configuration key, e.g. `--set eps_max=80`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    #[arg(long, global = true)]
    rho: Option<f64>,
    /// Constant SOI strength ω/Ω.
    #[arg(long, global = true)]
    soi: Option<f64>,
    /// Drive amplitude A.
    #[arg(long, global = true)]
    a: Option<f64>,
    /// Drive offset B.
    #[arg(long, global = true)]
    b: Option<f64>,
    /// Drive frequency ν.
    #[arg(long, global = true)]
    nu: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    m_min: Option<i32>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    m_max: Option<i32>,
    #[arg(long, global = true)]
    eps_max: Option<f64>,
    #[arg(long, global = true)]
    k_max: Option<f64>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    tau_end: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Static eigenenergies and eigenmodes.
    Spectrum,
    /// Floquet quasienergies and sideband tables.
    Floquet,
    /// Time evolution: probe series, field snapshots, autocorrelation.
    Evolve,
    /// Frequency spectrum and harmonic content of a probe series.
    Fourier,
    /// Collapse and revival analysis of the autocorrelation.
    Revival,
    /// Tabulate J and N with their Wronskian residual.
    BesselDebug,
    /// List the built-in presets.
    Presets,
}

impl Command {
    fn mode(self) -> Option<RunMode> {
        Some(match self {
            Command::Spectrum => RunMode::Static,
            Command::Floquet => RunMode::Floquet,
            Command::Evolve => RunMode::Evolve,
            Command::Fourier => RunMode::Fourier,
            Command::Revival => RunMode::Revival,
            Command::BesselDebug => RunMode::BesselDebug,
            Command::Presets => return None,
        })
    }
}

/// Why a run stopped.
enum Failure {
    Model(Error),
    Io(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.into())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Io(e)
    }
}

fn config_error(reason: String) -> Failure {
    Failure::Model(Error::Parameter { name: "config", reason })
}

fn build_config(cli: &Cli, mode: RunMode) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::default();
    if let Some(name) = &cli.preset {
        let text = presets::lookup(name).ok_or_else(|| {
            Failure::Model(Error::Parameter {
                name: "preset",
                reason: format!("unknown preset `{name}`; available: {}", presets::names().join(", ")),
            })
        })?;
        cfg.apply_text(text)?;
    }
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    let flags: [(&str, Option<String>); 11] = [
        ("rho", cli.rho.map(|v| v.to_string())),
        ("soi", cli.soi.map(|v| v.to_string())),
        ("a", cli.a.map(|v| v.to_string())),
        ("b", cli.b.map(|v| v.to_string())),
        ("nu", cli.nu.map(|v| v.to_string())),
        ("m_min", cli.m_min.map(|v| v.to_string())),
        ("m_max", cli.m_max.map(|v| v.to_string())),
        ("eps_max", cli.eps_max.map(|v| v.to_string())),
        ("k_max", cli.k_max.map(|v| v.to_string())),
        ("dt", cli.dt.map(|v| v.to_string())),
        ("tau_end", cli.tau_end.map(|v| v.to_string())),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| config_error(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    cfg.mode = mode;
    cfg.validate()?;
    Ok(cfg)
}

fn execution(threads: Option<usize>) -> Result<Execution, Failure> {
    match threads {
        Some(0) => Err(Failure::Model(Error::Parameter {
            name: "threads",
            reason: "must be at least 1".into(),
        })),
        Some(1) => Ok(Execution::Sequential),
        #[cfg(feature = "parallel")]
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Failure::Io(e.into()))?;
            Ok(Execution::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => {
            log::warn!("built without the `parallel` feature; running sequentially");
            Ok(Execution::Sequential)
        }
        None if cfg!(feature = "parallel") => Ok(Execution::Parallel),
        None => Ok(Execution::Sequential),
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let Some(mode) = cli.command.mode() else {
        for name in presets::names() {
            println!("{name}");
        }
        return Ok(());
    };
    let cfg = build_config(cli, mode)?;
    let exec = execution(cli.threads)?;
    let summary = commands::dispatch(&cfg, exec)?;
    println!("{}", serde_json::to_string_pretty(&summary).map_err(anyhow::Error::from)?);
    Ok(())
}

fn report(failure: &Failure) -> u8 {
    let (code, body) = match failure {
        Failure::Model(e) => {
            let code = if e.is_validation() { 2 } else { 3 };
            let mut body = json!({ "kind": e.kind(), "message": e.to_string(), "exit_code": code });
            if let Error::Parameter { name, reason } = e {
                body["parameter"] = json!(name);
                body["invariant"] = json!(reason);
            }
            (code, body)
        }
        Failure::Io(e) => (1, json!({ "kind": "io", "message": format!("{e:#}"), "exit_code": 1 })),
    };
    eprintln!("{}", json!({ "error": body }));
    code
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => ExitCode::from(report(&f)),
    }
}
