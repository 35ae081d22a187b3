//! `disorderlab` command-line front end.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::chain::factorization_suite;
use crate::config::{config_hash, parse_grid, ConfigError, Overrides, RunConfig};
use crate::estimators::{free_ids, scan, DensityEstimate, Which};
use crate::par::Execution;
use crate::periodic::{band_info, special_energy_scan, PeriodicTable};
use crate::potential::SingleSitePotential;
use crate::scattering::{single_site, xi_single_sweep};
use crate::thouless::{gamma0, thouless_rhs, SsdTable};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("verification failed: {0}")]
    Verify(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Verify(_) => 1,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn config_err(field: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {e}"))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "disorderlab", version, about = "Scattering and spectral statistics of random 1D Schrödinger operators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default, Clone)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sites per chain (overrides the config).
    #[arg(long)]
    pub sites: Option<usize>,
    /// Replicas per energy (overrides the config).
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Energies: `start:stop:count` or a comma-separated list.
    #[arg(long)]
    pub grid: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Tolerance (command specific).
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single-site scattering data on an energy grid.
    SingleSite {
        #[command(flatten)]
        common: Common,
        /// Coupling constant.
        #[arg(long)]
        alpha: f64,
        /// `delta` or `square` (ignored when --config is given).
        #[arg(long, default_value = "delta")]
        potential: String,
    },
    /// Monte Carlo estimates over a grid.
    Scan {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subset of gamma,dos,ssd,logT.
        #[arg(long, default_value = "gamma,dos,ssd,logT")]
        which: String,
        /// Run replicas sequentially.
        #[arg(long)]
        sequential: bool,
        /// Also write a gnuplot script next to the output.
        #[arg(long)]
        plot: bool,
    },
    /// Periodic reference: discriminant, bands, N_per.
    Bands {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value = "delta")]
        potential: String,
        #[arg(long)]
        plot: bool,
    },
    /// Detect reflectionless and zero-Lyapunov candidate energies.
    SpecialEnergies {
        #[command(flatten)]
        common: Common,
        /// Comma-separated coupling grid.
        #[arg(long, default_value = "0.2,0.4,0.6,0.8,1.0")]
        alphas: String,
        #[arg(long, default_value = "delta")]
        potential: String,
        /// Tolerance for F-constancy.
        #[arg(long, default_value_t = 1e-6)]
        tol_f: f64,
    },
    /// Compare γ̂ - γ₀ with the Thouless integral of a scanned ξ̂ table.
    ThoulessCheck {
        #[command(flatten)]
        common: Common,
        /// Scan CSV with E, gamma and xi columns.
        #[arg(long)]
        ssd: PathBuf,
        /// Energies to check.
        #[arg(long, default_value = "2,5,10,20")]
        energies: String,
    },
    /// Factorization residuals on random short chains.
    AktosunVerify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::SingleSite { common, .. }
            | Command::Scan { common, .. }
            | Command::Bands { common, .. }
            | Command::SpecialEnergies { common, .. }
            | Command::ThoulessCheck { common, .. }
            | Command::AktosunVerify { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::SingleSite { .. } => "single-site",
            Command::Scan { .. } => "scan",
            Command::Bands { .. } => "bands",
            Command::SpecialEnergies { .. } => "special-energies",
            Command::ThoulessCheck { .. } => "thouless-check",
            Command::AktosunVerify { .. } => "aktosun-verify",
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub timestamp: String,
    pub command: String,
}

/// Run a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let command_line = std::env::args().collect::<Vec<_>>().join(" ");
    run_with_label(cli, &command_line)
}

pub fn run_with_label(cli: Cli, command_line: &str) -> Result<(), CliError> {
    let cmd = cli.command;
    let common = cmd.common().clone();
    let config = load_config(&common)?;
    let (output, seed, extra) = match &cmd {
        Command::SingleSite { alpha, potential, .. } => {
            let f = potential_for(&config, potential)?;
            let grid = require_grid(&common)?;
            (single_site_csv(&f, *alpha, &grid)?, common.seed.unwrap_or(0), format!("alpha={alpha}"))
        }
        Command::Scan { which, sequential, .. } => {
            let cfg = config.as_ref().ok_or_else(|| config_err("config", "scan requires --config"))?;
            let grid = require_grid(&common)?;
            let which = Which::parse(which).map_err(|e| config_err("which", e))?;
            let exec = if *sequential { Execution::Sequential } else { Execution::Parallel };
            (scan_csv(cfg, &grid, which, exec)?, cfg.seed(), format!("which={which:?}"))
        }
        Command::Bands { alpha, potential, .. } => {
            let f = potential_for(&config, potential)?;
            let grid = require_grid(&common)?;
            (bands_csv(&f, *alpha, &grid)?, 0, format!("alpha={alpha}"))
        }
        Command::SpecialEnergies { alphas, potential, tol_f, .. } => {
            let f = potential_for(&config, potential)?;
            let grid = require_grid(&common)?;
            let alphas = parse_grid(alphas).map_err(|e| config_err("alphas", e.message))?;
            let tol_r = common.tol.unwrap_or(1e-8);
            let report = special_energy_scan(&f, &alphas, &grid, tol_r, *tol_f).map_err(|e| config_err("grid", e))?;
            let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
            (text, 0, format!("alphas={alphas:?} tol_f={tol_f}"))
        }
        Command::ThoulessCheck { ssd, energies, .. } => {
            let energies = parse_grid(energies).map_err(|e| config_err("energies", e.message))?;
            (thouless_json(ssd, &energies)?, 0, format!("energies={energies:?}"))
        }
        Command::AktosunVerify { trials, .. } => {
            let seed = common.seed.unwrap_or(0);
            let tol = common.tol.unwrap_or(1e-7);
            let report = factorization_suite(seed, *trials).map_err(|e| config_err("trials", e))?;
            let status = if report.max_residual < tol { "PASS" } else { "FAIL" };
            let text = format!(
                "trials={} max_residual={:e} worst_sites={} worst_energy={} tol={:e} {status}\n",
                report.trials, report.max_residual, report.worst_sites, report.worst_energy, tol
            );
            emit(&common, &text)?;
            if status == "FAIL" {
                return Err(CliError::Verify(format!("max residual {:e} >= {tol:e}", report.max_residual)));
            }
            return Ok(());
        }
    };
    emit(&common, &output)?;
    if let Some(out) = &common.out {
        let canonical = config.as_ref().map(|c| c.canonical_json()).unwrap_or_default();
        let grid = common.grid.clone().unwrap_or_default();
        let hash = config_hash(&canonical, &format!("{} grid={grid} {extra}", cmd.name()));
        write_manifest(out, hash, seed, command_line)?;
        if matches!(cmd, Command::Scan { plot: true, .. } | Command::Bands { plot: true, .. }) {
            write_plot(out, cmd.name())?;
        }
    }
    Ok(())
}

fn load_config(common: &Common) -> Result<Option<RunConfig>, CliError> {
    let Some(path) = &common.config else { return Ok(None) };
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let overrides = Overrides { seed: common.seed, sites: common.sites, replicas: common.replicas };
    let cfg = RunConfig::from_json(&text)?.resolve(&overrides);
    cfg.disorder_config()?;
    Ok(Some(cfg))
}

fn potential_for(config: &Option<RunConfig>, name: &str) -> Result<SingleSitePotential, CliError> {
    if let Some(c) = config {
        return Ok(c.potential.clone());
    }
    match name {
        "delta" => Ok(SingleSitePotential::Delta),
        "square" => Ok(SingleSitePotential::Square),
        other => Err(config_err("potential", format!("unknown kind `{other}` (use delta, square, or --config)"))),
    }
}

fn require_grid(common: &Common) -> Result<Vec<f64>, CliError> {
    let spec = common.grid.as_deref().ok_or_else(|| config_err("grid", "--grid is required"))?;
    Ok(parse_grid(spec)?)
}

fn emit(common: &Common, text: &str) -> Result<(), CliError> {
    match &common.out {
        Some(p) => fs::write(p, text).map_err(|e| io_err(p, e)),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string())),
    }
}

fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_manifest(out: &Path, config_hash: String, seed: u64, command: &str) -> Result<(), CliError> {
    let m = RunManifest {
        config_hash,
        seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        command: command.to_string(),
    };
    let path = sidecar(out, ".manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n").map_err(|e| io_err(&path, e))
}

fn write_plot(out: &Path, kind: &str) -> Result<(), CliError> {
    let data = out.display().to_string();
    let body = match kind {
        "scan" => format!(
            "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'E'\n\
             plot '{data}' using 1:2 with lines title 'gamma', \\\n     '{data}' using 1:6 with lines title 'xi'\n"
        ),
        _ => format!(
            "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'E'\n\
             plot '{data}' using 1:2 with lines title 'discriminant', \\\n     '{data}' using 1:6 with lines title 'xi_per'\n"
        ),
    };
    let path = sidecar(out, ".gp");
    fs::write(&path, body).map_err(|e| io_err(&path, e))
}

/// Shortest round-trip decimal; empty for NaN.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::Io(e.to_string()))?;
    for r in rows {
        w.write_record(&r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub const SINGLE_SITE_COLUMNS: [&str; 9] = ["E", "ReT", "ImT", "ReR", "ImR", "absT", "delta", "theta", "xi_single"];

pub fn single_site_csv(f: &SingleSitePotential, alpha: f64, grid: &[f64]) -> Result<String, CliError> {
    let xi = xi_single_sweep(alpha, f, grid).map_err(|e| config_err("grid", e))?;
    let mut rows = Vec::with_capacity(grid.len());
    for (&e, &x) in grid.iter().zip(&xi) {
        let s = single_site(f, alpha, e).map_err(|e| config_err("grid", e))?;
        rows.push(
            [e, s.t.re, s.t.im, s.r.re, s.r.im, s.abs_t, s.delta_phase, s.theta_phase, x].iter().map(|v| fmt_num(*v)).collect(),
        );
    }
    csv_text(&SINGLE_SITE_COLUMNS, rows)
}

pub const SCAN_COLUMNS: [&str; 10] = ["E", "gamma", "gamma_err", "N", "N_err", "xi", "xi_err", "logT_re", "logT_im", "flags"];

pub fn scan_csv(cfg: &RunConfig, grid: &[f64], which: Which, exec: Execution) -> Result<String, CliError> {
    let dc = cfg.disorder_config()?;
    let rows = scan(&dc, grid, which, exec).map_err(|e| config_err("grid", e))?;
    let pair = |d: Option<DensityEstimate>| match d {
        Some(d) => [fmt_num(d.value), fmt_num(d.std_error)],
        None => [String::new(), String::new()],
    };
    let body = rows
        .into_iter()
        .map(|r| {
            let mut v = vec![fmt_num(r.energy)];
            v.extend(pair(r.gamma));
            v.extend(pair(r.dos));
            v.extend(pair(r.ssd));
            match r.log_t {
                Some(l) => v.extend([fmt_num(l.re.value), fmt_num(l.im.value)]),
                None => v.extend([String::new(), String::new()]),
            }
            v.push(r.flags.label());
            v
        })
        .collect();
    csv_text(&SCAN_COLUMNS, body)
}

pub const BANDS_COLUMNS: [&str; 7] = ["E", "discriminant", "in_gap", "gamma_per", "N_per", "xi_per", "abs_lambda_max"];

pub fn bands_csv(f: &SingleSitePotential, alpha: f64, grid: &[f64]) -> Result<String, CliError> {
    let e_max = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let table = PeriodicTable::build(alpha, f, e_max).map_err(|e| config_err("grid", e))?;
    let mut rows = Vec::with_capacity(grid.len());
    for &e in grid {
        let b = band_info(&table, e).map_err(|e| config_err("grid", e))?;
        rows.push(vec![
            fmt_num(e),
            fmt_num(b.discriminant),
            (b.in_gap as u8).to_string(),
            fmt_num(b.gamma_periodic),
            fmt_num(b.n_periodic),
            fmt_num(free_ids(e) - b.n_periodic),
            fmt_num(b.gamma_periodic.exp()),
        ]);
    }
    csv_text(&BANDS_COLUMNS, rows)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThoulessRow {
    #[serde(rename = "E")]
    pub energy: f64,
    pub gamma_lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// `(E, gamma, xi)` columns.
pub type ScanColumns = (Vec<f64>, Vec<f64>, Vec<f64>);

/// Read `(E, gamma, xi)` columns from a scan CSV.
pub fn read_scan_table(path: &Path) -> Result<ScanColumns, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let headers = r.headers().map_err(|e| io_err(path, e))?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| config_err("ssd", format!("missing column `{name}`")))
    };
    let (ie, ig, ix) = (col("E")?, col("gamma")?, col("xi")?);
    let (mut es, mut gs, mut xs) = (vec![], vec![], vec![]);
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let num = |i: usize, name: &str| -> Result<f64, CliError> {
            rec.get(i)
                .filter(|s| !s.is_empty())
                .ok_or_else(|| config_err("ssd", format!("row {}: empty `{name}` cell", line + 1)))?
                .parse::<f64>()
                .map_err(|e| config_err("ssd", format!("row {}: `{name}`: {e}", line + 1)))
        };
        es.push(num(ie, "E")?);
        gs.push(num(ig, "gamma")?);
        xs.push(num(ix, "xi")?);
    }
    Ok((es, gs, xs))
}

pub fn thouless_rows(grid: &[f64], gamma: &[f64], xi: &[f64], energies: &[f64]) -> Result<Vec<ThoulessRow>, CliError> {
    let table = SsdTable::anchored(grid.to_vec(), xi.to_vec()).map_err(|e| config_err("ssd", e))?;
    energies
        .iter()
        .map(|&e| {
            let rhs = thouless_rhs(&table, e).map_err(|err| config_err("energies", err))?;
            let g = interpolate(grid, gamma, e).ok_or_else(|| config_err("energies", format!("{e} outside the table")))?;
            let gamma_lhs = g - gamma0(e);
            Ok(ThoulessRow { energy: e, gamma_lhs, rhs, residual: gamma_lhs - rhs })
        })
        .collect()
}

fn thouless_json(path: &Path, energies: &[f64]) -> Result<String, CliError> {
    let (grid, gamma, xi) = read_scan_table(path)?;
    let rows = thouless_rows(&grid, &gamma, &xi, energies)?;
    Ok(serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n")
}

fn interpolate(x: &[f64], y: &[f64], at: f64) -> Option<f64> {
    if x.is_empty() || at < x[0] || at > *x.last()? {
        return None;
    }
    let i = x.partition_point(|&v| v <= at).clamp(1, x.len().max(2) - 1);
    if x.len() == 1 {
        return Some(y[0]);
    }
    let t = (at - x[i - 1]) / (x[i] - x[i - 1]);
    Some(y[i - 1] + t * (y[i] - y[i - 1]))
}
