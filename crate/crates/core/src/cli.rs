//! Config parsing, sweeps and CSV output for the `hnsense` binary.
//!
//! Interface: `hnsense <task> [--config <path>] [--out <path>] [--threads k]`
//! with tasks `snr-linear`, `qfi-scan`, `nhse-compare`, `meas-time`,
//! `nonpert-scan`, `fig3`, `fig4` and `verify`. The config is a TOML
//! document (`[grid]`, optional task sections, `[output]`; full schema in
//! `docs/config.md`); every key has a task-appropriate default, so a missing
//! or empty config runs the task's reference recipe. Exit codes: `0`
//! success, `2` config/usage error, `3` numerical failure (including any
//! failed row or verification check).
//!
//! ## Determinism contract
//!
//! Identical configs produce byte-identical CSVs: grid points are laid out
//! in document order, computed independently (in parallel, order-preserving)
//! and formatted with fixed 17-significant-digit scientific notation. The
//! data file contains no timestamps; the resolved configuration is written
//! to a `<out>.meta.toml` sidecar. Row-level numerical failures leave `nan`
//! cells plus an error message in the trailing `status` column and do not
//! abort the sweep (the process still exits `3` to flag them).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{derive_hopping_params, ChainParams, Perturbation};
use crate::nonmarkov::{measurement_time, timescales, MeasurementTimeMode};
use crate::nonpert::{optimal_site_number, scattering_matrix, snr_nonpert};
use crate::sensing::{beta_for_total_photons, snr_nhse, snr_qfi_linear};
use crate::{verify, Error, Result};

/// The computations the binary exposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    /// Linear-response homodyne signal, noise, SNR and QFI over a grid.
    SnrLinear,
    /// Fisher information per photon over a grid (exponential-scaling view).
    QfiScan,
    /// Dispersive versus boundary-hop response at equal strength.
    NhseCompare,
    /// Measurement time `τ_M` (SNR = 1) with the chosen envelope.
    MeasTime,
    /// Exact scattering elements and full-vs-linear SNR at finite `ε₀`.
    NonpertScan,
    /// Measurement-time dataset: numeric and analytic `τ_M` vs `N` and `J`.
    Fig3,
    /// Fixed-budget SNR ratio vs `N` with the optimal-length prediction.
    Fig4,
    /// Oracle-equivalence suite: worst relative error per named check.
    Verify,
}

impl Task {
    /// Kebab-case task name as used on the command line.
    pub fn name(self) -> &'static str {
        match self {
            Task::SnrLinear => "snr-linear",
            Task::QfiScan => "qfi-scan",
            Task::NhseCompare => "nhse-compare",
            Task::MeasTime => "meas-time",
            Task::NonpertScan => "nonpert-scan",
            Task::Fig3 => "fig3",
            Task::Fig4 => "fig4",
            Task::Verify => "verify",
        }
    }
}

/// One point of the hopping axis: effective `(J/κ, A)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hopping {
    /// Effective hopping rate in units of the port decay.
    pub j_over_kappa: f64,
    /// Amplification (imaginary gauge) factor per bond.
    pub a: f64,
}

/// Fully resolved run description; serialized verbatim into the metadata
/// sidecar. Axes irrelevant to a task are carried at their defaults and
/// ignored by it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    /// Task to execute.
    pub task: Task,
    /// Site-number axis.
    pub n: Vec<usize>,
    /// Hopping axis, from `a` × `j_over_kappa` or from zipped `(w, delta)`.
    pub hoppings: Vec<Hopping>,
    /// Perturbation strengths `ε₀/κ`.
    pub eps0_over_kappa: Vec<f64>,
    /// Total intracavity photon budgets.
    pub n_tot: Vec<f64>,
    /// Thermal occupations of the waveguide input.
    pub n_th: Vec<f64>,
    /// Integration times `κτ`.
    pub kappa_tau: Vec<f64>,
    /// Boundary-hop phases (`nhse-compare` only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hop_phase: Option<Vec<f64>>,
    /// Envelope used by `meas-time`: `"analytic"` or `"numeric"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meas_time_mode: Option<String>,
    /// CSV destination.
    pub output: PathBuf,
}

// ---------------------------------------------------------------------------
// Raw config document.

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    task: Option<Task>,
    grid: Option<GridSection>,
    nhse: Option<NhseSection>,
    meas_time: Option<MeasTimeSection>,
    output: Option<OutputSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    n: Option<Vec<usize>>,
    a: Option<Vec<f64>>,
    w: Option<Vec<f64>>,
    delta: Option<Vec<f64>>,
    j_over_kappa: Option<Vec<f64>>,
    eps0_over_kappa: Option<Vec<f64>>,
    n_tot: Option<Vec<f64>>,
    n_th: Option<Vec<f64>>,
    kappa_tau: Option<Vec<f64>>,
    allow_even_n: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NhseSection {
    hop_phase: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasTimeSection {
    mode: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    path: Option<PathBuf>,
}

fn config_err(message: impl Into<String>) -> Error {
    Error::Config(message.into())
}

fn odd_range(max: usize) -> Vec<usize> {
    (1..=max).step_by(2).collect()
}

/// Parses and resolves a TOML config document for `task`.
///
/// Defaults (κ = 1 units, `n_th = 0`, homodyne angle `φ = π/2`) and the
/// task reference grids are applied for absent keys; an empty document is a
/// valid config for every task. All physical constraints — odd `N` unless
/// explicitly allowed, `w > δ`, positive rates, stability of every grid
/// point — are validated here, before any computation starts.
pub fn parse_config(task: Task, text: &str) -> Result<RunConfig> {
    let raw: ConfigFile =
        toml::from_str(text).map_err(|e| config_err(format!("malformed config: {e}")))?;
    if let Some(declared) = raw.task {
        if declared != task {
            return Err(config_err(format!(
                "config declares task `{}` but `{}` was requested",
                declared.name(),
                task.name()
            )));
        }
    }
    if task == Task::Verify && (raw.grid.is_some() || raw.nhse.is_some() || raw.meas_time.is_some())
    {
        return Err(config_err(
            "`verify` runs the fixed oracle suite and takes no [grid]/[nhse]/[meas_time] sections",
        ));
    }
    if raw.nhse.is_some() && task != Task::NhseCompare {
        return Err(config_err(format!(
            "[nhse] section is only valid for nhse-compare (task is `{}`)",
            task.name()
        )));
    }
    if raw.meas_time.is_some() && task != Task::MeasTime {
        return Err(config_err(format!(
            "[meas_time] section is only valid for meas-time (task is `{}`)",
            task.name()
        )));
    }
    let grid = raw.grid.unwrap_or_default();

    let n = match grid.n.clone() {
        Some(values) => values,
        None => match task {
            Task::Fig3 => odd_range(51),
            Task::Fig4 => odd_range(251),
            Task::MeasTime => odd_range(11),
            Task::NonpertScan => vec![7],
            Task::Verify => Vec::new(),
            _ => odd_range(21).into_iter().skip(1).collect(), // 3, 5, …, 21
        },
    };
    if task != Task::Verify && n.is_empty() {
        return Err(config_err("grid.n must be non-empty"));
    }
    let allow_even = grid.allow_even_n.unwrap_or(false);
    for &sites in &n {
        if sites == 0 {
            return Err(config_err("grid.n entries must be ≥ 1"));
        }
        if sites % 2 == 0 && !allow_even {
            return Err(config_err(format!(
                "grid.n = {sites} is even; the closed-form protocol assumes odd chains \
                 (set grid.allow_even_n = true to override)"
            )));
        }
    }

    let hoppings = resolve_hoppings(task, &grid)?;

    let eps0_over_kappa = grid.eps0_over_kappa.unwrap_or_else(|| match task {
        Task::Fig3 | Task::MeasTime => vec![1e-8],
        Task::Fig4 => vec![1e-7],
        Task::NonpertScan => vec![1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1],
        _ => vec![1e-6],
    });
    for &eps0 in &eps0_over_kappa {
        if !eps0.is_finite() {
            return Err(config_err(format!(
                "grid.eps0_over_kappa entries must be finite, got {eps0}"
            )));
        }
        if eps0 == 0.0 && requires_nonzero_eps0(task) {
            return Err(config_err(format!(
                "grid.eps0_over_kappa must be nonzero for `{}`",
                task.name()
            )));
        }
    }

    let n_tot = grid.n_tot.unwrap_or_else(|| match task {
        Task::Fig3 | Task::Fig4 | Task::MeasTime => vec![5e9],
        _ => vec![1e8],
    });
    for &value in &n_tot {
        if !value.is_finite() || value <= 0.0 {
            return Err(config_err(format!(
                "grid.n_tot entries must be positive and finite, got {value}"
            )));
        }
    }

    let n_th = grid.n_th.unwrap_or_else(|| vec![0.0]);
    for &value in &n_th {
        if !value.is_finite() || value < 0.0 {
            return Err(config_err(format!(
                "grid.n_th entries must be ≥ 0, got {value}"
            )));
        }
    }

    let kappa_tau = grid.kappa_tau.unwrap_or_else(|| vec![1.0]);
    for &value in &kappa_tau {
        if !value.is_finite() || value <= 0.0 {
            return Err(config_err(format!(
                "grid.kappa_tau entries must be positive and finite, got {value}"
            )));
        }
    }

    let hop_phase = match task {
        Task::NhseCompare => {
            let phases = raw
                .nhse
                .unwrap_or_default()
                .hop_phase
                .unwrap_or_else(|| vec![std::f64::consts::FRAC_PI_2]);
            if phases.is_empty() || phases.iter().any(|p| !p.is_finite()) {
                return Err(config_err("nhse.hop_phase must be non-empty and finite"));
            }
            Some(phases)
        }
        _ => None,
    };

    let meas_time_mode = match task {
        Task::MeasTime => {
            let mode = raw
                .meas_time
                .unwrap_or_default()
                .mode
                .unwrap_or_else(|| "analytic".to_string());
            if mode != "analytic" && mode != "numeric" {
                return Err(config_err(format!(
                    "meas_time.mode must be \"analytic\" or \"numeric\", got \"{mode}\""
                )));
            }
            Some(mode)
        }
        _ => None,
    };

    let output = raw
        .output
        .unwrap_or_default()
        .path
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", task.name())));

    // Every grid point must describe a valid, stable chain before the sweep
    // starts; domain violations are config errors, not row failures.
    for &sites in &n {
        for hopping in &hoppings {
            ChainParams::from_amplification(sites, hopping.j_over_kappa, hopping.a, 1.0).map_err(
                |e| {
                    config_err(format!(
                        "grid point N = {sites}, J/κ = {}, A = {}: {e}",
                        hopping.j_over_kappa, hopping.a
                    ))
                },
            )?;
        }
    }

    Ok(RunConfig {
        task,
        n,
        hoppings,
        eps0_over_kappa,
        n_tot,
        n_th,
        kappa_tau,
        hop_phase,
        meas_time_mode,
        output,
    })
}

/// Tasks whose per-point quantities are undefined at `ε₀ = 0`.
fn requires_nonzero_eps0(task: Task) -> bool {
    matches!(
        task,
        Task::MeasTime | Task::NonpertScan | Task::Fig3 | Task::Fig4
    )
}

fn resolve_hoppings(task: Task, grid: &GridSection) -> Result<Vec<Hopping>> {
    let microscopic = grid.w.is_some() || grid.delta.is_some();
    if microscopic {
        if grid.a.is_some() || grid.j_over_kappa.is_some() {
            return Err(config_err(
                "give either grid.a/grid.j_over_kappa or grid.w/grid.delta, not both",
            ));
        }
        let (Some(w), Some(delta)) = (&grid.w, &grid.delta) else {
            return Err(config_err(
                "grid.w and grid.delta must be given together (paired lists)",
            ));
        };
        if w.len() != delta.len() || w.is_empty() {
            return Err(config_err(
                "grid.w and grid.delta must be non-empty lists of equal length",
            ));
        }
        return w
            .iter()
            .zip(delta)
            .map(|(&w_k, &delta_k)| {
                let (j, a) = derive_hopping_params(w_k, delta_k).map_err(|e| {
                    config_err(format!("grid.w = {w_k}, grid.delta = {delta_k}: {e}"))
                })?;
                Ok(Hopping { j_over_kappa: j, a })
            })
            .collect();
    }
    let a_axis = grid.a.clone().unwrap_or_else(|| match task {
        Task::Fig4 => vec![0.05],
        _ => vec![0.2],
    });
    let j_axis = grid.j_over_kappa.clone().unwrap_or_else(|| match task {
        Task::Fig3 => vec![10.0, 100.0, 1000.0],
        Task::SnrLinear | Task::QfiScan | Task::NhseCompare => vec![100.0],
        _ => vec![1000.0],
    });
    if a_axis.is_empty() || j_axis.is_empty() {
        return Err(config_err("grid.a and grid.j_over_kappa must be non-empty"));
    }
    for &a in &a_axis {
        if !a.is_finite() || a < 0.0 {
            return Err(config_err(format!("grid.a entries must be ≥ 0, got {a}")));
        }
    }
    for &j in &j_axis {
        if !j.is_finite() || j <= 0.0 {
            return Err(config_err(format!(
                "grid.j_over_kappa entries must be > 0, got {j}"
            )));
        }
    }
    // Document order: the amplification axis is outer, hopping rate inner.
    Ok(a_axis
        .iter()
        .flat_map(|&a| j_axis.iter().map(move |&j| Hopping { j_over_kappa: j, a }))
        .collect())
}

// ---------------------------------------------------------------------------
// Datasets.

/// One formatted value of the output table.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    /// Integer column (site numbers).
    Int(i64),
    /// Floating-point column, rendered as `{:.16e}`; non-finite → `nan`.
    Float(f64),
    /// Free-text column (check names).
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) if v.is_finite() => format!("{v:.16e}"),
            Cell::Float(_) => "nan".to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// One row: grid echo plus computed cells, and the row status (`None` = ok).
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    /// All cells except the trailing status column.
    pub cells: Vec<Cell>,
    /// Error message for failed rows.
    pub error: Option<String>,
}

/// An in-memory result table with a fixed column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Header names, including the trailing `status`.
    pub columns: Vec<&'static str>,
    /// Data rows in grid order.
    pub rows: Vec<Row>,
}

impl Dataset {
    /// Number of rows whose computation failed.
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    /// Renders the table as CSV text (also used for byte-identity tests).
    pub fn to_csv_string(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(&self.columns)
            .expect("in-memory CSV write cannot fail");
        for row in &self.rows {
            let mut record: Vec<String> = row.cells.iter().map(Cell::render).collect();
            record.push(match &row.error {
                None => "ok".to_string(),
                Some(message) => format!("error: {message}"),
            });
            writer
                .write_record(&record)
                .expect("in-memory CSV write cannot fail");
        }
        let bytes = writer
            .into_inner()
            .expect("in-memory CSV flush cannot fail");
        String::from_utf8(bytes).expect("CSV output is UTF-8")
    }
}

/// Column layout per task (trailing `status` included).
pub fn columns(task: Task) -> Vec<&'static str> {
    match task {
        Task::SnrLinear => vec![
            "n",
            "a",
            "j_over_kappa",
            "eps0_over_kappa",
            "n_tot",
            "n_th",
            "kappa_tau",
            "beta",
            "signal",
            "noise",
            "snr",
            "qfi",
            "status",
        ],
        Task::QfiScan => vec![
            "n",
            "a",
            "j_over_kappa",
            "eps0_over_kappa",
            "n_tot",
            "n_th",
            "kappa_tau",
            "qfi",
            "qfi_per_photon",
            "status",
        ],
        Task::NhseCompare => vec![
            "n",
            "a",
            "j_over_kappa",
            "eps0_over_kappa",
            "n_tot",
            "n_th",
            "kappa_tau",
            "hop_phase",
            "snr_dispersive",
            "qfi_dispersive",
            "snr_hop",
            "qfi_hop",
            "qfi_hop_over_dispersive",
            "status",
        ],
        Task::MeasTime => vec![
            "n",
            "a",
            "j_over_kappa",
            "eps0_over_kappa",
            "n_tot",
            "n_th",
            "kappa_tau_m",
            "kappa_t_rt",
            "kappa_t_esc",
            "kappa_tau_star",
            "status",
        ],
        Task::NonpertScan => vec![
            "n",
            "a",
            "j_over_kappa",
            "eps0_over_kappa",
            "n_tot",
            "kappa_tau",
            "reflection",
            "conversion",
            "snr_full",
            "snr_linear",
            "snr_full_over_linear",
            "status",
        ],
        Task::Fig3 => vec![
            "N",
            "J_over_kappa",
            "kappa_tau_M_numeric",
            "kappa_tau_M_analytic",
            "kappa_t_rt",
            "kappa_tau_star",
            "status",
        ],
        Task::Fig4 => vec![
            "N",
            "snr_ratio",
            "snr_linear_prediction",
            "N_star",
            "status",
        ],
        Task::Verify => vec!["check", "max_rel_err", "tolerance", "status"],
    }
}

/// One grid point in the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Point {
    n: usize,
    hopping: Hopping,
    eps0: f64,
    n_tot: f64,
    n_th: f64,
    tau: f64,
    hop_phase: f64,
}

fn points(config: &RunConfig) -> Vec<Point> {
    let phases = config
        .hop_phase
        .clone()
        .unwrap_or_else(|| vec![std::f64::consts::FRAC_PI_2]);
    let mut all = Vec::new();
    for &n in &config.n {
        for &hopping in &config.hoppings {
            for &eps0 in &config.eps0_over_kappa {
                for &n_tot in &config.n_tot {
                    for &n_th in &config.n_th {
                        for &tau in &config.kappa_tau {
                            for &hop_phase in &phases {
                                all.push(Point {
                                    n,
                                    hopping,
                                    eps0,
                                    n_tot,
                                    n_th,
                                    tau,
                                    hop_phase,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    all
}

/// Executes the task over its grid and assembles the result table.
///
/// Points are evaluated in parallel with an order-preserving map, so the
/// dataset is identical for any thread count. Per-point numerical failures
/// become `nan`-filled rows with the error in `status`; the sweep continues.
pub fn run_sweep(config: &RunConfig) -> Result<Dataset> {
    let columns = columns(config.task);
    if config.task == Task::Verify {
        let rows = verify::run_all()?
            .into_iter()
            .map(|check| Row {
                cells: vec![
                    Cell::Text(check.name.to_string()),
                    Cell::Float(check.max_rel_err),
                    Cell::Float(check.tolerance),
                ],
                error: (!check.passed).then(|| "tolerance exceeded".to_string()),
            })
            .collect();
        return Ok(Dataset { columns, rows });
    }
    let task = config.task;
    let mode = config.meas_time_mode.clone();
    let rows: Vec<Row> = points(config)
        .into_par_iter()
        .map(|point| {
            let echo = echo_cells(task, &point);
            let computed_len = columns.len() - echo.len() - 1;
            match compute_point(task, mode.as_deref(), &point) {
                Ok(tail) => {
                    debug_assert_eq!(tail.len(), computed_len);
                    let error = tail
                        .iter()
                        .any(|c| matches!(c, Cell::Float(v) if !v.is_finite()))
                        .then(|| "non-finite result".to_string());
                    let mut cells = echo;
                    cells.extend(tail);
                    Row { cells, error }
                }
                Err(e) => {
                    let mut cells = echo;
                    cells.extend(std::iter::repeat_n(Cell::Float(f64::NAN), computed_len));
                    Row {
                        cells,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();
    Ok(Dataset { columns, rows })
}

fn echo_cells(task: Task, point: &Point) -> Vec<Cell> {
    let n = Cell::Int(point.n as i64);
    let a = Cell::Float(point.hopping.a);
    let j = Cell::Float(point.hopping.j_over_kappa);
    let eps0 = Cell::Float(point.eps0);
    let n_tot = Cell::Float(point.n_tot);
    let n_th = Cell::Float(point.n_th);
    let tau = Cell::Float(point.tau);
    match task {
        Task::SnrLinear | Task::QfiScan => vec![n, a, j, eps0, n_tot, n_th, tau],
        Task::NhseCompare => vec![
            n,
            a,
            j,
            eps0,
            n_tot,
            n_th,
            tau,
            Cell::Float(point.hop_phase),
        ],
        Task::MeasTime => vec![n, a, j, eps0, n_tot, n_th],
        Task::NonpertScan => vec![n, a, j, eps0, n_tot, tau],
        Task::Fig3 => vec![n, j],
        Task::Fig4 => vec![n],
        Task::Verify => unreachable!("verify rows are not grid points"),
    }
}

fn compute_point(task: Task, mode: Option<&str>, point: &Point) -> Result<Vec<Cell>> {
    let params =
        ChainParams::from_amplification(point.n, point.hopping.j_over_kappa, point.hopping.a, 1.0)?
            .with_n_th(point.n_th)?;
    match task {
        Task::SnrLinear => {
            let beta = beta_for_total_photons(&params, point.n_tot)?;
            let driven = params.with_beta(beta)?;
            let result = snr_qfi_linear(&driven, point.eps0, point.tau)?;
            Ok(float_cells(&[
                beta,
                result.signal,
                result.noise,
                result.snr,
                result.qfi,
            ]))
        }
        Task::QfiScan => {
            let beta = beta_for_total_photons(&params, point.n_tot)?;
            let driven = params.with_beta(beta)?;
            let result = snr_qfi_linear(&driven, point.eps0, point.tau)?;
            Ok(float_cells(&[result.qfi, result.qfi / point.n_tot]))
        }
        Task::NhseCompare => {
            let beta = beta_for_total_photons(&params, point.n_tot)?;
            let driven = params.with_beta(beta)?;
            let dispersive = snr_qfi_linear(&driven, point.eps0, point.tau)?;
            let hop = snr_nhse(
                &driven,
                &Perturbation::BoundaryHop {
                    epsilon: point.eps0,
                    hop_phase: point.hop_phase,
                },
                point.tau,
            )?;
            // The fixed-angle SNR can be killed by the hop-phase symmetry
            // (e.g. φ = π/2 measures P̂ but a π/2 hop leaves ⟨P̂⟩ unshifted),
            // so the headline comparison is the quadrature-optimized QFI.
            Ok(float_cells(&[
                dispersive.snr,
                dispersive.qfi,
                hop.snr,
                hop.qfi,
                hop.qfi / dispersive.qfi,
            ]))
        }
        Task::MeasTime => {
            let chosen = match mode {
                Some("numeric") => MeasurementTimeMode::Numeric,
                _ => MeasurementTimeMode::Analytic,
            };
            let tau_m = measurement_time(&params, point.eps0, point.n_tot, chosen)?;
            let ts = timescales(&params, point.eps0, point.n_tot)?;
            Ok(float_cells(&[
                tau_m,
                ts.t_roundtrip,
                ts.t_escape,
                ts.tau_star,
            ]))
        }
        Task::NonpertScan => {
            let sm = scattering_matrix(0.0, &params, point.eps0)?;
            let full = snr_nonpert(&params, point.eps0, point.tau, point.n_tot)?;
            let beta = beta_for_total_photons(&params, point.n_tot)?;
            let linear = snr_qfi_linear(&params.with_beta(beta)?, point.eps0, point.tau)?.snr;
            Ok(float_cells(&[
                sm.r.re,
                sm.t.re,
                full,
                linear,
                full / linear,
            ]))
        }
        Task::Fig3 => {
            let numeric = measurement_time(
                &params,
                point.eps0,
                point.n_tot,
                MeasurementTimeMode::Numeric,
            )?;
            let analytic = measurement_time(
                &params,
                point.eps0,
                point.n_tot,
                MeasurementTimeMode::Analytic,
            )?;
            let ts = timescales(&params, point.eps0, point.n_tot)?;
            Ok(float_cells(&[
                numeric,
                analytic,
                ts.t_roundtrip,
                ts.tau_star,
            ]))
        }
        Task::Fig4 => {
            let full = snr_nonpert(&params, point.eps0, point.tau, point.n_tot)?;
            let single = ChainParams::from_amplification(
                1,
                point.hopping.j_over_kappa,
                point.hopping.a,
                1.0,
            )?
            .with_n_th(point.n_th)?;
            let full_single = snr_nonpert(&single, point.eps0, point.tau, point.n_tot)?;
            let beta = beta_for_total_photons(&params, point.n_tot)?;
            let linear = snr_qfi_linear(&params.with_beta(beta)?, point.eps0, point.tau)?.snr;
            let beta_single = beta_for_total_photons(&single, point.n_tot)?;
            let linear_single =
                snr_qfi_linear(&single.with_beta(beta_single)?, point.eps0, point.tau)?.snr;
            let n_star = optimal_site_number(point.hopping.a, point.eps0, 1.0)?;
            Ok(float_cells(&[
                full / full_single,
                linear / linear_single,
                n_star,
            ]))
        }
        Task::Verify => unreachable!("verify rows are not grid points"),
    }
}

fn float_cells(values: &[f64]) -> Vec<Cell> {
    values.iter().map(|&v| Cell::Float(v)).collect()
}

// ---------------------------------------------------------------------------
// Emission.

/// Writes the dataset as UTF-8 CSV (header always present).
pub fn emit_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    fs::write(path, dataset.to_csv_string()).map_err(|e| io_with_path(e, path))
}

/// Writes the resolved config to the `<out>.meta.toml` sidecar.
pub fn emit_metadata(config: &RunConfig) -> Result<()> {
    let text = toml::to_string_pretty(config)
        .map_err(|e| Error::Config(format!("cannot serialize resolved config: {e}")))?;
    let path = metadata_path(&config.output);
    fs::write(&path, text).map_err(|e| io_with_path(e, &path))
}

/// Sidecar path for a given CSV destination.
pub fn metadata_path(out: &Path) -> PathBuf {
    PathBuf::from(format!("{}.meta.toml", out.display()))
}

fn io_with_path(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    ))
}

// ---------------------------------------------------------------------------
// Command-line entry point.

#[derive(Debug, Parser)]
#[command(
    name = "hnsense",
    version,
    about = "Driven non-Hermitian lattice sensor: closed-form SNR/QFI datasets with brute-force verification"
)]
struct CommandLine {
    #[command(subcommand)]
    task: TaskCommand,
}

#[derive(Debug, Subcommand)]
enum TaskCommand {
    /// Linear-response homodyne signal, noise, SNR and QFI over a grid.
    SnrLinear(TaskArgs),
    /// Fisher information per photon over a grid.
    QfiScan(TaskArgs),
    /// Dispersive versus boundary-hop response at equal strength.
    NhseCompare(TaskArgs),
    /// Measurement time (SNR = 1) per grid point.
    MeasTime(TaskArgs),
    /// Exact scattering and full-vs-linear SNR at finite perturbation.
    NonpertScan(TaskArgs),
    /// Measurement-time dataset over N and J (numeric and analytic).
    Fig3(TaskArgs),
    /// Fixed-budget SNR ratio over N with the optimal-length prediction.
    Fig4(TaskArgs),
    /// Run the oracle-equivalence suite and tabulate worst errors.
    Verify(TaskArgs),
}

#[derive(Debug, Args)]
struct TaskArgs {
    /// TOML config file; omit to run the task's reference defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV destination (overrides [output].path; default `<task>.csv`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the sweep (default: all cores; env HNSENSE_THREADS).
    #[arg(long)]
    threads: Option<usize>,
}

impl TaskCommand {
    fn split(self) -> (Task, TaskArgs) {
        match self {
            TaskCommand::SnrLinear(args) => (Task::SnrLinear, args),
            TaskCommand::QfiScan(args) => (Task::QfiScan, args),
            TaskCommand::NhseCompare(args) => (Task::NhseCompare, args),
            TaskCommand::MeasTime(args) => (Task::MeasTime, args),
            TaskCommand::NonpertScan(args) => (Task::NonpertScan, args),
            TaskCommand::Fig3(args) => (Task::Fig3, args),
            TaskCommand::Fig4(args) => (Task::Fig4, args),
            TaskCommand::Verify(args) => (Task::Verify, args),
        }
    }
}

/// Thread-count override: `--threads` wins, then `HNSENSE_THREADS`.
fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("HNSENSE_THREADS") {
        Ok(text) => {
            let parsed: usize = text.parse().map_err(|_| {
                config_err(format!(
                    "HNSENSE_THREADS must be a positive integer, got \"{text}\""
                ))
            })?;
            if parsed == 0 {
                return Err(config_err("HNSENSE_THREADS must be ≥ 1"));
            }
            Ok(Some(parsed))
        }
        Err(_) => Ok(None),
    }
}

/// Parses `argv`, runs the requested task and returns the process exit code
/// (`0` ok, `2` usage/config, `3` numerical failure).
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let parsed = match CommandLine::try_parse_from(argv) {
        Ok(parsed) => parsed,
        Err(e) => {
            // clap prints help/version to stdout (exit 0) and usage errors
            // to stderr (exit 2).
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(parsed) {
        Ok(summary) => {
            if summary.failed == 0 {
                0
            } else {
                eprintln!(
                    "{} of {} rows failed; see the status column in {}",
                    summary.failed,
                    summary.rows,
                    summary.output.display()
                );
                3
            }
        }
        Err(e) => {
            eprintln!("{e}");
            match e {
                Error::Config(_)
                | Error::InvalidParameter(_)
                | Error::Unstable(_)
                | Error::Io(_) => 2,
                _ => 3,
            }
        }
    }
}

struct RunSummary {
    rows: usize,
    failed: usize,
    output: PathBuf,
}

fn execute(parsed: CommandLine) -> Result<RunSummary> {
    let (task, args) = parsed.task.split();
    let text = match &args.config {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut config = parse_config(task, &text)?;
    if let Some(out) = args.out {
        config.output = out;
    }
    let dataset = match resolve_threads(args.threads)? {
        None => run_sweep(&config)?,
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| config_err(format!("cannot build a {threads}-thread pool: {e}")))?
            .install(|| run_sweep(&config))?,
    };
    emit_csv(&dataset, &config.output)?;
    emit_metadata(&config)?;
    if task == Task::Verify {
        for row in &dataset.rows {
            println!(
                "{:<40} {:>12} (tolerance {:>8}) {}",
                row.cells[0].render(),
                format!("{:.3e}", cell_value(&row.cells[1])),
                format!("{:.1e}", cell_value(&row.cells[2])),
                if row.error.is_none() { "ok" } else { "FAIL" }
            );
        }
    }
    println!(
        "wrote {} rows to {} ({} failed)",
        dataset.rows.len(),
        config.output.display(),
        dataset.failed_rows()
    );
    Ok(RunSummary {
        rows: dataset.rows.len(),
        failed: dataset.failed_rows(),
        output: config.output,
    })
}

fn cell_value(cell: &Cell) -> f64 {
    match cell {
        Cell::Float(v) => *v,
        Cell::Int(v) => *v as f64,
        Cell::Text(_) => f64::NAN,
    }
}
