//! Config ingestion and the command workflows behind the `curvebody` binary.
//!
//! Every command reads one JSON document carrying `"schema_version": "1"`
//! and writes its results under an output directory:
//!
//! | command            | files                              |
//! |--------------------|------------------------------------|
//! | `check`            | `report.json`                      |
//! | `simulate-reduced` | `trajectory.csv`, `summary.json`   |
//! | `simulate-full`    | `trajectory.csv`, `summary.json`   |
//! | `cross-validate`   | `report.json`                      |
//! | `scan`             | `scan.csv`                         |
//!
//! Exit codes: 0 success, 1 criterion failed, 2 usage or validation error,
//! 3 the run hit a singularity.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::diagnostics::{
    conservation_series, criterion_report, cross_validate, default_rho_grid, simulate_full, simulate_reduced,
    ConservationSeries, CriterionReport, CrossValidation, CrossValidationOptions, RunKind, Verdict, DEFAULT_TOL_B,
    DEFAULT_TOL_C,
};
use crate::dynamics::relative_equilibrium_spin;
use crate::error::{Error, Result};
use crate::geometry::CurvatureSign;
use crate::integrator::{IntegrationSettings, Termination, Trajectory};
use crate::model::{embed, regular_polygon, synthesize_initial_with, InitialOptions, PolygonConfig, ReducedState};

pub const SCHEMA_VERSION: &str = "1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INADMISSIBLE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SINGULARITY: i32 = 3;

/// Environment variable capping the number of scan worker threads.
pub const THREADS_ENV: &str = "CURVEBODY_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularSpec {
    pub n: usize,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub rho: f64,
    #[serde(default)]
    pub rho_dot: f64,
    /// Required unless `relative_equilibrium` is set.
    #[serde(default)]
    pub theta_dot: Option<f64>,
    /// Spin at the rate that keeps `ρ` constant.
    #[serde(default)]
    pub relative_equilibrium: bool,
    #[serde(default)]
    pub lower_root: bool,
    #[serde(default)]
    pub z_direction: Option<Vec<f64>>,
}

fn default_t_span() -> [f64; 2] {
    [0.0, 10.0]
}

fn default_tol_b() -> f64 {
    DEFAULT_TOL_B
}

fn default_tol_c() -> f64 {
    DEFAULT_TOL_C
}

fn default_deviation_bound() -> f64 {
    1e-6
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: String,
    pub sigma: CurvatureSign,
    pub dim: usize,
    #[serde(default)]
    pub masses: Option<Vec<f64>>,
    #[serde(default)]
    pub beta: Option<Vec<f64>>,
    #[serde(default)]
    pub regular: Option<RegularSpec>,
    #[serde(default)]
    pub initial: Option<InitialSpec>,
    #[serde(default)]
    pub integration: IntegrationSettings,
    #[serde(default = "default_t_span")]
    pub t_span: [f64; 2],
    #[serde(default)]
    pub rho_grid: Option<Vec<f64>>,
    #[serde(default = "default_tol_b")]
    pub tol_b: f64,
    #[serde(default = "default_tol_c")]
    pub tol_c: f64,
    #[serde(default = "default_deviation_bound")]
    pub deviation_bound: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub strict_b: bool,
    #[serde(default)]
    pub project: bool,
    #[serde(default)]
    pub force: bool,
}

/// A [`RunConfig`] after validation.
#[derive(Debug, Clone)]
pub struct ValidatedRun {
    pub config: PolygonConfig,
    pub initial: Option<ReducedState>,
    pub settings: IntegrationSettings,
    pub t_span: (f64, f64),
    pub rho_grid: Vec<f64>,
}

fn check_schema(version: &str) -> Result<()> {
    if version == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(Error::Validation(format!("unsupported schema_version {version:?}, expected {SCHEMA_VERSION:?}")))
    }
}

impl RunConfig {
    pub fn polygon(&self) -> Result<PolygonConfig> {
        match (&self.beta, &self.regular) {
            (Some(_), Some(_)) => Err(Error::Validation("give either \"beta\" or \"regular\", not both".into())),
            (None, None) => Err(Error::Validation("one of \"beta\" or \"regular\" is required".into())),
            (Some(beta), None) => {
                let masses = self.masses.clone().unwrap_or_else(|| vec![1.0; beta.len()]);
                PolygonConfig::new(masses, beta.clone(), self.sigma, self.dim)
            }
            (None, Some(spec)) => {
                let masses = self.masses.clone().unwrap_or_else(|| vec![1.0; spec.n]);
                regular_polygon(spec.n, spec.phase, masses, self.sigma, self.dim)
            }
        }
    }

    pub fn validate(&self) -> Result<ValidatedRun> {
        check_schema(&self.schema_version)?;
        let config = self.polygon()?;
        self.integration.validate()?;
        let [t0, t1] = self.t_span;
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return Err(Error::Validation(format!("t_span [{t0}, {t1}] must be increasing")));
        }
        for (name, tol) in [("tol_b", self.tol_b), ("tol_c", self.tol_c), ("deviation_bound", self.deviation_bound)] {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(Error::Validation(format!("{name} must be positive, got {tol}")));
            }
        }
        let rho_grid = match &self.rho_grid {
            Some(g) if g.is_empty() => return Err(Error::Validation("rho_grid is empty".into())),
            Some(g) => g.clone(),
            None => default_rho_grid(self.sigma),
        };
        let initial = self.initial.as_ref().map(|spec| initial_state(&config, spec)).transpose()?;
        Ok(ValidatedRun { config, initial, settings: self.integration.clone(), t_span: (t0, t1), rho_grid })
    }
}

fn initial_state(config: &PolygonConfig, spec: &InitialSpec) -> Result<ReducedState> {
    let theta_dot = match (spec.relative_equilibrium, spec.theta_dot) {
        (true, Some(_)) => {
            return Err(Error::Validation("theta_dot is implied by relative_equilibrium; drop one".into()))
        }
        (true, None) => {
            if spec.rho_dot != 0.0 {
                return Err(Error::Validation("a relative equilibrium needs rho_dot = 0".into()));
            }
            relative_equilibrium_spin(config, spec.rho)?
        }
        (false, Some(w)) => w,
        (false, None) => return Err(Error::Validation("initial.theta_dot is required".into())),
    };
    let options = InitialOptions { lower_root: spec.lower_root, z_direction: spec.z_direction.clone() };
    synthesize_initial_with(config, spec.rho, spec.rho_dot, theta_dot, &options)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassMode {
    Equal,
    Random,
}

impl MassMode {
    fn as_str(self) -> &'static str {
        match self {
            Self::Equal => "equal",
            Self::Random => "random",
        }
    }
}

fn default_dim() -> usize {
    3
}

/// Batch of criterion checks over body counts, masses, perturbations and signs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub schema_version: String,
    /// Inclusive range of body counts.
    pub n_range: [usize; 2],
    pub mass_mode: MassMode,
    /// Offsets added to the angle of the third body (the second when `n = 2`).
    pub perturbations: Vec<f64>,
    pub sigmas: Vec<CurvatureSign>,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub rho_grid: Option<Vec<f64>>,
    #[serde(default = "default_tol_b")]
    pub tol_b: f64,
    #[serde(default = "default_tol_c")]
    pub tol_c: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// A JSON document written by one of the commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document<T> {
    pub schema_version: String,
    pub command: String,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Document<T> {
    fn new(command: &str, body: T) -> Self {
        Self { schema_version: SCHEMA_VERSION.into(), command: command.into(), body }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckBody {
    pub admissible: bool,
    pub report: CriterionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub run: RunKind,
    pub off_criterion: bool,
    pub projected: bool,
    pub termination: Termination,
    pub samples: usize,
    pub t_final: f64,
    pub angular_momentum_initial: f64,
    pub angular_momentum_max_drift: f64,
    pub wedge_c12_max_drift: Option<f64>,
    pub constraint_drift_max: f64,
    pub tangency_drift_max: f64,
    /// Extremes of `ρ` (planar radius of body 1 on full runs).
    pub rho_min: f64,
    pub rho_max: f64,
    pub series: ConservationSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidateBody {
    pub deviation_bound: f64,
    pub max_deviation: f64,
    pub passed: bool,
    pub result: CrossValidation,
}

/// Command-line switches that override the config file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Flags {
    pub out: Option<PathBuf>,
    pub force: bool,
    pub strict_b: bool,
    pub project: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Check,
    SimulateReduced,
    SimulateFull,
    CrossValidate,
    Scan,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Check => "check",
            Self::SimulateReduced => "simulate-reduced",
            Self::SimulateFull => "simulate-full",
            Self::CrossValidate => "cross-validate",
            Self::Scan => "scan",
        }
    }
}

/// Runs `command` and returns the process exit code. Errors go to stderr.
pub fn run(command: Command, config_path: &Path, flags: &Flags) -> i32 {
    let outcome = match command {
        Command::Check => cmd_check(config_path, flags),
        Command::SimulateReduced => cmd_simulate(config_path, RunKind::Reduced, flags),
        Command::SimulateFull => cmd_simulate(config_path, RunKind::Full, flags),
        Command::CrossValidate => cmd_cross_validate(config_path, flags),
        Command::Scan => cmd_scan(config_path, flags),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("curvebody {}: {e}", command.name());
            match e {
                Error::Singularity(_) => EXIT_SINGULARITY,
                _ => EXIT_USAGE,
            }
        }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    read_json(path)
}

fn output_dir(flags: &Flags, from_config: &Option<PathBuf>) -> Result<PathBuf> {
    let dir = flags.out.clone().or_else(|| from_config.clone()).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:?}")
}

pub fn cmd_check(config_path: &Path, flags: &Flags) -> Result<i32> {
    let cfg = load_run_config(config_path)?;
    let run = cfg.validate()?;
    let dir = output_dir(flags, &cfg.output_dir)?;
    let report = criterion_report(&run.config, &run.rho_grid, cfg.tol_b, cfg.tol_c)?;
    let admissible = report.is_admissible();
    let doc = Document::new(Command::Check.name(), CheckBody { admissible, report });
    write_json(&dir.join("report.json"), &doc)?;
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(if admissible { EXIT_OK } else { EXIT_INADMISSIBLE })
}

/// Column names of `trajectory.csv`.
pub fn trajectory_header(kind: RunKind, config: &PolygonConfig) -> Vec<String> {
    let mut header = vec!["time".to_string()];
    match kind {
        RunKind::Reduced => {
            header.extend(["rho", "rho_dot", "theta", "theta_dot"].map(String::from));
            header.extend((1..=config.z_dim()).map(|i| format!("z_{i}")));
            header.extend((1..=config.z_dim()).map(|i| format!("zdot_{i}")));
        }
        RunKind::Full => {
            for prefix in ["q", "qdot"] {
                for body in 1..=config.n() {
                    header.extend((1..=config.dim()).map(|c| format!("{prefix}_{body}_{c}")));
                }
            }
        }
    }
    header
}

pub fn trajectory_csv(kind: RunKind, config: &PolygonConfig, trajectory: &Trajectory) -> String {
    let mut out = trajectory_header(kind, config).join(",");
    out.push('\n');
    for (t, y) in trajectory.times.iter().zip(&trajectory.samples) {
        out.push_str(&format_float(*t));
        for v in y {
            out.push(',');
            out.push_str(&format_float(*v));
        }
        out.push('\n');
    }
    out
}

fn rho_extremes(kind: RunKind, trajectory: &Trajectory) -> (f64, f64) {
    let rho = |y: &Vec<f64>| match kind {
        RunKind::Reduced => y[0],
        RunKind::Full => y[0].hypot(y[1]),
    };
    trajectory.samples.iter().map(rho).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r), hi.max(r)))
}

pub fn cmd_simulate(config_path: &Path, kind: RunKind, flags: &Flags) -> Result<i32> {
    let cfg = load_run_config(config_path)?;
    let run = cfg.validate()?;
    let command = match kind {
        RunKind::Reduced => Command::SimulateReduced,
        RunKind::Full => Command::SimulateFull,
    };
    let initial =
        run.initial.as_ref().ok_or_else(|| Error::Validation("\"initial\" is required for simulation".into()))?;
    let force = flags.force || cfg.force;
    let report = criterion_report(&run.config, &run.rho_grid, cfg.tol_b, cfg.tol_c)?;
    let off_criterion = !report.is_admissible();
    if kind == RunKind::Reduced && off_criterion && !force {
        return Err(Error::Criterion(format!(
            "configuration is inadmissible ({:?}); pass --force to simulate anyway",
            report.verdict
        )));
    }
    let dir = output_dir(flags, &cfg.output_dir)?;
    let project = flags.project || cfg.project;
    let trajectory = match kind {
        RunKind::Reduced => {
            simulate_reduced(&run.config, initial, run.t_span, &run.settings, flags.strict_b || cfg.strict_b)?
        }
        RunKind::Full => simulate_full(&run.config, &embed(initial, &run.config)?, run.t_span, &run.settings, project)?,
    };
    fs::write(dir.join("trajectory.csv"), trajectory_csv(kind, &run.config, &trajectory))?;

    let series = conservation_series(&trajectory, kind, &run.config)?;
    let (rho_min, rho_max) = rho_extremes(kind, &trajectory);
    let summary = SimulationSummary {
        run: kind,
        off_criterion,
        projected: kind == RunKind::Full && project,
        termination: trajectory.termination.clone(),
        samples: trajectory.len(),
        t_final: trajectory.times.last().copied().unwrap_or(run.t_span.0),
        angular_momentum_initial: series.angular_momentum.first().copied().unwrap_or(0.0),
        angular_momentum_max_drift: series.angular_momentum_drift(),
        wedge_c12_max_drift: series.wedge_c12_drift(),
        constraint_drift_max: series.max_constraint_drift(),
        tangency_drift_max: series.max_tangency_drift(),
        rho_min,
        rho_max,
        series,
    };
    write_json(&dir.join("summary.json"), &Document::new(command.name(), summary))?;
    if let Termination::Singularity { time, description } = &trajectory.termination {
        eprintln!("curvebody {}: singularity at t = {time}: {description}", command.name());
        return Ok(EXIT_SINGULARITY);
    }
    if let Termination::StepCollapse { time, step } = &trajectory.termination {
        eprintln!("curvebody {}: step size collapsed to {step:e} at t = {time}", command.name());
        return Ok(EXIT_SINGULARITY);
    }
    Ok(EXIT_OK)
}

pub fn cmd_cross_validate(config_path: &Path, flags: &Flags) -> Result<i32> {
    let cfg = load_run_config(config_path)?;
    let run = cfg.validate()?;
    let initial =
        run.initial.as_ref().ok_or_else(|| Error::Validation("\"initial\" is required for cross-validation".into()))?;
    let options = CrossValidationOptions {
        force: flags.force || cfg.force,
        strict_b: flags.strict_b || cfg.strict_b,
        project: flags.project || cfg.project,
    };
    let dir = output_dir(flags, &cfg.output_dir)?;
    let result = cross_validate(&run.config, initial, run.t_span, &run.settings, options)?;
    let max_deviation = result.max_deviation();
    let passed = result.completed() && max_deviation <= cfg.deviation_bound;
    let code = if !result.completed() {
        EXIT_SINGULARITY
    } else if passed {
        EXIT_OK
    } else {
        EXIT_INADMISSIBLE
    };
    let doc = Document::new(
        Command::CrossValidate.name(),
        CrossValidateBody { deviation_bound: cfg.deviation_bound, max_deviation, passed, result },
    );
    write_json(&dir.join("report.json"), &doc)?;
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(code)
}

/// One configuration of a scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub n: usize,
    pub sigma: CurvatureSign,
    pub mass_mode: MassMode,
    pub perturbation: f64,
    pub masses: Vec<f64>,
    pub outcome: std::result::Result<CriterionReport, String>,
}

pub const SCAN_HEADER: &str = "n,sigma,mass_mode,perturbation,masses,b_spread_rel_max,b_spread_abs_max,c_max,verdict,failing_rho,failing_index,error";

impl ScanRow {
    fn csv_line(&self) -> String {
        let masses: Vec<String> = self.masses.iter().map(|m| format_float(*m)).collect();
        let mut line = format!(
            "{},{},{},{},{}",
            self.n,
            self.sigma.as_int(),
            self.mass_mode.as_str(),
            format_float(self.perturbation),
            masses.join(";")
        );
        match &self.outcome {
            Ok(report) => {
                let (verdict, rho, index) = match &report.verdict {
                    Verdict::Admissible => ("admissible", String::new(), String::new()),
                    Verdict::Inadmissible { rho, index, .. } => ("inadmissible", format_float(*rho), index.to_string()),
                };
                let _ = write!(
                    line,
                    ",{},{},{},{verdict},{rho},{index},",
                    format_float(report.max_b_spread_rel()),
                    format_float(report.max_b_spread_abs()),
                    format_float(report.max_c()),
                );
            }
            Err(message) => {
                let clean = message.replace([',', '\n', '"'], ";");
                let _ = write!(line, ",,,,error,,,{clean}");
            }
        }
        line
    }
}

/// Evaluates every configuration of the scan, in a fixed order.
pub fn scan_rows(scan: &ScanConfig) -> Result<Vec<ScanRow>> {
    check_schema(&scan.schema_version)?;
    let [lo, hi] = scan.n_range;
    if lo > hi || scan.perturbations.is_empty() || scan.sigmas.is_empty() {
        return Err(Error::Validation("scan describes no configurations".into()));
    }
    if lo < 2 {
        return Err(Error::Validation(format!("n_range must start at 2 or more, got {lo}")));
    }
    let mut jobs = Vec::new();
    for &sigma in &scan.sigmas {
        for n in lo..=hi {
            for &p in &scan.perturbations {
                jobs.push((sigma, n, p));
            }
        }
    }
    let rows = jobs
        .par_iter()
        .enumerate()
        .map(|(row, &(sigma, n, perturbation))| {
            let masses = match scan.mass_mode {
                MassMode::Equal => vec![1.0; n],
                MassMode::Random => {
                    let mut rng = ChaCha8Rng::seed_from_u64(scan.seed);
                    rng.set_stream(row as u64);
                    (0..n).map(|_| rng.gen_range(0.5..2.0)).collect()
                }
            };
            let grid = scan.rho_grid.clone().unwrap_or_else(|| default_rho_grid(sigma));
            let outcome = regular_polygon(n, scan.phase, masses.clone(), sigma, scan.dim)
                .and_then(|base| {
                    let mut beta = base.beta().to_vec();
                    beta[2.min(n - 1)] += perturbation;
                    PolygonConfig::new(masses.clone(), beta, sigma, scan.dim)
                })
                .and_then(|config| criterion_report(&config, &grid, scan.tol_b, scan.tol_c))
                .map_err(|e| e.to_string());
            ScanRow { n, sigma, mass_mode: scan.mass_mode, perturbation, masses, outcome }
        })
        .collect();
    Ok(rows)
}

pub fn scan_csv(rows: &[ScanRow]) -> String {
    let mut out = String::from(SCAN_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    out
}

pub fn cmd_scan(config_path: &Path, flags: &Flags) -> Result<i32> {
    let scan: ScanConfig = read_json(config_path)?;
    let dir = output_dir(flags, &scan.output_dir)?;
    let threads = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Validation(format!("cannot start scan workers: {e}")))?;
    let rows = pool.install(|| scan_rows(&scan))?;
    fs::write(dir.join("scan.csv"), scan_csv(&rows))?;
    Ok(EXIT_OK)
}
