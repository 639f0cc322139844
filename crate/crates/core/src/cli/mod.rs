//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or runtime failure, 2 CFL violation,
//! 3 blow-up, 4 a requested convergence gate failed, 64 usage or invalid
//! configuration.

mod args;
mod output;

pub use args::{
    parse_vary, AnalyzeArgs, BasisArg, Cli, Command, ConfigFile, InitArg, RefArg, RunArgs, Scenario, SignArg, SweepArgs,
    U0Arg,
};
pub use output::{
    emit_trace, read_trace, write_trace, Calibration, RunManifest, Verdicts, ANALYSIS_FILE, MANIFEST_FILE,
    SNAPSHOT_FILE, TRACE_FILE, TRACE_HEADER,
};

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

use crate::analysis::{
    energy_residual, galerkin_error_system, limit_diagnostics, limit_diagnostics_samples, pe_check, upsilon_b,
    AnalysisError, GalerkinConfig, LimitSummary, ModalBasis, PEVerdict, DEFAULT_PE_WINDOWS,
};
use crate::domain::{
    validate_config, DomainError, Grid, GridFunction, Outcome, Params, ReferenceSignal, SimConfig, Trace, TraceSample,
};
use crate::scenarios::{self, ScenarioError, U0Signal};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CFL: i32 = 2;
pub const EXIT_BLOW_UP: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;
pub const EXIT_USAGE: i32 = 64;

pub const OUT_ENV: &str = "HEATADAPT_OUT";
const FALLBACK_OUT: &str = "heatadapt-out";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{flag}: {reason}")]
    Usage { flag: String, reason: String },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },
    #[error(transparent)]
    Json(serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        let domain = match self {
            CliError::Domain(e) | CliError::Scenario(ScenarioError::Config(e)) | CliError::Analysis(AnalysisError::Domain(e)) => {
                Some(e)
            }
            _ => None,
        };
        match (self, domain) {
            (_, Some(DomainError::CflViolation { .. })) => EXIT_CFL,
            (_, Some(_)) | (CliError::Usage { .. }, _) | (CliError::Analysis(_), _) => EXIT_USAGE,
            (CliError::Scenario(ScenarioError::GridMismatch(_)), _) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }
}

/// A run with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRun {
    pub scenario: Scenario,
    pub params: Params,
    pub config: SimConfig,
    pub reference: ReferenceSignal,
    pub init: InitArg,
    pub zeta0: f64,
    pub u0: U0Signal,
    pub modes: usize,
    pub basis: ModalBasis,
    pub settle: f64,
    pub gap_tol: f64,
    pub require_converged: bool,
    pub calibrate: bool,
    pub out: PathBuf,
}

fn default_out() -> PathBuf {
    std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT))
}

/// Merges the config file, applies defaults and validates.
pub fn resolve(args: RunArgs) -> Result<ResolvedRun, CliError> {
    let args = match &args.config {
        Some(path) => {
            let file = ConfigFile::read(path)?;
            args.clone().merged_with(&file)?
        }
        None => args,
    };
    let nominal = Params::nominal();
    let scenario = args.scenario.unwrap_or(Scenario::Stabilize);
    let (q, b, c0, c1) = (
        args.q.unwrap_or(nominal.q()),
        args.b.unwrap_or(nominal.b()),
        args.c0.unwrap_or(nominal.c0()),
        args.c1.unwrap_or(nominal.c1()),
    );
    let params = match args.sign_b {
        Some(SignArg(sign)) => Params::with_sign(q, b, sign, c0, c1)?,
        None => Params::new(q, b, c0, c1)?,
    };

    let defaults = SimConfig::default();
    let mut config = defaults.with_horizon(args.t_final.unwrap_or_else(|| scenario.default_horizon()));
    if args.dx.is_some() || args.dt.is_some() {
        config = config.with_resolution(args.dx.unwrap_or(defaults.grid.dx()), args.dt.unwrap_or(defaults.dt))?;
    }
    config.pe_window = args.pe_tau.unwrap_or(config.pe_window);
    config.pe_threshold = args.pe_threshold.unwrap_or(config.pe_threshold);
    config.sample_stride = args.sample_stride.unwrap_or(config.sample_stride);
    config.snapshot_stride = args.snapshot_stride.unwrap_or(config.snapshot_stride);
    if scenario == Scenario::Galerkin {
        // the modal solver has no CFL restriction
        let mut relaxed = config;
        relaxed.dt = relaxed.dt.min(relaxed.cfl_limit());
        validate_config(&params, &relaxed)?;
    } else {
        validate_config(&params, &config)?;
    }

    let reference = match (scenario, args.reference) {
        (_, Some(RefArg(r))) => r,
        (Scenario::Track, None) => ReferenceSignal::constant(3.0)?,
        (_, None) => ReferenceSignal::Zero,
    };
    let settle = args.settle.unwrap_or(1.0);
    let gap_tol = args.gap_tol.unwrap_or(1e-3);
    for (flag, v) in [("--settle", settle), ("--gap-tol", gap_tol)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(CliError::Usage {
                flag: flag.into(),
                reason: format!("must be positive, got {v}"),
            });
        }
    }
    let modes = args.modes.unwrap_or(16);
    if modes == 0 {
        return Err(CliError::Usage {
            flag: "--modes".into(),
            reason: "need at least one mode".into(),
        });
    }
    let init = args.init.unwrap_or(InitArg::Affine);
    if args.calibrate && matches!(init, InitArg::File(_)) {
        return Err(CliError::Usage {
            flag: "--calibrate".into(),
            reason: "a file initial state cannot be resampled on the finer grid".into(),
        });
    }
    Ok(ResolvedRun {
        scenario,
        params,
        config,
        reference,
        init,
        zeta0: args.zeta0.unwrap_or(0.0),
        u0: args.u0.map_or(U0Signal::ExpDecay, |U0Arg(s)| s),
        modes,
        basis: args.basis.map_or(ModalBasis::NeumannCosine, |BasisArg(b)| b),
        settle,
        gap_tol,
        require_converged: args.require_converged,
        calibrate: args.calibrate,
        out: args.out.unwrap_or_else(default_out),
    })
}

/// Initial plant (or error) field on `grid`.
pub fn initial_field(init: &InitArg, p: &Params, grid: Grid) -> Result<GridFunction, CliError> {
    match init {
        InitArg::Affine => Ok(GridFunction::from_fn(grid, |x| p.q() * x - 1.0)?),
        InitArg::Zero => Ok(GridFunction::zeros(grid)),
        InitArg::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            Ok(GridFunction::from_values(grid, parse_profile(path, &text)?)?)
        }
    }
}

/// One value per line, taken from the last comma or whitespace separated
/// column. A non-numeric first line is treated as a header.
fn parse_profile(path: &Path, text: &str) -> Result<Vec<f64>, CliError> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let last = line.rsplit([',', ' ', '\t']).next().unwrap_or(line);
        match last.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if values.is_empty() && i == 0 => continue,
            Err(_) => {
                return Err(CliError::Format {
                    path: path.to_path_buf(),
                    reason: format!("line {}: `{last}` is not a number", i + 1),
                })
            }
        }
    }
    Ok(values)
}

/// Runs the scenario on `config`, which may differ from `run.config` when
/// calibrating.
pub fn execute(run: &ResolvedRun, config: &SimConfig) -> Result<Trace, CliError> {
    let p = &run.params;
    let w0 = initial_field(&run.init, p, config.grid)?;
    let zero = GridFunction::zeros(config.grid);
    let trace = match run.scenario {
        Scenario::OpenLoop => scenarios::run_open_loop(p, config, &w0)?,
        Scenario::Observer => scenarios::run_observer(p, config, &w0, &zero, run.zeta0, &run.u0)?,
        Scenario::Stabilize => scenarios::run_stabilization(p, config, &w0, &zero, run.zeta0)?,
        Scenario::Track => scenarios::run_tracking_signal(p, config, &w0, &zero, run.zeta0, run.reference)?,
        Scenario::ErrorSystem => {
            scenarios::run_error_system(p, config, &w0, upsilon_b(run.zeta0, p.b())?, &run.u0)?
        }
        Scenario::Galerkin => {
            let cfg = GalerkinConfig {
                modes: run.modes,
                basis: run.basis,
                t_final: config.t_final,
                dt: config.dt,
                sample_stride: config.sample_stride,
            };
            galerkin_error_system(p, &cfg, &run.u0, &w0, upsilon_b(run.zeta0, p.b())?)?
        }
    };
    Ok(trace)
}

fn duration(samples: &[TraceSample]) -> f64 {
    match (samples.first(), samples.last()) {
        (Some(a), Some(b)) => b.t - a.t,
        _ => 0.0,
    }
}

fn pe_of(samples: &[TraceSample], column: impl Fn(&TraceSample) -> Option<f64>, tau: f64, threshold: f64) -> Option<PEVerdict> {
    let (times, values): (Vec<f64>, Vec<f64>) = samples.iter().filter_map(|s| Some((s.t, column(s)?))).unzip();
    if times.len() != samples.len() {
        return None;
    }
    pe_check(&times, &values, tau, threshold, DEFAULT_PE_WINDOWS).ok()
}

fn limits_of(samples: &[TraceSample], settle: f64, gap_tol: f64) -> Option<LimitSummary> {
    (duration(samples) >= 2.0 * settle)
        .then(|| limit_diagnostics_samples(samples, settle, gap_tol).ok())
        .flatten()
}

/// Verdicts for a finished run.
pub fn verdicts(run: &ResolvedRun, trace: &Trace, calibration: Option<Calibration>) -> Verdicts {
    let limits = (duration(&trace.samples) >= 2.0 * run.settle)
        .then(|| limit_diagnostics(trace, run.settle, run.gap_tol).ok())
        .flatten();
    let (tau, threshold) = (run.config.pe_window, run.config.pe_threshold);
    Verdicts {
        outcome: trace.outcome,
        limits,
        pe_u0: pe_of(&trace.samples, |s| Some(s.u0), tau, threshold),
        pe_servo_flux: if run.scenario == Scenario::Track {
            pe_of(&trace.samples, |s| s.servo_flux, tau, threshold)
        } else {
            None
        },
        energy_residual: energy_residual(&trace.samples),
        calibration,
        require_converged: run.require_converged,
    }
}

fn exit_code_for(v: &Verdicts) -> i32 {
    if matches!(v.outcome, Outcome::BlowUp { .. }) {
        EXIT_BLOW_UP
    } else if v.require_converged && !v.limits.as_ref().is_some_and(LimitSummary::all_converged) {
        EXIT_NOT_CONVERGED
    } else {
        EXIT_OK
    }
}

/// Reference-resolution rerun at dx/2 and dt/4.
pub fn calibrate(run: &ResolvedRun) -> Result<Calibration, CliError> {
    let fine = run
        .config
        .with_resolution(run.config.grid.dx() / 2.0, run.config.dt / 4.0)?;
    let fine = SimConfig {
        sample_stride: run.config.sample_stride * 4,
        snapshot_stride: 0,
        ..fine
    };
    let trace = execute(run, &fine)?;
    let last = trace.last();
    Ok(Calibration {
        dx: fine.grid.dx(),
        dt: fine.dt,
        wnorm: last.wnorm,
        obs_err_norm: last.obs_err_norm,
        zeta: last.zeta,
        tracking_error: last.reference.map(|r| (last.w0 - r).abs()),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub trace: Trace,
    pub manifest: RunManifest,
    pub files: Vec<PathBuf>,
    pub exit_code: i32,
}

pub fn simulate(run: &ResolvedRun) -> Result<RunReport, CliError> {
    let started = Instant::now();
    let trace = execute(run, &run.config)?;
    let calibration = if run.calibrate { Some(calibrate(run)?) } else { None };
    let verdicts = verdicts(run, &trace, calibration);
    let exit_code = exit_code_for(&verdicts);
    let mut manifest = RunManifest {
        scenario: run.scenario,
        params: run.params,
        config: run.config,
        reference: run.reference,
        init: run.init.clone(),
        zeta0: run.zeta0,
        u0: run.u0,
        modes: run.modes,
        basis: run.basis,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: 0.0,
        files: Vec::new(),
        verdicts,
    };
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    let files = emit_trace(&trace, &mut manifest, &run.out)?;
    Ok(RunReport {
        trace,
        manifest,
        files,
        exit_code,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub samples: usize,
    pub limits: Option<LimitSummary>,
    pub pe_u0: Option<PEVerdict>,
    pub pe_servo_flux: Option<PEVerdict>,
    pub energy_residual: Option<f64>,
}

pub fn analyze(args: &AnalyzeArgs) -> Result<(AnalysisReport, i32), CliError> {
    let dir = args.out.clone().unwrap_or_else(default_out);
    let samples = read_trace(&dir.join(TRACE_FILE))?;
    let report = AnalysisReport {
        samples: samples.len(),
        limits: limits_of(&samples, args.settle, args.gap_tol),
        pe_u0: pe_of(&samples, |s| Some(s.u0), args.pe_tau, args.pe_threshold),
        pe_servo_flux: pe_of(&samples, |s| s.servo_flux, args.pe_tau, args.pe_threshold),
        energy_residual: energy_residual(&samples),
    };
    let path = dir.join(ANALYSIS_FILE);
    let json = serde_json::to_string_pretty(&report).map_err(CliError::Json)?;
    std::fs::write(&path, json + "\n").map_err(|source| CliError::Io { path, source })?;
    let converged = report.limits.as_ref().is_some_and(LimitSummary::all_converged);
    let code = if args.require_converged && !converged {
        EXIT_NOT_CONVERGED
    } else {
        EXIT_OK
    };
    Ok((report, code))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub value: f64,
    pub dir: PathBuf,
    pub exit_code: i32,
    pub error: Option<String>,
}

/// One run per value, each in `<out>/<name>=<value>`, executed on scoped
/// threads. Writes `<out>/sweep.json`.
pub fn sweep(args: &SweepArgs) -> Result<(Vec<SweepEntry>, i32), CliError> {
    let (name, values) = parse_vary(&args.vary)?;
    let base_out = args.run.out.clone().unwrap_or_else(default_out);
    let mut runs = Vec::with_capacity(values.len());
    for &value in &values {
        let mut run_args = args.run.clone();
        run_args.set_numeric(&name, value)?;
        run_args.out = Some(base_out.join(format!("{name}={value}")));
        runs.push((value, resolve(run_args)?));
    }
    let entries: Vec<SweepEntry> = std::thread::scope(|scope| {
        let handles: Vec<_> = runs
            .iter()
            .map(|(value, run)| scope.spawn(move || (*value, run.out.clone(), simulate(run))))
            .collect();
        handles
            .into_iter()
            .map(|h| {
                let (value, dir, result) = h.join().expect("sweep worker panicked");
                match result {
                    Ok(report) => SweepEntry {
                        value,
                        dir,
                        exit_code: report.exit_code,
                        error: None,
                    },
                    Err(e) => SweepEntry {
                        value,
                        dir,
                        exit_code: e.exit_code(),
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    });
    let path = base_out.join("sweep.json");
    let json = serde_json::to_string_pretty(&entries).map_err(CliError::Json)?;
    std::fs::write(&path, json + "\n").map_err(|source| CliError::Io { path, source })?;
    let code = entries.iter().map(|e| e.exit_code).find(|&c| c != EXIT_OK).unwrap_or(EXIT_OK);
    Ok((entries, code))
}

/// Executes a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Simulate(args) => {
            let run = resolve(args)?;
            let report = simulate(&run)?;
            let last = report.trace.last();
            println!(
                "{} t={} wnorm={:.6e} zeta={:.6e} status={} out={}",
                run.scenario,
                last.t,
                last.wnorm,
                last.zeta,
                match report.trace.outcome {
                    Outcome::Completed => "completed",
                    Outcome::BlowUp { .. } => "blow-up",
                },
                run.out.display()
            );
            Ok(report.exit_code)
        }
        Command::Analyze(args) => {
            let (report, code) = analyze(&args)?;
            println!("{}", serde_json::to_string(&report).map_err(CliError::Json)?);
            Ok(code)
        }
        Command::Sweep(args) => {
            let (entries, code) = sweep(&args)?;
            for e in &entries {
                println!("{} exit={}", e.dir.display(), e.exit_code);
            }
            Ok(code)
        }
    }
}
