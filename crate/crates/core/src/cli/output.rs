//! trace.csv, snapshots.csv and manifest.json.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

use super::args::{InitArg, Scenario};
use super::CliError;
use crate::analysis::{LimitSummary, ModalBasis, PEVerdict};
use crate::domain::{Outcome, Params, ReferenceSignal, SimConfig, Trace, TraceSample};
use crate::scenarios::U0Signal;

pub const TRACE_FILE: &str = "trace.csv";
pub const SNAPSHOT_FILE: &str = "snapshots.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const ANALYSIS_FILE: &str = "analysis.json";

/// The first ten columns are the stable contract; the rest are appended for
/// the energy identity and tracking analyses.
pub const TRACE_HEADER: [&str; 14] = [
    "t", "u0", "u", "zeta", "w0", "w1", "wnorm", "obs_err_norm", "E", "F", "V", "dissipated", "r", "vx1",
];

/// Values recomputed at dx/2, dt/4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub dx: f64,
    pub dt: f64,
    pub wnorm: f64,
    pub obs_err_norm: Option<f64>,
    pub zeta: f64,
    /// |w(0,T) - r(T)|, tracking only.
    pub tracking_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub outcome: Outcome,
    pub limits: Option<LimitSummary>,
    pub pe_u0: Option<PEVerdict>,
    pub pe_servo_flux: Option<PEVerdict>,
    pub energy_residual: Option<f64>,
    pub calibration: Option<Calibration>,
    pub require_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: Scenario,
    pub params: Params,
    pub config: SimConfig,
    pub reference: ReferenceSignal,
    pub init: InitArg,
    pub zeta0: f64,
    pub u0: U0Signal,
    pub modes: usize,
    pub basis: ModalBasis,
    pub tool_version: String,
    pub wall_clock_seconds: f64,
    pub files: Vec<PathBuf>,
    pub verdicts: Verdicts,
}

impl RunManifest {
    pub fn to_json(&self) -> Result<String, CliError> {
        serde_json::to_string_pretty(self).map_err(CliError::Json)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(CliError::Json)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// 17 significant digits, enough to round-trip every f64.
fn cell(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(cell).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

pub fn write_trace(samples: &[TraceSample], path: &Path) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(TRACE_HEADER).map_err(csv_err(path))?;
    for s in samples {
        let row = [
            cell(s.t),
            cell(s.u0),
            cell(s.u),
            cell(s.zeta),
            cell(s.w0),
            cell(s.w1),
            cell(s.wnorm),
            opt_cell(s.obs_err_norm),
            opt_cell(s.energy_e),
            opt_cell(s.energy_f),
            opt_cell(s.energy_v),
            opt_cell(s.dissipated),
            opt_cell(s.reference),
            opt_cell(s.servo_flux),
        ];
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceSample>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            reason: format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut samples = Vec::new();
    for (row, record) in r.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let bad = |col: usize| CliError::Format {
            path: path.to_path_buf(),
            reason: format!("row {}, column {}: `{}`", row + 2, TRACE_HEADER[col], &record[col]),
        };
        let req = |col: usize| record[col].parse::<f64>().map_err(|_| bad(col));
        let opt = |col: usize| match &record[col] {
            "" => Ok(None),
            v => v.parse::<f64>().map(Some).map_err(|_| bad(col)),
        };
        samples.push(TraceSample {
            t: req(0)?,
            u0: req(1)?,
            u: req(2)?,
            zeta: req(3)?,
            w0: req(4)?,
            w1: req(5)?,
            wnorm: req(6)?,
            obs_err_norm: opt(7)?,
            energy_e: opt(8)?,
            energy_f: opt(9)?,
            energy_v: opt(10)?,
            dissipated: opt(11)?,
            reference: opt(12)?,
            servo_flux: opt(13)?,
        });
    }
    Ok(samples)
}

fn write_snapshots(trace: &Trace, path: &Path) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["t", "x", "w", "what"]).map_err(csv_err(path))?;
    for snap in &trace.snapshots {
        let grid = snap.w.grid();
        for (i, x) in grid.nodes().enumerate() {
            let what = snap.what.as_ref().map(|f| f.values()[i]);
            w.write_record([cell(snap.t), cell(x), cell(snap.w.values()[i]), opt_cell(what)])
                .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}

/// Writes trace.csv, snapshots.csv when there are snapshots, and
/// manifest.json listing them. Returns every path written.
pub fn emit_trace(trace: &Trace, manifest: &mut RunManifest, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut files = Vec::new();
    let trace_path = out_dir.join(TRACE_FILE);
    write_trace(&trace.samples, &trace_path)?;
    files.push(trace_path);
    if !trace.snapshots.is_empty() {
        let path = out_dir.join(SNAPSHOT_FILE);
        write_snapshots(trace, &path)?;
        files.push(path);
    }
    let manifest_path = out_dir.join(MANIFEST_FILE);
    files.push(manifest_path.clone());
    manifest.files = files.clone();
    fs::write(&manifest_path, manifest.to_json()? + "\n").map_err(io_err(&manifest_path))?;
    Ok(files)
}
