//! Command-line flags, value syntaxes and the key = value config file.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::CliError;
use crate::analysis::ModalBasis;
use crate::domain::{ReferenceSignal, Sign};
use crate::scenarios::U0Signal;

#[derive(Debug, Parser)]
#[command(name = "heatadapt", version, about = "Adaptive boundary control of an unstable heat equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write trace.csv and manifest.json.
    Simulate(RunArgs),
    /// Recompute verdicts from an existing output directory.
    Analyze(AnalyzeArgs),
    /// Run one scenario for each value of a parameter, concurrently.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    OpenLoop,
    Observer,
    Stabilize,
    Track,
    ErrorSystem,
    Galerkin,
}

impl Scenario {
    pub fn default_horizon(self) -> f64 {
        match self {
            Scenario::OpenLoop => 2.0,
            Scenario::Track => 10.0,
            Scenario::Galerkin => 1.0,
            Scenario::Observer | Scenario::Stabilize | Scenario::ErrorSystem => 5.0,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = self.to_possible_value().expect("no skipped variants");
        f.write_str(name.get_name())
    }
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Scenario as ValueEnum>::from_str(s, false)
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scenario: Option<Scenario>,
    #[arg(long, allow_negative_numbers = true)]
    pub q: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub b: Option<f64>,
    /// Declared sign of b: + or -.
    #[arg(long, allow_hyphen_values = true)]
    pub sign_b: Option<SignArg>,
    #[arg(long, allow_negative_numbers = true)]
    pub c0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub dx: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub t_final: Option<f64>,
    /// zero | const:R | sin:A,W
    #[arg(long = "ref", allow_hyphen_values = true)]
    pub reference: Option<RefArg>,
    #[arg(long, allow_negative_numbers = true)]
    pub zeta0: Option<f64>,
    /// affine | zero | file:PATH
    #[arg(long)]
    pub init: Option<InitArg>,
    /// zero | const:C | exp-decay | sin:A,W
    #[arg(long, allow_hyphen_values = true)]
    pub u0: Option<U0Arg>,
    #[arg(long)]
    pub pe_tau: Option<f64>,
    #[arg(long)]
    pub pe_threshold: Option<f64>,
    #[arg(long)]
    pub modes: Option<usize>,
    /// cosine | sine
    #[arg(long)]
    pub basis: Option<BasisArg>,
    #[arg(long)]
    pub sample_stride: Option<usize>,
    /// 0 disables snapshots.csv
    #[arg(long)]
    pub snapshot_stride: Option<usize>,
    /// Trailing window for the convergence diagnostics.
    #[arg(long)]
    pub settle: Option<f64>,
    #[arg(long)]
    pub gap_tol: Option<f64>,
    /// Exit with code 4 unless every settled quantity converged.
    #[arg(long)]
    pub require_converged: bool,
    /// Also run at dx/2, dt/4 and record the reference values.
    #[arg(long)]
    pub calibrate: bool,
    /// Output directory; defaults to $HEATADAPT_OUT.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// key = value file; explicit flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// Directory holding trace.csv; defaults to $HEATADAPT_OUT.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub settle: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub gap_tol: f64,
    #[arg(long, default_value_t = 1.0)]
    pub pe_tau: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub pe_threshold: f64,
    #[arg(long)]
    pub require_converged: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// name=v1,v2,... over a numeric flag (q, b, c0, c1, dx, dt, t-final, zeta0).
    #[arg(long)]
    pub vary: String,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignArg(pub Sign);

impl FromStr for SignArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "+" | "+1" | "1" | "pos" | "positive" => Ok(SignArg(Sign::Positive)),
            "-" | "-1" | "neg" | "negative" => Ok(SignArg(Sign::Negative)),
            other => Err(format!("expected + or -, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefArg(pub ReferenceSignal);

impl FromStr for RefArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let signal = match split_kind(s) {
            ("zero", None) => ReferenceSignal::Zero,
            ("const", Some(v)) => ReferenceSignal::constant(number(v)?).map_err(|e| e.to_string())?,
            ("sin", Some(v)) => {
                let (a, w) = pair(v)?;
                ReferenceSignal::sinusoid(a, w).map_err(|e| e.to_string())?
            }
            _ => return Err(format!("expected zero, const:R or sin:A,W, got `{s}`")),
        };
        Ok(RefArg(signal))
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", content = "path", rename_all = "snake_case")]
pub enum InitArg {
    Affine,
    Zero,
    File(PathBuf),
}

impl FromStr for InitArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match split_kind(s) {
            ("affine", None) => Ok(InitArg::Affine),
            ("zero", None) => Ok(InitArg::Zero),
            ("file", Some(p)) if !p.is_empty() => Ok(InitArg::File(PathBuf::from(p))),
            _ => Err(format!("expected affine, zero or file:PATH, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct U0Arg(pub U0Signal);

impl FromStr for U0Arg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let signal = match split_kind(s) {
            ("zero", None) => U0Signal::Zero,
            ("exp-decay", None) => U0Signal::ExpDecay,
            ("const", Some(v)) => U0Signal::Constant { value: number(v)? },
            ("sin", Some(v)) => {
                let (amplitude, frequency) = pair(v)?;
                U0Signal::Sine { amplitude, frequency }
            }
            _ => return Err(format!("expected zero, const:C, exp-decay or sin:A,W, got `{s}`")),
        };
        Ok(U0Arg(signal))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisArg(pub ModalBasis);

impl FromStr for BasisArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "cosine" => Ok(BasisArg(ModalBasis::NeumannCosine)),
            "sine" => Ok(BasisArg(ModalBasis::MixedSine)),
            other => Err(format!("expected cosine or sine, got `{other}`")),
        }
    }
}

fn split_kind(s: &str) -> (&str, Option<&str>) {
    match s.trim().split_once(':') {
        Some((k, v)) => (k, Some(v)),
        None => (s.trim(), None),
    }
}

fn number(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|_| format!("`{s}` is not a number"))
}

fn pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected A,W, got `{s}`"))?;
    Ok((number(a)?, number(b)?))
}

/// Flat key = value file. Keys are long flag names without dashes; `#`
/// starts a comment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub path: PathBuf,
    pub entries: BTreeMap<String, String>,
}

const CONFIG_KEYS: [&str; 24] = [
    "scenario",
    "q",
    "b",
    "sign-b",
    "c0",
    "c1",
    "dx",
    "dt",
    "t-final",
    "ref",
    "zeta0",
    "init",
    "u0",
    "pe-tau",
    "pe-threshold",
    "modes",
    "basis",
    "sample-stride",
    "snapshot-stride",
    "settle",
    "gap-tol",
    "require-converged",
    "calibrate",
    "out",
];

impl ConfigFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CliError::Usage {
                flag: format!("--config {}:{}", path.display(), lineno + 1),
                reason: format!("expected key = value, got `{line}`"),
            })?;
            let key = key.trim().trim_start_matches("--").replace('_', "-");
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage {
                    flag: format!("--config {}:{}", path.display(), lineno + 1),
                    reason: format!("unknown key `{key}`"),
                });
            }
            entries.insert(key, value.trim().to_string());
        }
        Ok(ConfigFile {
            path: path.to_path_buf(),
            entries,
        })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        self.entries
            .get(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| CliError::Usage {
                    flag: format!("--{key} (from {})", self.path.display()),
                    reason: e.to_string(),
                })
            })
            .transpose()
    }

    fn flag(&self, key: &str) -> Result<bool, CliError> {
        Ok(self.get::<bool>(key)?.unwrap_or(false))
    }
}

impl RunArgs {
    /// Fills every unset flag from `file`.
    pub fn merged_with(mut self, file: &ConfigFile) -> Result<Self, CliError> {
        macro_rules! fill {
            ($($field:ident => $key:literal),* $(,)?) => {
                $( if self.$field.is_none() { self.$field = file.get($key)?; } )*
            };
        }
        fill!(
            scenario => "scenario", q => "q", b => "b", sign_b => "sign-b", c0 => "c0", c1 => "c1",
            dx => "dx", dt => "dt", t_final => "t-final", reference => "ref", zeta0 => "zeta0",
            init => "init", u0 => "u0", pe_tau => "pe-tau", pe_threshold => "pe-threshold",
            modes => "modes", basis => "basis", sample_stride => "sample-stride",
            snapshot_stride => "snapshot-stride", settle => "settle", gap_tol => "gap-tol", out => "out",
        );
        self.require_converged |= file.flag("require-converged")?;
        self.calibrate |= file.flag("calibrate")?;
        Ok(self)
    }

    /// Overrides one numeric flag, as used by `sweep --vary`.
    pub fn set_numeric(&mut self, key: &str, value: f64) -> Result<(), CliError> {
        let slot = match key.trim_start_matches("--").replace('_', "-").as_str() {
            "q" => &mut self.q,
            "b" => &mut self.b,
            "c0" => &mut self.c0,
            "c1" => &mut self.c1,
            "dx" => &mut self.dx,
            "dt" => &mut self.dt,
            "t-final" => &mut self.t_final,
            "zeta0" => &mut self.zeta0,
            other => {
                return Err(CliError::Usage {
                    flag: "--vary".into(),
                    reason: format!("`{other}` is not a numeric run flag"),
                })
            }
        };
        *slot = Some(value);
        Ok(())
    }
}

/// Parses `name=v1,v2,...`.
pub fn parse_vary(spec: &str) -> Result<(String, Vec<f64>), CliError> {
    let usage = |reason: String| CliError::Usage {
        flag: "--vary".into(),
        reason,
    };
    let (name, values) = spec
        .split_once('=')
        .ok_or_else(|| usage(format!("expected name=v1,v2,..., got `{spec}`")))?;
    let values = values
        .split(',')
        .map(|v| number(v).map_err(usage))
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(usage("no values given".into()));
    }
    Ok((name.trim().to_string(), values))
}
