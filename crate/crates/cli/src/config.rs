//! JSON experiment configs: schema, key checks per command, and the typed inputs
//! for data, matrices and grid functions.

use std::fmt;
use std::path::{Path, PathBuf};

use blsat_core::{GridFunction, SymmetricMatrix};
use clap::ValueEnum;
use serde::Deserialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Datum,
    BlValue,
    KwVerify,
    InverseConstant,
    Stationarity,
    Prop52,
    Barycenter,
    Deficit,
    DeficitMinimize,
    Legendre,
    Polar,
    PolarTuple,
    DualityCheck,
    VolumeProduct,
    SurfaceArea,
    BlGrid,
    BallMonotonicity,
    Clt,
    LogconcavityCheck,
    PLimit,
}

const DATUM_KEYS: &[&str] = &["datum", "m", "n", "p", "dims", "exponents", "kernel"];

impl Command {
    pub fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::from_str(name, false).ok()
    }

    /// Commands whose result depends on random starts or samples.
    pub fn is_stochastic(self) -> bool {
        matches!(self, Self::KwVerify | Self::InverseConstant | Self::DeficitMinimize | Self::PLimit)
    }

    fn uses_datum(self) -> bool {
        matches!(
            self,
            Self::Datum
                | Self::BlValue
                | Self::KwVerify
                | Self::InverseConstant
                | Self::Stationarity
                | Self::PolarTuple
                | Self::DualityCheck
                | Self::BlGrid
                | Self::BallMonotonicity
                | Self::PLimit
        )
    }

    /// Keys specific to the command, on top of `command`, `threads`, `out`
    /// and (for commands built on a datum) the datum keys.
    fn keys(self) -> &'static [&'static str] {
        match self {
            Self::Datum => &[],
            Self::BlValue | Self::Stationarity => &["tuple", "convention"],
            Self::KwVerify => {
                &["starts", "seed", "gtol", "max_iter", "mu_start", "mu_end", "unbounded_threshold", "samples"]
            }
            Self::InverseConstant => &["direction", "starts", "seed", "gtol", "max_iter"],
            Self::Prop52 => &["matrices", "tol"],
            Self::Barycenter | Self::Deficit => &["covariances", "tol", "max_iter"],
            Self::DeficitMinimize => &["m", "n", "starts", "seed", "gtol", "max_iter", "tol"],
            Self::Legendre | Self::Polar | Self::VolumeProduct => &["function", "dual_radius"],
            Self::PolarTuple | Self::BlGrid | Self::LogconcavityCheck => &["functions"],
            Self::DualityCheck => &["functions", "tol"],
            Self::SurfaceArea => &["mode", "lambda", "tuple", "convention", "functions"],
            Self::BallMonotonicity => &["functions", "reference", "seed", "starts"],
            Self::Clt => &["function", "steps"],
            Self::PLimit => &["p_values", "starts", "seed", "gtol", "max_iter"],
        }
    }

    fn allows(self, key: &str) -> bool {
        if matches!(key, "command" | "threads" | "out") || self.keys().contains(&key) {
            return true;
        }
        // p-limit chooses its own scaling parameters.
        self.uses_datum() && DATUM_KEYS.contains(&key) && !(self == Self::PLimit && key == "p")
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Schema violation, with the JSON path of the offending key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "config error: {}", self.message)
        } else {
            write!(f, "config error at `{}`: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatumKind {
    Bs,
    Kw,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConventionName {
    Precision,
    Covariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionName {
    Inf,
    Sup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceMode {
    Quadratic,
    Grid,
}

/// A number (a 1×1 matrix, or `s·I` where the dimension is known) or a list of rows.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum MatrixInput {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

impl MatrixInput {
    pub fn to_matrix(&self) -> blsat_core::Result<SymmetricMatrix> {
        match self {
            Self::Scalar(s) => Ok(SymmetricMatrix::scalar(1, *s)),
            Self::Rows(rows) => SymmetricMatrix::from_rows(rows),
        }
    }
}

/// A potential value: a number or the string `inf`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Value(f64),
    Text(String),
}

fn one() -> usize {
    1
}

/// A grid function, built in or read from a file in the text format.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionInput {
    /// `e^{−½⟨x,Ax⟩}`; a scalar `a` means `a·I`.
    Gaussian {
        a: MatrixInput,
        #[serde(default)]
        dim: Option<usize>,
        radius: f64,
        points: usize,
    },
    ExpNorm {
        #[serde(default = "one")]
        dim: usize,
        radius: f64,
        points: usize,
    },
    Quartic {
        #[serde(default = "one")]
        dim: usize,
        radius: f64,
        points: usize,
        a: f64,
        eps: f64,
    },
    Indicator {
        #[serde(default = "one")]
        dim: usize,
        half_width: f64,
        radius: f64,
        points: usize,
    },
    /// Potential values listed inline, row-major.
    Grid {
        #[serde(default = "one")]
        dim: usize,
        radius: f64,
        points: usize,
        values: Vec<Num>,
    },
    File {
        path: PathBuf,
    },
}

impl FunctionInput {
    /// Builds the function; relative file paths resolve against `base_dir`.
    pub fn build(&self, base_dir: &Path) -> Result<GridFunction, crate::CliError> {
        let f = match self {
            Self::Gaussian { a, dim, radius, points } => {
                let a = match (a, dim) {
                    (MatrixInput::Scalar(s), Some(d)) => SymmetricMatrix::scalar(*d, *s),
                    _ => a.to_matrix()?,
                };
                if dim.is_some_and(|d| d != a.dim()) {
                    return Err(ConfigError::new("kind", "gaussian `dim` does not match the matrix `a`").into());
                }
                GridFunction::gaussian(&a, *radius, *points)?
            }
            Self::ExpNorm { dim, radius, points } => GridFunction::exp_norm(*dim, *radius, *points)?,
            Self::Quartic { dim, radius, points, a, eps } => GridFunction::quartic(*dim, *radius, *points, *a, *eps)?,
            Self::Indicator { dim, half_width, radius, points } => {
                GridFunction::indicator(*dim, *half_width, *radius, *points)?
            }
            Self::Grid { dim, radius, points, values } => {
                let potential = values
                    .iter()
                    .map(|v| match v {
                        Num::Value(x) => Ok(*x),
                        Num::Text(t) if t == "inf" => Ok(f64::INFINITY),
                        Num::Text(t) => Err(ConfigError::new("values", format!("expected a number or \"inf\", got {t:?}"))),
                    })
                    .collect::<Result<Vec<f64>, _>>()?;
                GridFunction::new(*dim, *radius, *points, potential)?
            }
            Self::File { path } => {
                let full = base_dir.join(path);
                let text = std::fs::read_to_string(&full).map_err(|e| {
                    ConfigError::new("path", format!("cannot read grid function {}: {e}", full.display()))
                })?;
                GridFunction::from_text(&text)?
            }
        };
        Ok(f)
    }
}

/// Every recognized key; which ones a command accepts is checked separately.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub command: Option<String>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,

    pub datum: Option<DatumKind>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub p: Option<f64>,
    pub dims: Option<Vec<usize>>,
    pub exponents: Option<Vec<f64>>,
    pub kernel: Option<MatrixInput>,

    pub starts: Option<usize>,
    pub gtol: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub mu_start: Option<f64>,
    pub mu_end: Option<f64>,
    pub unbounded_threshold: Option<f64>,
    pub direction: Option<DirectionName>,
    pub samples: Option<usize>,
    pub p_values: Option<Vec<f64>>,

    pub tuple: Option<Vec<MatrixInput>>,
    pub convention: Option<ConventionName>,
    pub covariances: Option<Vec<MatrixInput>>,
    pub matrices: Option<Vec<MatrixInput>>,

    pub function: Option<FunctionInput>,
    pub functions: Option<Vec<FunctionInput>>,
    pub dual_radius: Option<f64>,
    pub lambda: Option<f64>,
    pub mode: Option<SurfaceMode>,
    pub reference: Option<f64>,
    pub steps: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub command: Command,
    pub settings: Settings,
    /// The document as given, echoed into the report.
    pub echo: Value,
    /// Directory that relative paths in the config resolve against.
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn require<T: Clone>(&self, key: &str, value: &Option<T>) -> Result<T, ConfigError> {
        value.clone().ok_or_else(|| ConfigError::new(key, format!("`{key}` is required by `{}`", self.command)))
    }
}

/// Parses and validates a JSON config. `command` is the subcommand given on
/// the command line; a `command` key in the document must agree with it.
pub fn parse_config(document: &str, command: Option<Command>) -> Result<ExperimentConfig, ConfigError> {
    let echo: Value =
        serde_json::from_str(document).map_err(|e| ConfigError::new("", format!("invalid JSON: {e}")))?;
    let Some(map) = echo.as_object() else {
        return Err(ConfigError::new("", "the config must be a JSON object"));
    };
    let named = match map.get("command") {
        None => None,
        Some(Value::String(s)) => {
            Some(Command::from_name(s).ok_or_else(|| ConfigError::new("command", format!("unknown command `{s}`")))?)
        }
        Some(_) => return Err(ConfigError::new("command", "expected a string")),
    };
    let command = match (command, named) {
        (Some(a), Some(b)) if a != b => {
            return Err(ConfigError::new("command", format!("config is for `{b}` but `{a}` was requested")))
        }
        (Some(c), _) | (None, Some(c)) => c,
        (None, None) => return Err(ConfigError::new("command", "no command given")),
    };
    for key in map.keys() {
        if !command.allows(key) {
            return Err(ConfigError::new(key.as_str(), format!("unknown key `{key}` for `{command}`")));
        }
    }
    let settings: Settings = serde_path_to_error::deserialize(&echo)
        .map_err(|e| ConfigError::new(e.path().to_string(), e.inner().to_string()))?;
    let needs_seed = command.is_stochastic() || (command == Command::BallMonotonicity && settings.reference.is_none());
    if needs_seed && settings.seed.is_none() {
        return Err(ConfigError::new("seed", format!("`{command}` is stochastic and needs a `seed`")));
    }
    if settings.threads == Some(0) {
        return Err(ConfigError::new("threads", "must be at least 1"));
    }
    Ok(ExperimentConfig { command, settings, echo, base_dir: PathBuf::from(".") })
}
