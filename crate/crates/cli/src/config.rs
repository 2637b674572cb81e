//! Run configuration: a TOML file merged with command-line flags (flags win).

use serde::Deserialize;
use std::fmt;
use std::path::{Path, PathBuf};

use granular_core::reserving::DEFAULT_LEVELS;
use granular_core::{ClaimType, Day, FitConfig, Horizon};

/// Default master seed; every randomized command prints the seed it used.
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_SCENARIOS: usize = 1000;

/// Failure exit codes: 1 for model or numeric failures, 2 for I/O and configuration.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io { path: PathBuf, source: std::io::Error },
    Core(granular_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Core(e) if e.is_io() => 2,
            CliError::Core(_) => 1,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> CliError {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io { path, source } => write!(f, "cannot access {}: {source}", path.display()),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<granular_core::Error> for CliError {
    fn from(e: granular_core::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub seed: Option<u64>,
    pub scenarios: Option<usize>,
    pub valuation_date: Option<String>,
    /// Overrides the cutoff otherwise inferred from the latest date in the input.
    pub data_cutoff: Option<String>,
    pub horizon: Option<String>,
    pub workers: Option<usize>,
    /// Restrict every command to these claim types.
    pub claim_types: Option<Vec<String>>,
    pub levels: Option<Vec<f64>>,
    /// Reject the whole input when any row is invalid.
    pub strict: bool,
    pub fit: FitConfig,
    pub synth: SynthSection,
    pub triangle: TriangleSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub start: Option<String>,
    pub end: Option<String>,
    /// Rescales occurrence so that about this many accidents occur.
    pub expected_claims: Option<usize>,
    /// Generator model as JSON (the format written by `fit`); the built-in one otherwise.
    pub model: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriangleSection {
    pub period_years: u32,
}

impl Default for TriangleSection {
    fn default() -> Self {
        TriangleSection { period_years: 1 }
    }
}

impl FileConfig {
    pub fn read(path: &Path) -> CliResult<FileConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Values given on the command line.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub seed: Option<u64>,
    pub scenarios: Option<usize>,
    pub valuation_date: Option<String>,
    pub horizon: Option<String>,
    pub workers: Option<usize>,
}

/// Fully resolved settings for one invocation.
#[derive(Debug)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub model: Option<PathBuf>,
    pub seed: u64,
    pub scenarios: usize,
    pub valuation_date: Option<Day>,
    pub data_cutoff: Option<Day>,
    pub horizon: Horizon,
    pub workers: Option<usize>,
    /// Empty means every type present.
    pub claim_types: Vec<ClaimType>,
    pub levels: Vec<f64>,
    pub strict: bool,
    pub fit: FitConfig,
    pub synth: SynthSection,
    pub period_years: u32,
}

fn date(field: &str, s: &str) -> CliResult<Day> {
    Day::parse_iso(s).map_err(|_| CliError::Config(format!("{field}: expected a YYYY-MM-DD date, got '{s}'")))
}

impl RunConfig {
    pub fn resolve(file: FileConfig, flags: Overrides) -> CliResult<RunConfig> {
        let scenarios = flags.scenarios.or(file.scenarios).unwrap_or(DEFAULT_SCENARIOS);
        if scenarios == 0 {
            return Err(CliError::Config("scenario count must be at least 1".into()));
        }
        let workers = flags.workers.or(file.workers);
        if workers == Some(0) {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        let valuation_date =
            flags.valuation_date.or(file.valuation_date).map(|s| date("valuation date", &s)).transpose()?;
        let data_cutoff = file.data_cutoff.map(|s| date("data_cutoff", &s)).transpose()?;
        if let (Some(a), Some(c)) = (valuation_date, data_cutoff) {
            if a > c {
                return Err(CliError::Config(format!("valuation date {a} is after the data cutoff {c}")));
            }
        }
        let horizon: Horizon = match flags.horizon.or(file.horizon) {
            Some(h) => h.parse().map_err(|e: granular_core::Error| CliError::Config(e.to_string()))?,
            None => Horizon::OneYear,
        };
        if let (Some(a), Horizon::Until(b)) = (valuation_date, horizon) {
            if b <= a {
                return Err(CliError::Config(format!("horizon {b} is not after the valuation date {a}")));
            }
        }
        let claim_types = file
            .claim_types
            .unwrap_or_default()
            .iter()
            .map(|s| s.parse::<ClaimType>().map_err(|e| CliError::Config(e.to_string())))
            .collect::<CliResult<Vec<_>>>()?;
        let levels = file.levels.unwrap_or_else(|| DEFAULT_LEVELS.to_vec());
        if let Some(l) = levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return Err(CliError::Config(format!("quantile level {l} outside (0, 1)")));
        }
        if file.triangle.period_years == 0 {
            return Err(CliError::Config("triangle period_years must be at least 1".into()));
        }
        Ok(RunConfig {
            input: flags.input.or(file.input),
            out: flags.out.or(file.out).unwrap_or_else(|| PathBuf::from(".")),
            model: flags.model.or(file.model),
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            scenarios,
            valuation_date,
            data_cutoff,
            horizon,
            workers,
            claim_types,
            levels,
            strict: file.strict,
            fit: file.fit,
            synth: file.synth,
            period_years: file.triangle.period_years,
        })
    }
}
