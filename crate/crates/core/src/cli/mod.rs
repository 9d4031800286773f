//! Command-line front end: argument parsing, run configuration, dispatch and
//! record output.
//!
//! Exit codes: 0 analysis completed (whatever the mathematical verdict),
//! 1 certificate replay mismatch, 2 configuration error, 3 numerical
//! diagnostic.

mod commands;
pub mod record;

use std::io::Write;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hp::DEFAULT_DIGITS;
use record::{Metadata, RunRecord, RECORD_VERSION};

pub use commands::{
    BoundaryArgs, CndArgs, FracpowArgs, GramArgs, IdentitiesArgs, SpectrumArgs, SweepArgs, VerifyArgs, WitnessArgs,
};

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandName {
    Gram,
    Cnd,
    Boundary,
    Witness,
    Identities,
    Fracpow,
    Spectrum,
    Sweep,
    Verify,
}

fn default_precision() -> u32 {
    DEFAULT_DIGITS
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

/// Everything that determines a run. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: CommandName,
    #[serde(default)]
    pub params: Map<String, Value>,
    #[serde(default)]
    pub seed: u64,
    /// Working precision in decimal digits.
    #[serde(default = "default_precision")]
    pub precision: u32,
    #[serde(default = "default_tol")]
    pub tolerance: f64,
    #[serde(default)]
    pub output_path: Option<String>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub sequential: bool,
}

impl RunConfig {
    pub fn new(command: CommandName, params: impl Serialize) -> Result<Self> {
        let params = match serde_json::to_value(params).map_err(|e| Error::Config(e.to_string()))? {
            Value::Object(m) => m,
            _ => return Err(Error::Config("command parameters must form an object".into())),
        };
        Ok(Self {
            command,
            params,
            seed: 0,
            precision: DEFAULT_DIGITS,
            tolerance: DEFAULT_TOL,
            output_path: None,
            format: Format::Json,
            sequential: false,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::Config(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if !(16..=4000).contains(&self.precision) {
            return Err(Error::Config(format!("precision must be 16..=4000 digits, got {}", self.precision)));
        }
        if self.format == Format::Csv && self.command != CommandName::Sweep {
            return Err(Error::Config("csv output is only available for sweep".into()));
        }
        Ok(())
    }

    pub(crate) fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }

    pub(crate) fn args<T: for<'de> Deserialize<'de>>(&self) -> Result<T> {
        serde_json::from_value(Value::Object(self.params.clone()))
            .map_err(|e| Error::Config(format!("{:?} parameters: {e}", self.command)))
    }
}

/// How a completed run should be reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// A certificate did not replay.
    Mismatch,
    /// Analysis ran but a self-check failed.
    Diagnostic,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Mismatch => 1,
            Status::Diagnostic => 3,
        }
    }
}

pub struct RunOutcome {
    pub record: RunRecord,
    pub status: Status,
}

/// Validates the configuration, dispatches and wraps the payload.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let start = Instant::now();
    let (payload, status) = commands::dispatch(config)?;
    let metadata = Metadata {
        wall_ms: start.elapsed().as_millis(),
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
    };
    Ok(RunOutcome {
        record: RunRecord { version: RECORD_VERSION.into(), config: config.clone(), metadata, payload },
        status,
    })
}

/// Serializes a record in the configured format.
pub fn render(record: &RunRecord, format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(record)? + "\n"),
        Format::Csv => commands::sweep_csv(record),
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "kpd",
    version,
    about = "Definiteness analysis for the anisotropic kernel 1/(pi(1 + (x-y)^2 + a(x^2+y^2)^t))"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Working precision in decimal digits.
    #[arg(long, global = true, default_value_t = DEFAULT_DIGITS)]
    pub precision: u32,
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Write the record here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Disable data parallelism.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gram matrix definiteness at given points, or a seeded random search.
    Gram(GramArgs),
    /// Conditional negative definiteness of the base form.
    Cnd(CndArgs),
    /// Closed-form boundary constants and 2-point violations.
    Boundary(BoundaryArgs),
    /// Vanishing-moment witness and small-scale negativity certificate.
    Witness(WitnessArgs),
    /// Exact combinatorial identity and moment checks.
    Identities(IdentitiesArgs),
    /// Integral representation of fractional powers.
    Fracpow(FracpowArgs),
    /// Nyström spectrum of the integral operator.
    Spectrum(SpectrumArgs),
    /// Spectrum sweep over a grid of `a` at fixed `t`.
    Sweep(SweepArgs),
    /// Replay every certificate in a record.
    Verify(VerifyArgs),
    /// Execute a JSON run configuration file.
    Run { config: PathBuf },
}

fn to_config(cli: Cli) -> Result<RunConfig> {
    let mut cfg = match cli.command {
        Command::Gram(a) => RunConfig::new(CommandName::Gram, a)?,
        Command::Cnd(a) => RunConfig::new(CommandName::Cnd, a)?,
        Command::Boundary(a) => RunConfig::new(CommandName::Boundary, a)?,
        Command::Witness(a) => RunConfig::new(CommandName::Witness, a)?,
        Command::Identities(a) => RunConfig::new(CommandName::Identities, a)?,
        Command::Fracpow(a) => RunConfig::new(CommandName::Fracpow, a)?,
        Command::Spectrum(a) => RunConfig::new(CommandName::Spectrum, a)?,
        Command::Sweep(a) => RunConfig::new(CommandName::Sweep, a)?,
        Command::Verify(a) => RunConfig::new(CommandName::Verify, a)?,
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config).map_err(|e| Error::Io(format!("{}: {e}", config.display())))?;
            return serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", config.display())));
        }
    };
    let g = cli.global;
    cfg.seed = g.seed;
    cfg.precision = g.precision;
    cfg.tolerance = g.tol;
    cfg.output_path = g.out.map(|p| p.display().to_string());
    cfg.format = g.format;
    cfg.sequential = g.sequential;
    Ok(cfg)
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("KPD_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("KPD_THREADS must be a positive integer, got {raw:?}")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn report_error(e: &Error) -> i32 {
    let body = serde_json::json!({ "error": { "code": e.code(), "message": e.to_string() } });
    eprintln!("{body}");
    if e.is_config() {
        2
    } else {
        3
    }
}

/// Entry point of the `kpd` binary; returns the process exit code.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Err(e) = configure_threads() {
        return report_error(&e);
    }
    let result = to_config(cli).and_then(|cfg| {
        let outcome = run(&cfg)?;
        let text = render(&outcome.record, cfg.format)?;
        match &cfg.output_path {
            Some(path) => std::fs::write(path, text).map_err(|e| Error::Io(format!("{path}: {e}")))?,
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())?;
                out.flush()?;
            }
        }
        Ok(outcome.status)
    });
    match result {
        Ok(status) => status.exit_code(),
        Err(e) => report_error(&e),
    }
}
