//! Command-line harness for the compact quasi-Newton library.
//!
//! Every command writes a CSV table (to `--out` or standard output) and is
//! deterministic for a fixed set of flags and seed. Parameters may also come
//! from a JSON file passed with `--config`; explicit flags take precedence.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

pub mod commands;
pub mod csv;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_TOLERANCE: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config file {path}: {reason}")]
    Config { path: PathBuf, reason: String },
    #[error(transparent)]
    Core(#[from] compactqn::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Debug, Parser)]
#[command(name = "compactqn", version, about = "Compact quasi-Newton experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare a compact form with its dense recursion.
    Verify(VerifyArgs),
    /// Time dense against implicit eigendecomposition on Rosenbrock iterates.
    #[command(name = "eig-bench")]
    EigBench(EigBenchArgs),
    /// Run a deterministic solver on a test problem.
    Minimize(MinimizeArgs),
    /// Fit CP models to random three-way tensors.
    Tensor(TensorArgs),
    /// Stochastic multiclass logistic regression on synthetic data.
    Logistic(LogisticArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Verify(_) => "verify",
            Command::EigBench(_) => "eig-bench",
            Command::Minimize(_) => "minimize",
            Command::Tensor(_) => "tensor",
            Command::Logistic(_) => "logistic",
        }
    }
}

macro_rules! overlay {
    ($flags:expr, $file:expr; $($field:ident),+) => {
        $( if $flags.$field.is_none() { $flags.$field = $file.$field; } )+
    };
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[command(rename_all = "snake_case")]
#[serde(deny_unknown_fields)]
pub struct VerifyArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    /// general-s, general-y, general-rand, bfgs, psb or greenstadt
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[command(rename_all = "snake_case")]
#[serde(deny_unknown_fields)]
pub struct EigBenchArgs {
    /// Comma-separated dimensions, e.g. `8,16,32`.
    #[arg(long)]
    pub d_list: Option<String>,
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    /// Timing repeats; the median is reported.
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Largest dimension for the dense eigensolver leg.
    #[arg(long)]
    pub dense_max: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[command(rename_all = "snake_case")]
#[serde(deny_unknown_fields)]
pub struct MinimizeArgs {
    /// rosenbrock or quadratic
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    /// linesearch or trustregion
    #[arg(long)]
    pub strategy: Option<String>,
    /// s or y
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[command(rename_all = "snake_case")]
#[serde(deny_unknown_fields)]
pub struct TensorArgs {
    /// Three comma-separated sizes, e.g. `10,10,10`.
    #[arg(long)]
    pub dims: Option<String>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub n_instances: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Fit this CPT1 tensor instead of generated ones.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Write the first instance's tensor in CPT1 format.
    #[arg(long)]
    pub write_tensor: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[command(rename_all = "snake_case")]
#[serde(deny_unknown_fields)]
pub struct LogisticArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long = "classes", alias = "C")]
    #[serde(alias = "C")]
    pub classes: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// sgd, compact-s or compact-y
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long)]
    pub separation: Option<f64>,
    /// Run all modes over this many consecutive seeds and print a comparison.
    #[arg(long)]
    pub sweep: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn load_config<T: for<'de> Deserialize<'de>>(path: &Path, command: &str) -> CliResult<T> {
    let err = |reason: String| CliError::Config { path: path.to_path_buf(), reason };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
    let obj = value.as_object_mut().ok_or_else(|| err("expected a JSON object".into()))?;
    if let Some(cmd) = obj.remove("command") {
        if cmd.as_str() != Some(command) {
            return Err(err(format!("file is for command {cmd}, not {command:?}")));
        }
    }
    serde_json::from_value(value).map_err(|e| err(e.to_string()))
}

impl Command {
    /// Fills unset flags from the `--config` file, if one was given.
    pub fn with_config(self) -> CliResult<Self> {
        let name = self.name();
        Ok(match self {
            Command::Verify(mut a) => {
                if let Some(path) = a.config.clone() {
                    let f: VerifyArgs = load_config(&path, name)?;
                    overlay!(a, f; d, k_max, mode, seed, out);
                }
                Command::Verify(a)
            }
            Command::EigBench(mut a) => {
                if let Some(path) = a.config.clone() {
                    let f: EigBenchArgs = load_config(&path, name)?;
                    overlay!(a, f; d_list, l, iters, repeats, dense_max, out);
                }
                Command::EigBench(a)
            }
            Command::Minimize(mut a) => {
                if let Some(path) = a.config.clone() {
                    let f: MinimizeArgs = load_config(&path, name)?;
                    overlay!(a, f; problem, d, strategy, policy, l, tol, max_iter, seed, out);
                }
                Command::Minimize(a)
            }
            Command::Tensor(mut a) => {
                if let Some(path) = a.config.clone() {
                    let f: TensorArgs = load_config(&path, name)?;
                    overlay!(a, f; dims, rank, n_instances, noise, l, restarts, tol, max_iter, seed, jobs, input, write_tensor, out);
                }
                Command::Tensor(a)
            }
            Command::Logistic(mut a) => {
                if let Some(path) = a.config.clone() {
                    let f: LogisticArgs = load_config(&path, name)?;
                    overlay!(a, f; n, p, classes, batch, epochs, alpha, mode, l, separation, sweep, seed, jobs, out);
                }
                Command::Logistic(a)
            }
        })
    }

    fn out_path(&self) -> Option<&Path> {
        match self {
            Command::Verify(a) => a.out.as_deref(),
            Command::EigBench(a) => a.out.as_deref(),
            Command::Minimize(a) => a.out.as_deref(),
            Command::Tensor(a) => a.out.as_deref(),
            Command::Logistic(a) => a.out.as_deref(),
        }
    }
}

/// Where a command writes its table and its human-readable summary.
pub struct Sinks<'a> {
    pub table: &'a mut dyn Write,
    pub summary: &'a mut dyn Write,
}

/// Runs a parsed command. The CSV goes to `--out` when given, else `stdout`;
/// the summary goes to `stdout` when the table went to a file, else `stderr`.
pub fn execute(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<u8> {
    let command = command.with_config()?;
    match command.out_path() {
        Some(path) => {
            let mut file = BufWriter::new(File::create(path)?);
            let code = dispatch(command, &mut Sinks { table: &mut file, summary: stdout })?;
            file.flush()?;
            Ok(code)
        }
        None => dispatch(command, &mut Sinks { table: stdout, summary: stderr }),
    }
}

fn dispatch(command: Command, sinks: &mut Sinks<'_>) -> CliResult<u8> {
    match command {
        Command::Verify(a) => commands::verify(&a, sinks),
        Command::EigBench(a) => commands::eig_bench(&a, sinks),
        Command::Minimize(a) => commands::minimize(&a, sinks),
        Command::Tensor(a) => commands::tensor(&a, sinks),
        Command::Logistic(a) => commands::logistic(&a, sinks),
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_USAGE
        }
    }
}
