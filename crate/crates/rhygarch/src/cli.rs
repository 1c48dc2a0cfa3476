//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 non-convergence or
//! non-stationarity refusal.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use rhygarch_core::fit::DistKind;
use rhygarch_core::{
    check_stationarity, fit, risk, simulate, Convention, Error as CoreError, FitOptions, QuantileFlavor,
    RhygarchParams, SimOptions,
};

use crate::io::{self, IoError};
use crate::mc::{self, StudyConfig, TableFormat};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_FAILED: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    /// Non-convergence or non-stationarity.
    Failed(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Failed(_) => EXIT_FAILED,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Failed(m) => m,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Data { .. } => CliError::Data(e.to_string()),
            CoreError::NonStationary(_) | CoreError::Optimizer(_) => CliError::Failed(e.to_string()),
            CoreError::Domain(_) | CoreError::InvalidParams(_) => CliError::Usage(e.to_string()),
        }
    }
}

/// Realized HYGARCH(1,d,1): simulate, fit, forecast and Monte Carlo studies.
#[derive(Debug, Parser)]
#[command(name = "rhygarch", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate returns and realized measures to CSV.
    Simulate(SimulateArgs),
    /// Estimate parameters from a CSV series by quasi-maximum likelihood.
    Fit(FitArgs),
    /// One-step-ahead variance, VaR and ES from parameters and a CSV series.
    Forecast(ForecastArgs),
    /// Run a Monte Carlo study described by a JSON config.
    Mc(McArgs),
    /// Report the truncated stationarity conditions of a parameter set.
    Check(CheckArgs),
}

fn probability(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("`{s}` is outside (0, 1)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistArg {
    Gaussian,
    StudentT,
}

impl From<DistArg> for DistKind {
    fn from(d: DistArg) -> Self {
        match d {
            DistArg::Gaussian => DistKind::Gaussian,
            DistArg::StudentT => DistKind::StudentT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    Paper,
    Standard,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Paper => Convention::Paper,
            ConventionArg::Standard => Convention::Standard,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QuantileArg {
    Standardized,
    Raw,
}

impl From<QuantileArg> for QuantileFlavor {
    fn from(q: QuantileArg) -> Self {
        match q {
            QuantileArg::Standardized => QuantileFlavor::Standardized,
            QuantileArg::Raw => QuantileFlavor::Raw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Parameters: path to a JSON file, or `model1` / `model2`
    #[arg(long)]
    pub params: String,
    /// Number of observations kept (integer >= 1)
    #[arg(long = "T", value_parser = clap::value_parser!(u64).range(1..))]
    pub t: u64,
    /// Seed of the random streams (unsigned 64-bit integer)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Simulated points discarded before the kept sample (integer >= 0)
    #[arg(long = "burn-in", default_value_t = 2000)]
    pub burn_in: u64,
    /// Lag truncation of the fractional filter (integer >= 1)
    #[arg(long = "K", default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    /// Output CSV path; standard output when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the latent columns h, z, u
    #[arg(long)]
    pub latent: bool,
    /// Simulate even if the first-moment condition fails
    #[arg(long = "allow-nonstationary")]
    pub allow_nonstationary: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV with `return` and `realized` columns
    #[arg(long)]
    pub input: PathBuf,
    /// Return likelihood
    #[arg(long, value_enum, default_value_t = DistArg::Gaussian)]
    pub dist: DistArg,
    /// Lag truncation of the fractional filter (integer >= 1)
    #[arg(long = "K", default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    /// Starting parameters (JSON path or `model1` / `model2`); data-driven default when absent
    #[arg(long)]
    pub start: Option<String>,
    /// Leave the first K observations out of the likelihood (needs T > K)
    #[arg(long = "drop-presample")]
    pub drop_presample: bool,
    /// Seed of the restart jitter (unsigned 64-bit integer)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output JSON path; standard output when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    /// Parameters: JSON path (bare parameters or fit output), or `model1` / `model2`
    #[arg(long)]
    pub params: String,
    /// CSV with `return` and `realized` columns; the realized history drives h_{T+1}
    #[arg(long)]
    pub input: PathBuf,
    /// Lag truncation of the fractional filter (integer >= 1)
    #[arg(long = "K", default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    /// Comma-separated tail probabilities, each in (0, 1)
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.01], value_parser = probability)]
    pub levels: Vec<f64>,
    /// ES convention
    #[arg(long, value_enum, default_value_t = ConventionArg::Paper)]
    pub convention: ConventionArg,
    /// Student-t quantile scale
    #[arg(long, value_enum, default_value_t = QuantileArg::Standardized)]
    pub quantile: QuantileArg,
    /// Output JSON path; standard output when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct McArgs {
    /// Study config JSON: {model, dist, T, M, K, levels, conventions, master_seed}
    #[arg(long)]
    pub config: PathBuf,
    /// Directory receiving summary.json, table.txt and table.csv
    #[arg(long = "out-dir", default_value = ".")]
    pub out_dir: PathBuf,
    /// Table echoed to standard output
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Parameters: path to a JSON file, or `model1` / `model2`
    #[arg(long)]
    pub params: String,
    /// Lag truncation of the fractional filter (integer >= 1)
    #[arg(long = "K", default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
}

/// Long flags accepted by each subcommand, as shown by `--help`.
pub const FLAGS: &[(&str, &[&str])] = &[
    ("simulate", &["params", "T", "seed", "burn-in", "K", "out", "latent", "allow-nonstationary"]),
    ("fit", &["input", "dist", "K", "start", "drop-presample", "seed", "out"]),
    ("forecast", &["params", "input", "K", "levels", "convention", "quantile", "out"]),
    ("mc", &["config", "out-dir", "format"]),
    ("check", &["params", "K"]),
];

fn load_params(spec: &str) -> Result<RhygarchParams, CliError> {
    match spec {
        "model1" => Ok(RhygarchParams::model1()),
        "model2" => Ok(RhygarchParams::model2()),
        path => {
            let p = io::read_params(Path::new(path))?;
            p.ensure_valid().map_err(|e| CliError::Data(format!("{path}: {e}")))?;
            Ok(p)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| CliError::Data(e.to_string()))
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).unwrap_or_default();
    s.push('\n');
    s
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let p = load_params(&a.params)?;
    let opts = SimOptions {
        t: a.t as usize,
        burn_in: a.burn_in as usize,
        truncation: a.k as usize,
        seed: a.seed,
        allow_nonstationary: a.allow_nonstationary,
    };
    let s = simulate(&p, &opts)?;
    match &a.out {
        Some(path) => io::write_series_file(path, &s, a.latent)?,
        None => io::write_series(std::io::stdout().lock(), &s, a.latent).map_err(|e| CliError::Data(e.to_string()))?,
    }
    Ok(())
}

fn cmd_fit(a: &FitArgs) -> Result<(), CliError> {
    let data = io::read_series(&a.input)?;
    let start = a.start.as_deref().map(load_params).transpose()?;
    let opts =
        FitOptions { drop_presample: a.drop_presample, seed: a.seed, ..FitOptions::with_truncation(a.k as usize) };
    let r = fit(&data, a.dist.into(), start.as_ref(), &opts)?;
    emit(a.out.as_deref(), &to_json(&r))?;
    if !r.converged {
        return Err(CliError::Failed(format!(
            "fit did not converge (gradient norm {:.3e}, tolerance {:.1e})",
            r.grad_norm, opts.grad_tol
        )));
    }
    Ok(())
}

fn cmd_forecast(a: &ForecastArgs) -> Result<(), CliError> {
    let p = load_params(&a.params)?;
    let data = io::read_series(&a.input)?;
    let h = risk::forecast_h(&p, &data.realized, a.k as usize)?;
    let forecasts = a
        .levels
        .iter()
        .map(|&alpha| risk::risk_at(h, alpha, &p.innovation, a.convention.into(), a.quantile.into()))
        .collect::<Result<Vec<_>, _>>()?;
    emit(a.out.as_deref(), &to_json(&serde_json::json!({ "h_next": h, "forecasts": forecasts })))
}

fn cmd_mc(a: &McArgs) -> Result<(), CliError> {
    let text =
        std::fs::read_to_string(&a.config).map_err(|e| CliError::Data(format!("{}: {e}", a.config.display())))?;
    let cfg: StudyConfig =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", a.config.display())))?;
    cfg.check().map_err(CliError::Usage)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::Data(format!("{}: {e}", a.out_dir.display())))?;
    let summary = mc::run_study(&cfg).map_err(CliError::Usage)?;
    io::write_json(&a.out_dir.join("summary.json"), &summary)?;
    let write = |name: &str, format: TableFormat| {
        let path = a.out_dir.join(name);
        std::fs::write(&path, mc::emit_table(&summary, format))
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    };
    write("table.txt", TableFormat::Text)?;
    write("table.csv", TableFormat::Csv)?;
    let format = match a.format {
        FormatArg::Text => TableFormat::Text,
        FormatArg::Csv => TableFormat::Csv,
        FormatArg::Json => TableFormat::Json,
    };
    emit(None, &mc::emit_table(&summary, format))?;
    if summary.convergence_rate < 1.0 {
        eprintln!(
            "{} of {} replications excluded (not converged)",
            summary.m - (summary.convergence_rate * summary.m as f64).round() as usize,
            summary.m
        );
    }
    Ok(())
}

fn cmd_check(a: &CheckArgs) -> Result<(), CliError> {
    let p = load_params(&a.params)?;
    let report = check_stationarity(&p, a.k as usize)?;
    emit(None, &to_json(&report))?;
    if !report.first_moment_ok {
        return Err(CliError::Failed(format!("first-moment condition fails: phi * sum(psi) = {}", report.phi_sum_psi)));
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Forecast(a) => cmd_forecast(a),
        Command::Mc(a) => cmd_mc(a),
        Command::Check(a) => cmd_check(a),
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}
