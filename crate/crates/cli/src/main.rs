//! `crashvol`: crash-rate statistics, stochastic-volatility forecasts and
//! backtests from monthly crash/VMT CSV files.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crashvol_core::arima_garch::ModelOrders;
use crashvol_core::engine::BoundaryScheme;
use crashvol_core::evaluation::{ModelKind, DEFAULT_ORDERS};
use crashvol_core::YearMonth;

#[derive(Debug, Parser)]
#[command(name = "crashvol", version, about = "Crash-rate volatility statistics, forecasts and backtests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Volatility, growth, season and distribution statistics of a series.
    Diagnose(DiagnoseArgs),
    /// Estimate model parameters from a training window.
    Fit(FitArgs),
    /// Forecast from a parameter file.
    Forecast(ForecastArgs),
    /// Score a forecast file against observed rates.
    Evaluate(EvaluateArgs),
    /// Fit, forecast and score over consecutive train/test windows.
    Backtest(BacktestArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Monthly `year,month,crashes,vmt_thousands` CSV; repeat to merge files.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Minimum |mean deviation| for a month to be flagged as a spike.
    #[arg(long, default_value_t = crashvol_core::calibrate::DEFAULT_SPIKE_THRESHOLD)]
    spike_threshold: f64,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long, default_value = "heston", value_parser = parse_model)]
    model: ModelKind,
    /// ARIMA orders `p,d,q` or `p,d,q,gp,gq` (GARCH ARCH and GARCH orders).
    #[arg(long, value_parser = parse_orders, default_value_t = DEFAULT_ORDERS)]
    orders: ModelOrders,
    /// Fit ARIMA models on log rates.
    #[arg(long)]
    log_levels: bool,
    #[arg(long, default_value_t = crashvol_core::calibrate::DEFAULT_RHO, allow_hyphen_values = true)]
    rho: f64,
    /// Initial rate; defaults to the observed rate of the first forecast month.
    #[arg(long)]
    c1: Option<f64>,
    /// Mean-reversion speed; defaults to just above the Feller bound.
    #[arg(long)]
    kappa: Option<f64>,
    /// Volatility of volatility; defaults to the training estimate.
    #[arg(long)]
    xi: Option<f64>,
    /// Annual drift; defaults to the training growth estimate.
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<f64>,
    #[arg(long, default_value_t = crashvol_core::calibrate::DEFAULT_SPIKE_THRESHOLD)]
    spike_threshold: f64,
    #[arg(long, value_parser = parse_scheme, default_value = "reflect")]
    scheme: BoundaryScheme,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_parser = parse_month)]
    train_start: YearMonth,
    #[arg(long, value_parser = parse_month)]
    train_end: YearMonth,
    /// First forecast month; defaults to the month after the training window.
    #[arg(long, value_parser = parse_month)]
    test_start: Option<YearMonth>,
    #[command(flatten)]
    model: ModelArgs,
    /// Parameter file to write; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulationArgs {
    /// Monte Carlo path count.
    #[arg(long = "paths", default_value_t = 5000)]
    n_paths: usize,
    /// Master seed; required for the stochastic models.
    #[arg(long)]
    seed: Option<u64>,
    /// Quantile levels in percent.
    #[arg(long, value_parser = parse_levels, default_value = "5,25,75,95")]
    levels: Levels,
}

#[derive(Debug, Args)]
struct ForecastArgs {
    #[arg(long)]
    params: PathBuf,
    /// Months to forecast.
    #[arg(long, default_value_t = 60)]
    horizon: usize,
    #[command(flatten)]
    sim: SimulationArgs,
    /// Overrides the boundary scheme recorded in the parameter file.
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<BoundaryScheme>,
    /// Forecast CSV to write; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Forecast CSV (`year,month,median,q..`).
    #[arg(long)]
    forecast: PathBuf,
    #[command(flatten)]
    input: InputArgs,
    /// Model label for the report.
    #[arg(long, default_value = "forecast")]
    model_id: String,
    /// Output directory for `report.csv` and `coverage.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BacktestArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_parser = parse_month)]
    train_start: YearMonth,
    #[arg(long, value_parser = parse_month)]
    train_end: YearMonth,
    #[arg(long, value_parser = parse_month)]
    test_start: YearMonth,
    #[arg(long, value_parser = parse_month)]
    test_end: YearMonth,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    sim: SimulationArgs,
    /// Output directory for parameters, forecast, report and coverage.
    #[arg(long)]
    out: PathBuf,
}

/// Quantile levels as fractions.
#[derive(Debug, Clone)]
struct Levels(Vec<f64>);

fn parse_month(s: &str) -> Result<YearMonth, String> {
    s.parse::<YearMonth>().map_err(|e| e.to_string())
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: crashvol_core::Error| e.to_string())
}

fn parse_orders(s: &str) -> Result<ModelOrders, String> {
    s.parse().map_err(|e: crashvol_core::Error| e.to_string())
}

fn parse_scheme(s: &str) -> Result<BoundaryScheme, String> {
    s.parse().map_err(|e: crashvol_core::Error| e.to_string())
}

fn parse_levels(s: &str) -> Result<Levels, String> {
    let mut levels = Vec::new();
    for part in s.split(',') {
        let pct: f64 = part
            .trim()
            .parse()
            .map_err(|_| format!("invalid level {part:?}"))?;
        if !(pct > 0.0 && pct < 100.0) {
            return Err(format!("levels are percentages in (0, 100), got {pct}"));
        }
        levels.push(pct / 100.0);
    }
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    Ok(Levels(levels))
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("CRASHVOL_LOG", "warn");
    env_logger::Builder::from_env(env).format_timestamp(None).init();
}

/// Machine-readable code of the first library error in the chain.
fn error_code(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<crashvol_core::Error>() {
            return e.code();
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "E_IO";
        }
    }
    "E_RUNTIME"
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("E_USAGE: {first}");
            return ExitCode::from(2);
        }
    };
    init_logging();

    let result = match cli.command {
        Command::Diagnose(args) => commands::diagnose(&args),
        Command::Fit(args) => commands::fit(&args),
        Command::Forecast(args) => commands::forecast(&args),
        Command::Evaluate(args) => commands::evaluate(&args),
        Command::Backtest(args) => commands::backtest(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let message = format!("{err:#}").replace('\n', " ");
            eprintln!("{}: {message}", error_code(&err));
            ExitCode::FAILURE
        }
    }
}
