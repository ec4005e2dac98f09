//! Forecast scoring and train/test backtests.

use std::fmt;
use std::str::FromStr;

use crate::arima_garch::{fit_baseline, ModelOrders};
use crate::calibrate::{calibrate_heston, calibrate_vasicek, history_tail, CalibrationConfig};
use crate::engine::{forecast_quantiles, simulate_heston, simulate_vasicek, ForecastQuantiles};
use crate::error::{Error, Result};
use crate::format::{sig10, KvFile};
use crate::series::{MonthlySeries, RateSeries, YearMonth};

/// MAE, RMSE and MAPE; MAPE is a fraction (0.10 = 10%).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub mae: f64,
    pub rmse: f64,
    pub mape: f64,
}

pub fn error_stats(forecast: &[f64], observed: &[f64]) -> Result<ErrorStats> {
    if forecast.len() != observed.len() {
        return Err(Error::Misaligned(format!(
            "forecast has {} values, observed has {}",
            forecast.len(),
            observed.len()
        )));
    }
    if forecast.is_empty() {
        return Err(Error::InsufficientData("no values to score".into()));
    }
    if let Some(i) = observed.iter().position(|o| *o == 0.0) {
        return Err(Error::Domain(format!(
            "observed value {i} is zero; percentage error is undefined"
        )));
    }
    let n = forecast.len() as f64;
    let (mut abs, mut sq, mut pct) = (0.0, 0.0, 0.0);
    for (f, o) in forecast.iter().zip(observed) {
        let e = f - o;
        abs += e.abs();
        sq += e * e;
        pct += (e / o).abs();
    }
    Ok(ErrorStats {
        mae: abs / n,
        rmse: (sq / n).sqrt(),
        mape: pct / n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub model_id: String,
    pub per_year: Vec<(i32, ErrorStats)>,
    /// Unweighted mean of the yearly values.
    pub overall: ErrorStats,
    pub n_months: usize,
}

fn check_aligned(a: &RateSeries, b: &RateSeries) -> Result<()> {
    if a.start != b.start || a.len() != b.len() {
        let span = |s: &RateSeries| {
            if s.is_empty() {
                "empty".to_string()
            } else {
                format!("{}..{}", s.start, s.end())
            }
        };
        return Err(Error::Misaligned(format!(
            "forecast covers {}, observed covers {}",
            span(a),
            span(b)
        )));
    }
    Ok(())
}

pub fn yearly_error_report(forecast: &RateSeries, observed: &RateSeries, model_id: &str) -> Result<ErrorReport> {
    check_aligned(forecast, observed)?;
    if forecast.is_empty() {
        return Err(Error::InsufficientData("no months to score".into()));
    }
    let mut per_year = Vec::new();
    let mut i = 0;
    let dates: Vec<YearMonth> = forecast.dates().collect();
    while i < dates.len() {
        let year = dates[i].year;
        let j = dates[i..].iter().position(|d| d.year != year).map_or(dates.len(), |k| i + k);
        per_year.push((year, error_stats(&forecast.values[i..j], &observed.values[i..j])?));
        i = j;
    }
    let k = per_year.len() as f64;
    let avg = |f: fn(&ErrorStats) -> f64| per_year.iter().map(|(_, s)| f(s)).sum::<f64>() / k;
    let overall = ErrorStats {
        mae: avg(|s| s.mae),
        rmse: avg(|s| s.rmse),
        mape: avg(|s| s.mape),
    };
    Ok(ErrorReport {
        model_id: model_id.to_string(),
        per_year,
        overall,
        n_months: forecast.len(),
    })
}

impl ErrorReport {
    pub const CSV_HEADER: &'static str = "model,year,mae,rmse,mape";

    /// Rows for this report without the header.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        let mut row = |year: &str, s: &ErrorStats| {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.model_id,
                year,
                sig10(s.mae),
                sig10(s.rmse),
                sig10(s.mape)
            ));
        };
        for (y, s) in &self.per_year {
            row(&y.to_string(), s);
        }
        row("overall", &self.overall);
        out
    }

    pub fn to_csv_string(&self) -> String {
        format!("{}\n{}", Self::CSV_HEADER, self.csv_rows())
    }

    /// Worst year by MAPE.
    pub fn worst_year(&self) -> Option<i32> {
        self.per_year
            .iter()
            .max_by(|a, b| a.1.mape.total_cmp(&b.1.mape))
            .map(|(y, _)| *y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage {
    pub low: f64,
    pub high: f64,
    pub outside: usize,
    pub total: usize,
}

impl Coverage {
    pub fn fraction_outside(&self) -> f64 {
        self.outside as f64 / self.total as f64
    }
}

/// Counts observed months strictly outside `[q_low, q_high]`.
pub fn interval_coverage(quantiles: &ForecastQuantiles, observed: &RateSeries, low: f64, high: f64) -> Result<Coverage> {
    if !(low < high) {
        return Err(Error::Validation(format!("interval bounds must satisfy low < high, got {low}, {high}")));
    }
    check_aligned(&quantiles.median_series(), observed)?;
    let band = |level: f64| {
        quantiles
            .band(level)
            .ok_or_else(|| Error::Validation(format!("forecast has no {level} quantile")))
    };
    let (lo, hi) = (band(low)?, band(high)?);
    let outside = observed
        .values
        .iter()
        .enumerate()
        .filter(|(t, o)| **o < lo[*t] || **o > hi[*t])
        .count();
    Ok(Coverage {
        low,
        high,
        outside,
        total: observed.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Heston,
    Vasicek,
    Arima,
    ArimaGarch,
}

impl ModelKind {
    pub fn is_stochastic(self) -> bool {
        matches!(self, ModelKind::Heston | ModelKind::Vasicek)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Heston => "heston",
            ModelKind::Vasicek => "vasicek",
            ModelKind::Arima => "arima",
            ModelKind::ArimaGarch => "arima-garch",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heston" => Ok(ModelKind::Heston),
            "vasicek" => Ok(ModelKind::Vasicek),
            "arima" => Ok(ModelKind::Arima),
            "arima-garch" => Ok(ModelKind::ArimaGarch),
            other => Err(Error::Validation(format!(
                "unknown model {other:?} (expected heston, vasicek, arima or arima-garch)"
            ))),
        }
    }
}

/// Default baseline orders: ARIMA(1,2,2) with GARCH(2,1).
pub const DEFAULT_ORDERS: ModelOrders = ModelOrders {
    p: 1,
    d: 2,
    q: 2,
    garch: Some((2, 1)),
};

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    pub model: ModelKind,
    pub calibration: CalibrationConfig,
    /// Orders for the ARIMA models; GARCH orders are ignored for plain ARIMA.
    pub orders: ModelOrders,
    pub log_levels: bool,
    pub n_paths: usize,
    pub levels: Vec<f64>,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Heston,
            calibration: CalibrationConfig::default(),
            orders: DEFAULT_ORDERS,
            log_levels: false,
            n_paths: 5000,
            levels: vec![0.05, 0.25, 0.75, 0.95],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: YearMonth,
    pub end: YearMonth,
}

impl Window {
    pub fn new(start: YearMonth, end: YearMonth) -> Result<Self> {
        if start > end {
            return Err(Error::Range(format!("window {start}..{end} is empty")));
        }
        Ok(Self { start, end })
    }

    pub fn months(&self) -> usize {
        self.start.months_until(self.end) as usize + 1
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestOutcome {
    /// Fitted parameters in the model's file format.
    pub parameters: KvFile,
    pub quantiles: ForecastQuantiles,
    pub report: ErrorReport,
}

/// Orders the fit actually uses for `kind`.
pub fn effective_orders(kind: ModelKind, orders: ModelOrders) -> Result<ModelOrders> {
    match kind {
        ModelKind::Arima => Ok(ModelOrders { garch: None, ..orders }),
        ModelKind::ArimaGarch => {
            if orders.garch.is_none() {
                return Err(Error::Validation(
                    "arima-garch needs orders p,d,q,gp,gq".into(),
                ));
            }
            Ok(orders)
        }
        _ => Ok(orders),
    }
}

/// Fits `cfg.model` on the training window and returns its parameter file
/// and forecast quantiles over `horizon` months after the window.
pub fn fit_and_forecast(
    series: &MonthlySeries,
    train: Window,
    horizon: usize,
    cfg: &BacktestConfig,
    seed: u64,
) -> Result<(KvFile, ForecastQuantiles)> {
    let forecast_start = train.end.next();
    match cfg.model {
        ModelKind::Heston => {
            let (params, _) = calibrate_heston(series, train.start, train.end, forecast_start, &cfg.calibration)?;
            let tail = history_tail(series, train.end)?;
            let sim = simulate_heston(&params, horizon, cfg.n_paths, seed, &tail)?;
            let mut kv = params.to_kv();
            kv.push_list("history_tail", &tail);
            Ok((kv, forecast_quantiles(&sim, &cfg.levels)?))
        }
        ModelKind::Vasicek => {
            let (params, _) = calibrate_vasicek(series, train.start, train.end, forecast_start, &cfg.calibration)?;
            let tail = history_tail(series, train.end)?;
            let sim = simulate_vasicek(&params, horizon, cfg.n_paths, seed, &tail)?;
            let mut kv = params.to_kv();
            kv.push_list("history_tail", &tail);
            Ok((kv, forecast_quantiles(&sim, &cfg.levels)?))
        }
        ModelKind::Arima | ModelKind::ArimaGarch => {
            let orders = effective_orders(cfg.model, cfg.orders)?;
            let rates = series.slice_window(train.start, train.end)?.rate_series();
            let fitted = fit_baseline(&rates, orders, cfg.log_levels)?;
            Ok((fitted.to_kv(), fitted.forecast_quantiles(horizon, &cfg.levels)?))
        }
    }
}

/// Fits on `train`, forecasts `test`, and scores the median path against the
/// observed test rates.
pub fn backtest(
    series: &MonthlySeries,
    train: Window,
    test: Window,
    cfg: &BacktestConfig,
    seed: u64,
) -> Result<BacktestOutcome> {
    if test.start <= train.end {
        return Err(Error::Range(format!("test window {test} overlaps training window {train}")));
    }
    if test.start != train.end.next() {
        return Err(Error::Range(format!(
            "test window {test} must start right after training window {train}"
        )));
    }
    let observed = series.slice_window(test.start, test.end)?.rate_series();
    let (parameters, quantiles) = fit_and_forecast(series, train, test.months(), cfg, seed)?;
    let report = yearly_error_report(&quantiles.median_series(), &observed, &cfg.model.to_string())?;
    Ok(BacktestOutcome {
        parameters,
        quantiles,
        report,
    })
}
