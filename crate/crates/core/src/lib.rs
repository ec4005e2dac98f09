//! Crash-rate volatility modelling: monthly series ingestion, volatility
//! statistics, a seeded amended-Heston Monte Carlo engine with a Vasicek
//! baseline, ARIMA/ARIMA-GARCH baselines, and backtest scoring.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arima_garch;
pub mod calibrate;
pub mod engine;
pub mod error;
pub mod evaluation;
pub mod format;
pub mod series;
pub mod stats;

pub use error::{Error, Result};
pub use series::{parse_monthly_csv, parse_monthly_str, MonthlyObservation, MonthlySeries, RateSeries, YearMonth};
