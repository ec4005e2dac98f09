//! ARIMA and ARIMA-GARCH baselines.

mod arima;
mod garch;
pub mod optim;

pub use arima::{
    css, css_residuals, difference, fit_arima, fit_arima_with, forecast_arima, forecast_variance, is_invertible,
    is_stationary, min_length, min_root_modulus, partials_to_coefficients, select_order, ArimaSpec,
};
pub use garch::{
    fit_garch, fit_garch_with, forecast_garch_variance, gaussian_loglik, variance_path, GarchSpec,
};

use std::fmt;
use std::str::FromStr;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::engine::ForecastQuantiles;
use crate::error::{Error, Result};
use crate::format::KvFile;
use crate::series::{RateSeries, YearMonth};

/// `p,d,q` with optional GARCH `(ARCH p, GARCH q)` orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelOrders {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub garch: Option<(usize, usize)>,
}

impl ModelOrders {
    pub fn arima(p: usize, d: usize, q: usize) -> Self {
        Self { p, d, q, garch: None }
    }

    pub fn arima_garch(p: usize, d: usize, q: usize, gp: usize, gq: usize) -> Self {
        Self {
            p,
            d,
            q,
            garch: Some((gp, gq)),
        }
    }
}

impl fmt::Display for ModelOrders {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.p, self.d, self.q)?;
        if let Some((gp, gq)) = self.garch {
            write!(f, ",{gp},{gq}")?;
        }
        Ok(())
    }
}

impl FromStr for ModelOrders {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|x| x.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Validation(format!("orders must be nonnegative integers, got {s:?}")))?;
        match parts[..] {
            [p, d, q] => Ok(Self::arima(p, d, q)),
            [p, d, q, gp, gq] => Ok(Self::arima_garch(p, d, q, gp, gq)),
            _ => Err(Error::Validation(format!(
                "orders must be p,d,q or p,d,q,gp,gq, got {s:?}"
            ))),
        }
    }
}

/// Point forecasts from the ARIMA mean and conditional variance forecasts
/// from the GARCH recursion. The point forecasts are exactly those of
/// [`forecast_arima`].
pub fn forecast_arima_garch(
    arima: &ArimaSpec,
    garch: &GarchSpec,
    last_observations: &[f64],
    horizon: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let points = forecast_arima(arima, last_observations, horizon)?;
    Ok((points, forecast_garch_variance(garch, horizon)))
}

/// A fitted baseline ready to forecast the months after its training window.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedBaseline {
    pub arima: ArimaSpec,
    pub garch: Option<GarchSpec>,
    /// Fit on natural logs of the rates instead of levels.
    pub log_levels: bool,
    /// Trailing training values (on the fitting scale) seeding the forecast.
    pub last_observations: Vec<f64>,
    /// First forecast month.
    pub start: YearMonth,
}

pub fn fit_baseline(train: &RateSeries, orders: ModelOrders, log_levels: bool) -> Result<FittedBaseline> {
    let values: Vec<f64> = if log_levels {
        if train.values.iter().any(|x| *x <= 0.0) {
            return Err(Error::Domain("log levels need positive rates".into()));
        }
        train.values.iter().map(|x| x.ln()).collect()
    } else {
        train.values.clone()
    };
    let arima = fit_arima(&values, orders.p, orders.d, orders.q)?;
    let garch = match orders.garch {
        Some((gp, gq)) => Some(fit_garch(&arima.residuals, gp, gq)?),
        None => None,
    };
    let keep = orders.p + orders.d + 1;
    Ok(FittedBaseline {
        last_observations: values[values.len().saturating_sub(keep)..].to_vec(),
        start: train.end().next(),
        arima,
        garch,
        log_levels,
    })
}

impl FittedBaseline {
    pub fn orders(&self) -> ModelOrders {
        ModelOrders {
            p: self.arima.p,
            d: self.arima.d,
            q: self.arima.q,
            garch: self.garch.as_ref().map(|g| (g.p, g.q)),
        }
    }

    /// Point forecasts and forecast-error variances on the fitting scale.
    /// With GARCH the variances weight the psi coefficients by the
    /// conditional variance forecasts.
    pub fn forecast_moments(&self, horizon: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let points = forecast_arima(&self.arima, &self.last_observations, horizon)?;
        let variances = match &self.garch {
            None => forecast_variance(&self.arima, horizon),
            Some(g) => {
                let psi = self.arima.psi_weights(horizon);
                let h = forecast_garch_variance(g, horizon);
                (0..horizon)
                    .map(|k| (0..=k).map(|j| psi[j] * psi[j] * h[k - j]).sum())
                    .collect()
            }
        };
        Ok((points, variances))
    }

    /// Point forecasts in rate units.
    pub fn point_forecast(&self, horizon: usize) -> Result<Vec<f64>> {
        let (points, _) = self.forecast_moments(horizon)?;
        Ok(self.to_rates(points))
    }

    fn to_rates(&self, xs: Vec<f64>) -> Vec<f64> {
        if self.log_levels {
            xs.into_iter().map(f64::exp).collect()
        } else {
            xs
        }
    }

    /// Gaussian quantile bands around the point forecast.
    pub fn forecast_quantiles(&self, horizon: usize, levels: &[f64]) -> Result<ForecastQuantiles> {
        crate::engine::validate_levels(levels)?;
        let (points, variances) = self.forecast_moments(horizon)?;
        let normal = Normal::standard();
        let bands = levels
            .iter()
            .map(|l| {
                let z = normal.inverse_cdf(*l);
                let raw = points
                    .iter()
                    .zip(&variances)
                    .map(|(m, v)| m + z * v.max(0.0).sqrt())
                    .collect();
                self.to_rates(raw)
            })
            .collect();
        Ok(ForecastQuantiles {
            start: self.start,
            levels: levels.to_vec(),
            median: self.to_rates(points),
            bands,
        })
    }

    pub fn to_kv(&self) -> KvFile {
        let mut kv = self.arima.to_kv();
        if self.garch.is_some() {
            kv.push("model", "arima-garch");
        }
        kv.push("log_levels", self.log_levels.to_string());
        kv.push("start_year", self.start.year.to_string());
        kv.push("start_month", self.start.month.to_string());
        kv.push_list("last_observations", &self.last_observations);
        if let Some(g) = &self.garch {
            kv.extend(g.to_kv());
        }
        kv
    }

    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        let arima = ArimaSpec::from_kv(kv)?;
        let garch = match kv.get("model") {
            Some("arima-garch") => Some(GarchSpec::from_kv(kv)?),
            Some("arima") => None,
            other => {
                return Err(Error::Validation(format!(
                    "expected model arima or arima-garch, got {other:?}"
                )))
            }
        };
        let log_levels = match kv.get("log_levels").unwrap_or("false") {
            "true" => true,
            "false" => false,
            other => return Err(Error::Validation(format!("log_levels must be true or false, got {other:?}"))),
        };
        let start = YearMonth::new(kv.usize("start_year")? as i32, kv.usize("start_month")? as u32)?;
        Ok(Self {
            arima,
            garch,
            log_levels,
            last_observations: kv.list("last_observations")?,
            start,
        })
    }
}
